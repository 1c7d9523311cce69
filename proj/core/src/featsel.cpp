#include "malmem/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "malmem/csv.hpp"
#include "malmem/error.hpp"
#include "malmem/rng.hpp"

namespace malmem {

namespace {

void check_labels(const std::vector<int>& y, int n_classes, std::size_t n_rows) {
    if (y.size() != n_rows) throw Error("labels/matrix row count mismatch");
    if (n_classes < 2) throw DataError("scoring needs at least 2 classes");
    for (int l : y)
        if (l < 0 || l >= n_classes) throw Error("label id out of range");
}

std::vector<std::size_t> class_counts(const std::vector<int>& y, int n_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int l : y) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

bool is_constant(const std::vector<double>& col) {
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    return *lo == *hi;
}

// Digamma via the recurrence psi(x) = psi(x+1) - 1/x and the asymptotic
// series for x >= 6. Absolute error below 1e-12 on x >= 1.
double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

double entropy_from_counts(const std::vector<std::size_t>& counts, std::size_t total) {
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

// Bin assignment for the plug-in estimator. At most `bins` distinct values:
// one bin per value. Otherwise equal-width over [min, max].
std::vector<int> discretize(const std::vector<double>& col, int bins) {
    std::vector<double> distinct(col);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<int> out(col.size());
    if (distinct.size() <= static_cast<std::size_t>(bins)) {
        std::map<double, int> bin_of;
        for (std::size_t i = 0; i < distinct.size(); ++i) bin_of[distinct[i]] = static_cast<int>(i);
        for (std::size_t i = 0; i < col.size(); ++i) out[i] = bin_of.at(col[i]);
        return out;
    }
    const double lo = distinct.front();
    const double hi = distinct.back();
    const double width = (hi - lo) / bins;
    for (std::size_t i = 0; i < col.size(); ++i) {
        int b = static_cast<int>((col[i] - lo) / width);
        out[i] = std::clamp(b, 0, bins - 1);
    }
    return out;
}

double plugin_mi_from_bins(const std::vector<int>& xbin, int n_bins, const std::vector<int>& y,
                           int n_classes) {
    const std::size_t n = xbin.size();
    std::vector<std::size_t> cx(static_cast<std::size_t>(n_bins), 0);
    std::vector<std::size_t> cy(static_cast<std::size_t>(n_classes), 0);
    std::vector<std::size_t> cxy(static_cast<std::size_t>(n_bins) * n_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++cx[static_cast<std::size_t>(xbin[i])];
        ++cy[static_cast<std::size_t>(y[i])];
        ++cxy[static_cast<std::size_t>(xbin[i]) * n_classes + y[i]];
    }
    const double mi = entropy_from_counts(cx, n) + entropy_from_counts(cy, n) -
                      entropy_from_counts(cxy, n);
    return std::max(0.0, mi);
}

}  // namespace

const char* to_string(ScoreMethod m) {
    switch (m) {
        case ScoreMethod::chi_square: return "chi2";
        case ScoreMethod::anova_f: return "anova";
        case ScoreMethod::mutual_info: return "mi";
    }
    return "?";
}

ScoreMethod parse_score_method(const std::string& text) {
    if (text == "chi2" || text == "chi" || text == "chi-square") return ScoreMethod::chi_square;
    if (text == "anova" || text == "f" || text == "anova-f") return ScoreMethod::anova_f;
    if (text == "mi" || text == "mutual" || text == "mutual-info") return ScoreMethod::mutual_info;
    throw ConfigError("unknown score method: '" + text + "' (expected chi2, anova or mi)");
}

FeatureScoreVector chi2_scores(const Matrix& X, const std::vector<int>& y, int n_classes,
                               bool min_shift) {
    check_labels(y, n_classes, X.rows());
    const auto n_c = class_counts(y, n_classes);
    const double n = static_cast<double>(X.rows());

    FeatureScoreVector out;
    out.method = ScoreMethod::chi_square;
    out.params = {.estimator = "class-sums", .min_shift = min_shift};
    out.scores.resize(X.cols());

    for (std::size_t j = 0; j < X.cols(); ++j) {
        std::vector<double> col = X.column(j);
        if (is_constant(col)) {  // O == E exactly, score 0
            out.scores[j] = 0.0;
            continue;
        }
        if (min_shift) {
            const double lo = *std::min_element(col.begin(), col.end());
            for (double& v : col) v -= lo;
        }
        std::vector<double> observed(static_cast<std::size_t>(n_classes), 0.0);
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (col[i] < 0.0)
                throw DataError("chi2: negative value in feature " + std::to_string(j) +
                                " at row " + std::to_string(i) + " (enable min-shift)");
            observed[static_cast<std::size_t>(y[i])] += col[i];
        }
        const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
        if (total == 0.0) {
            out.scores[j] = 0.0;
            continue;
        }
        double score = 0.0;
        for (int c = 0; c < n_classes; ++c) {
            const double expected = total * (static_cast<double>(n_c[c]) / n);
            if (expected <= 0.0) continue;
            const double d = observed[static_cast<std::size_t>(c)] - expected;
            score += d * d / expected;
        }
        out.scores[j] = score;
    }
    return out;
}

FeatureScoreVector chi2_scores_contingency(const Matrix& X, const std::vector<int>& y,
                                           int n_classes, int bins) {
    check_labels(y, n_classes, X.rows());
    if (bins < 2) throw ConfigError("chi2 contingency: bins must be >= 2");
    const auto n_c = class_counts(y, n_classes);
    const double n = static_cast<double>(X.rows());

    FeatureScoreVector out;
    out.method = ScoreMethod::chi_square;
    out.params = {.estimator = "binned-contingency", .bins = bins};
    out.scores.resize(X.cols());

    for (std::size_t j = 0; j < X.cols(); ++j) {
        const std::vector<double> col = X.column(j);
        if (is_constant(col)) {
            out.scores[j] = 0.0;
            continue;
        }
        const std::vector<int> xbin = discretize(col, bins);
        const int n_bins = 1 + *std::max_element(xbin.begin(), xbin.end());
        std::vector<double> cell(static_cast<std::size_t>(n_bins) * n_classes, 0.0);
        std::vector<double> row_total(static_cast<std::size_t>(n_bins), 0.0);
        for (std::size_t i = 0; i < col.size(); ++i) {
            ++cell[static_cast<std::size_t>(xbin[i]) * n_classes + y[i]];
            ++row_total[static_cast<std::size_t>(xbin[i])];
        }
        double score = 0.0;
        for (int b = 0; b < n_bins; ++b) {
            for (int c = 0; c < n_classes; ++c) {
                const double expected = row_total[static_cast<std::size_t>(b)] *
                                        (static_cast<double>(n_c[c]) / n);
                if (expected <= 0.0) continue;
                const double d = cell[static_cast<std::size_t>(b) * n_classes + c] - expected;
                score += d * d / expected;
            }
        }
        out.scores[j] = score;
    }
    return out;
}

FeatureScoreVector anova_f_scores(const Matrix& X, const std::vector<int>& y, int n_classes) {
    check_labels(y, n_classes, X.rows());
    const auto n_c = class_counts(y, n_classes);
    for (int c = 0; c < n_classes; ++c)
        if (n_c[static_cast<std::size_t>(c)] == 0)
            throw DataError("anova: class " + std::to_string(c) + " has no rows");
    const std::size_t n = X.rows();
    const std::size_t k = static_cast<std::size_t>(n_classes);
    if (n <= k) throw DataError("anova: need more rows than classes");

    FeatureScoreVector out;
    out.method = ScoreMethod::anova_f;
    out.params = {.estimator = "one-way"};
    out.scores.resize(X.cols());

    for (std::size_t j = 0; j < X.cols(); ++j) {
        const std::vector<double> col = X.column(j);
        if (is_constant(col)) {
            out.scores[j] = 0.0;
            continue;
        }
        std::vector<double> mean_c(k, 0.0);
        double grand = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean_c[static_cast<std::size_t>(y[i])] += col[i];
            grand += col[i];
        }
        grand /= static_cast<double>(n);
        for (std::size_t c = 0; c < k; ++c) mean_c[c] /= static_cast<double>(n_c[c]);

        double ss_within = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = col[i] - mean_c[static_cast<std::size_t>(y[i])];
            ss_within += d * d;
        }
        double ss_between = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double d = mean_c[c] - grand;
            ss_between += static_cast<double>(n_c[c]) * d * d;
        }
        if (ss_within == 0.0) {
            out.scores[j] = ss_between > 0.0 ? std::numeric_limits<double>::max() : 0.0;
            continue;
        }
        const double ms_between = ss_between / static_cast<double>(k - 1);
        const double ms_within = ss_within / static_cast<double>(n - k);
        out.scores[j] = std::max(0.0, ms_between / ms_within);
    }
    return out;
}

FeatureScoreVector mi_scores_knn(const Matrix& X, const std::vector<int>& y, int n_classes, int k,
                                 std::uint64_t seed) {
    check_labels(y, n_classes, X.rows());
    if (k < 1) throw ConfigError("mi: neighbor count must be >= 1");
    const auto n_c = class_counts(y, n_classes);
    for (int c = 0; c < n_classes; ++c)
        if (n_c[static_cast<std::size_t>(c)] <= static_cast<std::size_t>(k))
            throw DataError("mi: class " + std::to_string(c) + " has " +
                            std::to_string(n_c[static_cast<std::size_t>(c)]) +
                            " rows, need more than k=" + std::to_string(k));
    const std::size_t n = X.rows();

    FeatureScoreVector out;
    out.method = ScoreMethod::mutual_info;
    out.params = {.estimator = "knn", .mi_neighbors = k, .mi_seed = seed};
    out.scores.resize(X.cols());

    const double psi_n = digamma(static_cast<double>(n));
    const double psi_k = digamma(static_cast<double>(k));
    double mean_psi_label = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mean_psi_label += digamma(static_cast<double>(n_c[static_cast<std::size_t>(y[i])]));
    mean_psi_label /= static_cast<double>(n);

    for (std::size_t j = 0; j < X.cols(); ++j) {
        const std::vector<double> col = X.column(j);
        if (is_constant(col)) {
            out.scores[j] = 0.0;
            continue;
        }

        // Canonical row ordering: jitter draws attach to the sorted
        // (value, label) sequence, not to file row order, so any row
        // permutation of the input sees the same jittered sample.
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (col[a] != col[b]) return col[a] < col[b];
            return y[a] < y[b];
        });

        double amp = 0.0;
        for (double v : col) amp = std::max(amp, std::abs(v));
        amp *= 1e-10;

        Rng rng(mix_seed(seed, j));
        std::vector<double> xs(n);
        std::vector<int> ys(n);
        for (std::size_t t = 0; t < n; ++t) {
            xs[t] = col[order[t]] + amp * (rng.uniform01() - 0.5);
            ys[t] = y[order[t]];
        }

        // Sort the jittered sample once; per-class positions share it.
        std::vector<std::size_t> sorted(n);
        std::iota(sorted.begin(), sorted.end(), 0);
        std::sort(sorted.begin(), sorted.end(),
                  [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
        std::vector<double> xsorted(n);
        for (std::size_t t = 0; t < n; ++t) xsorted[t] = xs[sorted[t]];

        std::vector<std::vector<double>> by_class(static_cast<std::size_t>(n_classes));
        for (int c = 0; c < n_classes; ++c)
            by_class[static_cast<std::size_t>(c)].reserve(n_c[static_cast<std::size_t>(c)]);
        for (std::size_t t = 0; t < n; ++t)
            by_class[static_cast<std::size_t>(ys[sorted[t]])].push_back(xsorted[t]);

        std::vector<std::size_t> pos_in_class(static_cast<std::size_t>(n_classes), 0);
        double mean_psi_m = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const auto& cls = by_class[static_cast<std::size_t>(ys[sorted[t]])];
            const std::size_t p = pos_in_class[static_cast<std::size_t>(ys[sorted[t]])]++;
            // k-th nearest neighbor within the class: scan the 2k-window
            // around position p in the class-sorted array.
            const std::size_t lo = p >= static_cast<std::size_t>(k) ? p - k : 0;
            const std::size_t hi = std::min(cls.size() - 1, p + static_cast<std::size_t>(k));
            std::vector<double> dists;
            dists.reserve(hi - lo);
            for (std::size_t q = lo; q <= hi; ++q)
                if (q != p) dists.push_back(std::abs(cls[q] - cls[p]));
            std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
            const double kth = dists[static_cast<std::size_t>(k - 1)];

            // Count all samples within a radius shrunk to exclude the k-th
            // neighbor itself; the query point is included. The binary-search
            // window is refined with exact distance comparisons because
            // x +/- radius rounds at x's ulp scale, which would re-admit the
            // k-th neighbor.
            const double radius = std::nextafter(kth, 0.0);
            const double x = cls[p];
            auto lo_idx = static_cast<std::size_t>(
                std::lower_bound(xsorted.begin(), xsorted.end(), x - radius) - xsorted.begin());
            auto hi_idx = static_cast<std::size_t>(
                std::upper_bound(xsorted.begin(), xsorted.end(), x + radius) - xsorted.begin());
            while (lo_idx > 0 && std::abs(xsorted[lo_idx - 1] - x) <= radius) --lo_idx;
            while (lo_idx < hi_idx && std::abs(xsorted[lo_idx] - x) > radius) ++lo_idx;
            while (hi_idx < n && std::abs(xsorted[hi_idx] - x) <= radius) ++hi_idx;
            while (hi_idx > lo_idx && std::abs(xsorted[hi_idx - 1] - x) > radius) --hi_idx;
            const auto m = static_cast<double>(hi_idx - lo_idx);
            mean_psi_m += digamma(std::max(1.0, m));
        }
        mean_psi_m /= static_cast<double>(n);

        const double mi = psi_n + psi_k - mean_psi_label - mean_psi_m;
        out.scores[j] = std::max(0.0, mi);
    }
    return out;
}

FeatureScoreVector mi_scores_plugin(const Matrix& X, const std::vector<int>& y, int n_classes,
                                    int bins) {
    check_labels(y, n_classes, X.rows());
    if (bins < 2) throw ConfigError("mi plugin: bins must be >= 2");

    FeatureScoreVector out;
    out.method = ScoreMethod::mutual_info;
    out.params = {.estimator = "plugin", .bins = bins};
    out.scores.resize(X.cols());

    for (std::size_t j = 0; j < X.cols(); ++j) {
        const std::vector<double> col = X.column(j);
        if (is_constant(col)) {
            out.scores[j] = 0.0;
            continue;
        }
        const std::vector<int> xbin = discretize(col, bins);
        const int n_bins = 1 + *std::max_element(xbin.begin(), xbin.end());
        out.scores[j] = plugin_mi_from_bins(xbin, n_bins, y, n_classes);
    }
    return out;
}

FeatureScoreVector chi2_scores(const TaskView& view, const Matrix& X, bool min_shift) {
    return chi2_scores(X, view.labels, view.n_classes(), min_shift);
}
FeatureScoreVector anova_f_scores(const TaskView& view, const Matrix& X) {
    return anova_f_scores(X, view.labels, view.n_classes());
}
FeatureScoreVector mi_scores_knn(const TaskView& view, const Matrix& X, int k,
                                 std::uint64_t seed) {
    return mi_scores_knn(X, view.labels, view.n_classes(), k, seed);
}
FeatureScoreVector mi_scores_plugin(const TaskView& view, const Matrix& X, int bins) {
    return mi_scores_plugin(X, view.labels, view.n_classes(), bins);
}

SelectionProfile rank_and_select(const FeatureScoreVector& scores, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw ConfigError("selection fraction must be in (0, 1], got " + std::to_string(fraction));
    const std::size_t n = scores.scores.size();
    if (n == 0) throw ConfigError("selection on an empty score vector");

    SelectionProfile profile;
    profile.fraction = fraction;
    profile.ranking.resize(n);
    std::iota(profile.ranking.begin(), profile.ranking.end(), 0);
    std::sort(profile.ranking.begin(), profile.ranking.end(), [&](std::size_t a, std::size_t b) {
        if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
        return a < b;
    });

    // round-half-up, floor of 1
    const auto kept = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5)));
    profile.kept_indices.assign(profile.ranking.begin(),
                                profile.ranking.begin() + static_cast<std::ptrdiff_t>(kept));
    std::sort(profile.kept_indices.begin(), profile.kept_indices.end());
    return profile;
}

void write_scores_csv(const std::filesystem::path& path, const FeatureScoreVector& scores,
                      const std::vector<std::string>& feature_names) {
    if (feature_names.size() != scores.scores.size())
        throw Error("write_scores_csv: name/score length mismatch");
    std::vector<std::vector<std::string>> rows;
    rows.reserve(scores.scores.size());
    for (std::size_t j = 0; j < scores.scores.size(); ++j)
        rows.push_back({feature_names[j], to_string(scores.method), format_double(scores.scores[j])});
    write_csv_file(path, {"feature_name", "method", "score"}, rows);
}

}  // namespace malmem
