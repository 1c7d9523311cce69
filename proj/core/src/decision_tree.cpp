#include "decision_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "malmem/error.hpp"

namespace malmem::detail {

namespace {

struct SplitCandidate {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();  // weighted Gini, lower is better
};

double gini_of(const std::vector<double>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double s = 0.0;
    for (double c : counts) {
        const double p = c / total;
        s += p * p;
    }
    return 1.0 - s;
}

// Best midpoint split of one feature: prefix class counts over the
// value-sorted node samples. Returns infinity score if the feature is
// constant within the node.
SplitCandidate best_exhaustive_split(const Matrix& X, const std::vector<int>& y,
                                     std::span<const std::size_t> node, std::size_t feature,
                                     int n_classes, std::vector<std::size_t>& scratch) {
    const std::size_t n = node.size();
    scratch.assign(node.begin(), node.end());
    std::sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
        return X(a, feature) < X(b, feature);
    });
    if (X(scratch.front(), feature) == X(scratch.back(), feature)) return {};

    std::vector<double> left(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> right(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i : scratch) right[static_cast<std::size_t>(y[i])] += 1.0;

    SplitCandidate best;
    best.feature = static_cast<std::int32_t>(feature);
    for (std::size_t t = 1; t < n; ++t) {
        const std::size_t moved = scratch[t - 1];
        left[static_cast<std::size_t>(y[moved])] += 1.0;
        right[static_cast<std::size_t>(y[moved])] -= 1.0;
        const double prev = X(scratch[t - 1], feature);
        const double cur = X(scratch[t], feature);
        if (prev == cur) continue;
        const auto nl = static_cast<double>(t);
        const auto nr = static_cast<double>(n - t);
        const double score =
            (nl * gini_of(left, nl) + nr * gini_of(right, nr)) / static_cast<double>(n);
        if (score < best.score) {
            best.score = score;
            best.threshold = prev + 0.5 * (cur - prev);
        }
    }
    return best;
}

SplitCandidate random_threshold_split(const Matrix& X, const std::vector<int>& y,
                                      std::span<const std::size_t> node, std::size_t feature,
                                      int n_classes, double lo, double hi, Rng& rng) {
    SplitCandidate cand;
    cand.feature = static_cast<std::int32_t>(feature);
    cand.threshold = rng.uniform(lo, hi);
    std::vector<double> left(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> right(static_cast<std::size_t>(n_classes), 0.0);
    double nl = 0.0, nr = 0.0;
    for (std::size_t i : node) {
        if (X(i, feature) <= cand.threshold) {
            left[static_cast<std::size_t>(y[i])] += 1.0;
            nl += 1.0;
        } else {
            right[static_cast<std::size_t>(y[i])] += 1.0;
            nr += 1.0;
        }
    }
    cand.score = (nl * gini_of(left, nl) + nr * gini_of(right, nr)) / static_cast<double>(node.size());
    return cand;
}

int majority_class(const std::vector<std::size_t>& counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;  // ties keep the lower id
    return static_cast<int>(best);
}

}  // namespace

Tree build_tree(const Matrix& X, const std::vector<int>& y, std::vector<std::size_t> samples,
                const TreeConfig& cfg, Rng& rng) {
    if (samples.empty()) throw Error("build_tree: no samples");
    const std::size_t d = X.cols();
    const int max_features =
        cfg.max_features > 0 ? std::min<int>(cfg.max_features, static_cast<int>(d))
                             : static_cast<int>(d);

    Tree tree;
    struct Frame {
        std::size_t begin, end;
        std::int32_t node;
    };
    tree.emplace_back();
    std::vector<Frame> stack{{0, samples.size(), 0}};
    std::vector<std::size_t> scratch;

    while (!stack.empty()) {
        const Frame frame = stack.back();
        stack.pop_back();
        const std::span<std::size_t> node_samples{samples.data() + frame.begin,
                                                  frame.end - frame.begin};

        std::vector<std::size_t> counts(static_cast<std::size_t>(cfg.n_classes), 0);
        for (std::size_t i : node_samples) ++counts[static_cast<std::size_t>(y[i])];
        const int majority = majority_class(counts);
        const bool pure = counts[static_cast<std::size_t>(majority)] == node_samples.size();

        auto make_leaf = [&] { tree[static_cast<std::size_t>(frame.node)].leaf_class = majority; };

        if (pure || node_samples.size() < static_cast<std::size_t>(cfg.min_samples_split)) {
            make_leaf();
            continue;
        }

        // Examine features in random order until max_features non-constant
        // candidates have been scored.
        const auto order = rng.permutation(d);
        SplitCandidate best;
        int examined = 0;
        for (std::size_t f : order) {
            double lo = X(node_samples.front(), f);
            double hi = lo;
            for (std::size_t i : node_samples) {
                lo = std::min(lo, X(i, f));
                hi = std::max(hi, X(i, f));
            }
            if (lo == hi) continue;
            const SplitCandidate cand =
                cfg.random_thresholds
                    ? random_threshold_split(X, y, node_samples, f, cfg.n_classes, lo, hi, rng)
                    : best_exhaustive_split(X, y, node_samples, f, cfg.n_classes, scratch);
            if (cand.score < best.score) best = cand;
            if (++examined == max_features) break;
        }
        if (best.feature < 0) {
            make_leaf();
            continue;
        }

        const auto pivot = std::partition(
            samples.begin() + static_cast<std::ptrdiff_t>(frame.begin),
            samples.begin() + static_cast<std::ptrdiff_t>(frame.end), [&](std::size_t i) {
                return X(i, static_cast<std::size_t>(best.feature)) <= best.threshold;
            });
        const auto mid = static_cast<std::size_t>(pivot - samples.begin());
        if (mid == frame.begin || mid == frame.end) {
            // Random threshold can land outside the occupied range only by
            // floating-point edge cases; fall back to a leaf.
            make_leaf();
            continue;
        }

        const auto left_id = static_cast<std::int32_t>(tree.size());
        tree.emplace_back();
        const auto right_id = static_cast<std::int32_t>(tree.size());
        tree.emplace_back();
        auto& node = tree[static_cast<std::size_t>(frame.node)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left_id;
        node.right = right_id;
        // Left frame on top: children consume the node RNG in preorder.
        stack.push_back({mid, frame.end, right_id});
        stack.push_back({frame.begin, mid, left_id});
    }
    return tree;
}

int tree_predict(const Tree& tree, std::span<const double> row) {
    std::int32_t at = 0;
    while (tree[static_cast<std::size_t>(at)].feature >= 0) {
        const auto& node = tree[static_cast<std::size_t>(at)];
        at = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return tree[static_cast<std::size_t>(at)].leaf_class;
}

Stump fit_stump(const Matrix& X, const std::vector<int>& y, const std::vector<double>& w,
                int n_classes) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    if (n == 0 || d == 0) throw Error("fit_stump: empty input");

    double best_score = std::numeric_limits<double>::infinity();
    Stump best;
    bool found = false;
    std::vector<std::size_t> order(n);

    for (std::size_t f = 0; f < d; ++f) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
        if (X(order.front(), f) == X(order.back(), f)) continue;

        std::vector<double> left(static_cast<std::size_t>(n_classes), 0.0);
        std::vector<double> right(static_cast<std::size_t>(n_classes), 0.0);
        double wl = 0.0, wr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            right[static_cast<std::size_t>(y[i])] += w[i];
            wr += w[i];
        }
        const double w_total = wr;

        for (std::size_t t = 1; t < n; ++t) {
            const std::size_t moved = order[t - 1];
            left[static_cast<std::size_t>(y[moved])] += w[moved];
            right[static_cast<std::size_t>(y[moved])] -= w[moved];
            wl += w[moved];
            wr -= w[moved];
            const double prev = X(order[t - 1], f);
            const double cur = X(order[t], f);
            if (prev == cur) continue;
            const double score = (wl * gini_of(left, wl) + wr * gini_of(right, wr)) / w_total;
            if (score < best_score) {
                best_score = score;
                best.feature = static_cast<std::int32_t>(f);
                best.threshold = prev + 0.5 * (cur - prev);
                best.left_class = static_cast<std::int32_t>(
                    std::max_element(left.begin(), left.end()) - left.begin());
                best.right_class = static_cast<std::int32_t>(
                    std::max_element(right.begin(), right.end()) - right.begin());
                found = true;
            }
        }
    }
    if (!found) {
        // Every feature constant: degenerate stump predicting the weighted
        // majority class everywhere.
        std::vector<double> totals(static_cast<std::size_t>(n_classes), 0.0);
        for (std::size_t i = 0; i < n; ++i) totals[static_cast<std::size_t>(y[i])] += w[i];
        const auto m = static_cast<std::int32_t>(
            std::max_element(totals.begin(), totals.end()) - totals.begin());
        best = {.feature = 0, .threshold = 0.0, .left_class = m, .right_class = m};
    }
    return best;
}

}  // namespace malmem::detail
