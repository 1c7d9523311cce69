#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "malmem/csv.hpp"
#include "malmem/error.hpp"
#include "malmem/featsel.hpp"
#include "malmem/rng.hpp"
#include "malmem/synthgen.hpp"

using namespace malmem;
using testutil::matrix_from;

namespace {

const double kLn2 = std::numbers::ln2;

// Independent scoring oracles: direct transcription of the formulas, no
// shortcuts shared with the implementation.
double chi2_oracle(const std::vector<double>& col, const std::vector<int>& y, int n_classes) {
    std::vector<double> observed(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> rows(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i < col.size(); ++i) {
        observed[static_cast<std::size_t>(y[i])] += col[i];
        rows[static_cast<std::size_t>(y[i])] += 1.0;
    }
    double total = 0.0;
    for (double o : observed) total += o;
    if (total == 0.0) return 0.0;
    double score = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        const double expected = total * rows[static_cast<std::size_t>(c)] /
                                static_cast<double>(col.size());
        if (expected > 0.0) {
            const double diff = observed[static_cast<std::size_t>(c)] - expected;
            score += diff * diff / expected;
        }
    }
    return score;
}

double anova_oracle(const std::vector<double>& col, const std::vector<int>& y, int n_classes) {
    const auto n = static_cast<double>(col.size());
    std::vector<double> sum(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> cnt(static_cast<std::size_t>(n_classes), 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) {
        sum[static_cast<std::size_t>(y[i])] += col[i];
        cnt[static_cast<std::size_t>(y[i])] += 1.0;
        grand += col[i];
    }
    grand /= n;
    double ss_b = 0.0, ss_w = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) {
        const auto c = static_cast<std::size_t>(y[i]);
        const double mean_c = sum[c] / cnt[c];
        ss_w += (col[i] - mean_c) * (col[i] - mean_c);
    }
    for (int c = 0; c < n_classes; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        const double mean_c = sum[cc] / cnt[cc];
        ss_b += cnt[cc] * (mean_c - grand) * (mean_c - grand);
    }
    if (ss_w == 0.0) return 0.0;  // oracle instances avoid this branch
    return (ss_b / (n_classes - 1)) / (ss_w / (n - n_classes));
}

}  // namespace

TEST_CASE("chi2 matches hand-evaluated values") {
    // balanced 2-class view, per-class feature sums 30 and 10:
    // expected 20/20, score (10^2 + 10^2)/20 = 10
    const auto X = matrix_from({{10}, {20}, {4}, {6}});
    const std::vector<int> y = {0, 0, 1, 1};
    const auto scores = chi2_scores(X, y, 2);
    CHECK(scores.scores[0] == doctest::Approx(10.0).epsilon(1e-12));

    // equal sums: observed == expected, score 0
    const auto balanced = matrix_from({{4}, {6}, {7}, {3}});
    CHECK(chi2_scores(balanced, y, 2).scores[0] == doctest::Approx(0.0));

    // constant-zero feature scores 0
    const auto zeros = matrix_from({{0}, {0}, {0}, {0}});
    CHECK(chi2_scores(zeros, y, 2).scores[0] == 0.0);
}

TEST_CASE("chi2 rejects negatives unless min-shift is on") {
    const auto X = matrix_from({{-1}, {2}, {3}, {4}});
    const std::vector<int> y = {0, 0, 1, 1};
    CHECK_THROWS_WITH_AS(chi2_scores(X, y, 2), doctest::Contains("feature 0"), DataError);
    CHECK_NOTHROW(chi2_scores(X, y, 2, /*min_shift=*/true));
}

TEST_CASE("anova matches hand-evaluated one-way decomposition") {
    // groups {0,1} and {2,3}: SS_b = 4, SS_w = 1, F = (4/1)/(1/2) = 8
    const auto X = matrix_from({{0}, {1}, {2}, {3}});
    const std::vector<int> y = {0, 0, 1, 1};
    CHECK(anova_f_scores(X, y, 2).scores[0] == doctest::Approx(8.0).epsilon(1e-12));

    // equal group means, nonzero spread: F = 0
    const auto flat = matrix_from({{0}, {2}, {1}, {1}});
    CHECK(anova_f_scores(flat, y, 2).scores[0] == doctest::Approx(0.0));

    // zero within-class variance with separated means: large sentinel
    const auto exact = matrix_from({{1}, {1}, {5}, {5}});
    CHECK(anova_f_scores(exact, y, 2).scores[0] == std::numeric_limits<double>::max());
}

TEST_CASE("anova preconditions") {
    const auto X = matrix_from({{0}, {1}});
    CHECK_THROWS_AS(anova_f_scores(X, {0, 1}, 2), DataError);       // N <= k
    CHECK_THROWS_AS(anova_f_scores(X, {0, 0}, 2), DataError);       // empty class
}

TEST_CASE("randomized small instances match the oracles to 1e-9 relative") {
    std::mt19937_64 gen(20240601);
    std::uniform_int_distribution<int> class_count(2, 4);
    std::uniform_int_distribution<std::size_t> row_count(8, 40);
    std::uniform_real_distribution<double> value(0.0, 50.0);

    for (int instance = 0; instance < 25; ++instance) {
        const int k = class_count(gen);
        const std::size_t n = row_count(gen);
        Matrix X(n, 3);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(i % static_cast<std::size_t>(k));  // every class occupied
            for (std::size_t j = 0; j < 3; ++j) X(i, j) = value(gen);
        }
        const auto chi = chi2_scores(X, y, k);
        const auto anova = anova_f_scores(X, y, k);
        for (std::size_t j = 0; j < 3; ++j) {
            const double chi_ref = chi2_oracle(X.column(j), y, k);
            const double anova_ref = anova_oracle(X.column(j), y, k);
            CHECK(chi.scores[j] == doctest::Approx(chi_ref).epsilon(1e-9));
            CHECK(anova.scores[j] == doctest::Approx(anova_ref).epsilon(1e-9));
        }
    }
}

TEST_CASE("plug-in MI on discrete data") {
    SUBCASE("X constant: 0") {
        const auto X = matrix_from({{1}, {1}, {1}, {1}});
        CHECK(mi_scores_plugin(X, {0, 1, 0, 1}, 2, 8).scores[0] == 0.0);
    }
    SUBCASE("Y = X uniform binary: exactly ln 2") {
        Matrix X(100, 1);
        std::vector<int> y(100);
        for (std::size_t i = 0; i < 100; ++i) {
            X(i, 0) = static_cast<double>(i % 2);
            y[i] = static_cast<int>(i % 2);
        }
        CHECK(mi_scores_plugin(X, y, 2, 8).scores[0] == doctest::Approx(kLn2).epsilon(1e-12));
    }
    SUBCASE("bijective relabeling leaves the score unchanged") {
        std::mt19937_64 gen(7);
        Matrix X(60, 1);
        std::vector<int> y(60);
        for (std::size_t i = 0; i < 60; ++i) {
            X(i, 0) = static_cast<double>(gen() % 5);
            y[i] = static_cast<int>(gen() % 3);
        }
        const double base = mi_scores_plugin(X, y, 3, 32).scores[0];
        const double remap[5] = {103.5, -2.0, 7.25, 0.125, 55.0};  // arbitrary bijection
        Matrix Z(60, 1);
        for (std::size_t i = 0; i < 60; ++i) Z(i, 0) = remap[static_cast<int>(X(i, 0))];
        CHECK(mi_scores_plugin(Z, y, 3, 32).scores[0] == doctest::Approx(base).epsilon(1e-12));

        // relabeling the classes too
        std::vector<int> y2(60);
        for (std::size_t i = 0; i < 60; ++i) y2[i] = (y[i] + 1) % 3;
        CHECK(mi_scores_plugin(X, y2, 3, 32).scores[0] == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("bounded by min(H(X), H(Y))") {
        std::mt19937_64 gen(11);
        Matrix X(200, 1);
        std::vector<int> y(200);
        std::map<double, int> x_counts;
        std::map<int, int> y_counts;
        for (std::size_t i = 0; i < 200; ++i) {
            X(i, 0) = static_cast<double>(gen() % 7);
            y[i] = static_cast<int>(gen() % 2);
            ++x_counts[X(i, 0)];
            ++y_counts[y[i]];
        }
        auto entropy = [](const auto& counts) {
            double h = 0.0;
            for (const auto& [_, c] : counts) {
                const double p = c / 200.0;
                h -= p * std::log(p);
            }
            return h;
        };
        const double mi = mi_scores_plugin(X, y, 2, 16).scores[0];
        CHECK(mi <= std::min(entropy(x_counts), entropy(y_counts)) + 1e-9);
    }
}

TEST_CASE("knn MI estimator") {
    SUBCASE("constant feature: 0") {
        Matrix X(40, 1, 3.25);
        std::vector<int> y(40);
        for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<int>(i % 2);
        CHECK(mi_scores_knn(X, y, 2).scores[0] == 0.0);
    }
    SUBCASE("feature equals a balanced binary label: about ln 2") {
        const std::size_t n = 1000;
        Matrix X(n, 1);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(i % 2);
            X(i, 0) = static_cast<double>(y[i]);
        }
        const double mi = mi_scores_knn(X, y, 2, 3, 17).scores[0];
        CHECK(std::abs(mi - kLn2) < 0.05);
    }
    SUBCASE("agrees with the plug-in oracle on separated Gaussians") {
        SynthSpec spec;
        spec.n_samples = 2000;
        spec.n_features = 2;
        spec.n_informative = 1;
        spec.n_classes = 2;
        spec.class_sep = 5.0;
        spec.seed = 99;
        const auto blobs = make_blobs(spec);
        const auto knn = mi_scores_knn(blobs.X, blobs.y, 2, 3, 5);
        const auto plugin = mi_scores_plugin(blobs.X, blobs.y, 2, 32);
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(std::abs(knn.scores[j] - plugin.scores[j]) < 0.05);
    }
    SUBCASE("class with too few rows is an error") {
        Matrix X(5, 1);
        for (std::size_t i = 0; i < 5; ++i) X(i, 0) = static_cast<double>(i);
        CHECK_THROWS_AS(mi_scores_knn(X, {0, 0, 0, 0, 1}, 2, 3), DataError);
        CHECK_THROWS_AS(mi_scores_knn(X, {0, 0, 0, 1, 1}, 2, 0), ConfigError);
    }
}

TEST_CASE("row permutation leaves every score unchanged") {
    SynthSpec spec;
    spec.n_samples = 300;
    spec.n_features = 4;
    spec.n_informative = 2;
    spec.n_classes = 3;
    spec.class_sep = 2.0;
    spec.seed = 3;
    const auto blobs = make_blobs(spec);

    Rng rng(1234);
    auto perm = rng.permutation(spec.n_samples);
    Matrix Xp(spec.n_samples, spec.n_features);
    std::vector<int> yp(spec.n_samples);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        yp[i] = blobs.y[perm[i]];
        for (std::size_t j = 0; j < spec.n_features; ++j) Xp(i, j) = blobs.X(perm[i], j);
    }

    // chi2 needs nonnegative values here
    const auto chi_a = chi2_scores(blobs.X, blobs.y, 3, true).scores;
    const auto chi_b = chi2_scores(Xp, yp, 3, true).scores;
    const auto f_a = anova_f_scores(blobs.X, blobs.y, 3).scores;
    const auto f_b = anova_f_scores(Xp, yp, 3).scores;
    const auto mi_a = mi_scores_knn(blobs.X, blobs.y, 3, 3, 42).scores;
    const auto mi_b = mi_scores_knn(Xp, yp, 3, 3, 42).scores;
    for (std::size_t j = 0; j < spec.n_features; ++j) {
        CHECK(chi_a[j] == doctest::Approx(chi_b[j]).epsilon(1e-12));
        CHECK(f_a[j] == doctest::Approx(f_b[j]).epsilon(1e-12));
        CHECK(mi_a[j] == mi_b[j]);  // identical jitter stream: bitwise equal
    }
}

TEST_CASE("scale behavior: anova invariant, chi2 linear") {
    std::mt19937_64 gen(2222);
    std::uniform_real_distribution<double> value(0.1, 10.0);
    const std::size_t n = 30;
    Matrix X(n, 2);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 3);
        X(i, 0) = value(gen);
        X(i, 1) = value(gen);
    }
    const double a = 7.5, b = 3.0, c = 4.25;
    Matrix Xaff(n, 2), Xscale(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        Xaff(i, 0) = a * X(i, 0) + b;
        Xaff(i, 1) = a * X(i, 1) + b;
        Xscale(i, 0) = c * X(i, 0);
        Xscale(i, 1) = c * X(i, 1);
    }
    const auto f0 = anova_f_scores(X, y, 3).scores;
    const auto f1 = anova_f_scores(Xaff, y, 3).scores;
    const auto chi0 = chi2_scores(X, y, 3).scores;
    const auto chi1 = chi2_scores(Xscale, y, 3).scores;
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(f1[j] == doctest::Approx(f0[j]).epsilon(1e-9));
        CHECK(chi1[j] == doctest::Approx(c * chi0[j]).epsilon(1e-9));
    }
}

TEST_CASE("rank_and_select") {
    FeatureScoreVector scores;
    scores.method = ScoreMethod::mutual_info;

    SUBCASE("fraction 1.0 keeps everything") {
        scores.scores.assign(56, 1.0);
        const auto profile = rank_and_select(scores, 1.0);
        CHECK(profile.kept_indices.size() == 56);
    }
    SUBCASE("fraction 0.5 of 56 keeps 28; 0.25 keeps 14") {
        scores.scores.assign(56, 1.0);
        CHECK(rank_and_select(scores, 0.5).kept_indices.size() == 28);
        CHECK(rank_and_select(scores, 0.25).kept_indices.size() == 14);
    }
    SUBCASE("ties break to the lower index") {
        scores.scores = {3.0, 3.0, 1.0};
        const auto profile = rank_and_select(scores, 2.0 / 3.0);
        CHECK(profile.kept_indices == std::vector<std::size_t>{0, 1});
        CHECK(profile.ranking == std::vector<std::size_t>{0, 1, 2});
    }
    SUBCASE("floor of one feature") {
        scores.scores = {0.5, 0.9, 0.1};
        CHECK(rank_and_select(scores, 0.01).kept_indices == std::vector<std::size_t>{1});
    }
    SUBCASE("invalid fractions") {
        scores.scores = {1.0};
        CHECK_THROWS_AS(rank_and_select(scores, 0.0), ConfigError);
        CHECK_THROWS_AS(rank_and_select(scores, 1.5), ConfigError);
        CHECK_THROWS_AS(rank_and_select(scores, -0.25), ConfigError);
    }
    SUBCASE("nestedness: top quarter inside top half") {
        std::mt19937_64 gen(5);
        scores.scores.resize(56);
        for (auto& s : scores.scores)
            s = static_cast<double>(gen() % 1000) / 100.0;
        const auto quarter = rank_and_select(scores, 0.25).kept_indices;
        const auto half = rank_and_select(scores, 0.5).kept_indices;
        CHECK(std::includes(half.begin(), half.end(), quarter.begin(), quarter.end()));
    }
}

TEST_CASE("all three methods score a constant feature 0") {
    Matrix X(24, 1, 5.5);
    std::vector<int> y(24);
    for (std::size_t i = 0; i < 24; ++i) y[i] = static_cast<int>(i % 2);
    CHECK(chi2_scores(X, y, 2).scores[0] == 0.0);
    CHECK(anova_f_scores(X, y, 2).scores[0] == 0.0);
    CHECK(mi_scores_knn(X, y, 2).scores[0] == 0.0);
    CHECK(mi_scores_plugin(X, y, 2, 8).scores[0] == 0.0);
}

TEST_CASE("contingency chi2 variant ranks an informative feature above noise") {
    SynthSpec spec;
    spec.n_samples = 600;
    spec.n_features = 2;
    spec.n_informative = 1;
    spec.n_classes = 2;
    spec.class_sep = 4.0;
    spec.seed = 21;
    const auto blobs = make_blobs(spec);
    const auto scores = chi2_scores_contingency(blobs.X, blobs.y, 2, 16);
    const std::size_t informative = blobs.informative[0];
    CHECK(scores.scores[informative] > scores.scores[1 - informative]);
}

TEST_CASE("score serialization to csv") {
    testutil::TempDir dir;
    FeatureScoreVector scores;
    scores.method = ScoreMethod::anova_f;
    scores.scores = {1.5, 0.25};
    write_scores_csv(dir.file("s.csv"), scores, {"alpha", "beta"});
    const auto table = read_csv_file(dir.file("s.csv"));
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0] == std::vector<std::string>{"alpha", "anova", "1.5"});
    CHECK(table.rows[1] == std::vector<std::string>{"beta", "anova", "0.25"});
}
