#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "malmem/dataset.hpp"
#include "malmem/matrix.hpp"

namespace malmem {

enum class ScoreMethod { chi_square, anova_f, mutual_info };

const char* to_string(ScoreMethod m);
ScoreMethod parse_score_method(const std::string& text);  // "chi2", "anova", "mi"

/// Parameters that, together with the data, fully determine a score vector.
struct ScoreParams {
    std::string estimator;      // "class-sums", "binned-contingency", "knn", "plugin"
    bool min_shift = false;     // chi-square: subtract per-feature minimum first
    int mi_neighbors = 0;       // knn estimator
    std::uint64_t mi_seed = 0;  // knn jitter seed
    int bins = 0;               // plugin / binned-contingency
};

/// Per-feature relevance scores from one scoring method. All scores are
/// finite and >= 0; higher means more class-relevant.
struct FeatureScoreVector {
    ScoreMethod method = ScoreMethod::chi_square;
    std::vector<double> scores;
    ScoreParams params;
};

/// Chi-square statistic per feature, treating feature values as nonnegative
/// mass: observed = per-class sum, expected = total sum x class row share,
/// score = sum over classes of (O-E)^2/E. Constant features (including
/// all-zero) score 0. Negative values are an error unless min_shift is set,
/// which subtracts the per-feature minimum before summing.
FeatureScoreVector chi2_scores(const Matrix& X, const std::vector<int>& y, int n_classes,
                               bool min_shift = false);

/// Sensitivity-check variant: chi-square on a (class x equal-width-bin)
/// contingency table instead of raw class sums.
FeatureScoreVector chi2_scores_contingency(const Matrix& X, const std::vector<int>& y,
                                           int n_classes, int bins);

/// One-way ANOVA F statistic per feature: between-class over within-class
/// variance. SS_within = 0 with SS_between > 0 yields the largest finite
/// double so ranking still works; 0/0 (constant feature) yields 0.
FeatureScoreVector anova_f_scores(const Matrix& X, const std::vector<int>& y, int n_classes);

/// Mutual information (nats) between each continuous feature and the
/// discrete label, via the nearest-neighbor continuous-discrete estimator:
/// digamma terms over per-sample k-th neighbor distances within class vs
/// neighbor counts overall. A seeded jitter of amplitude 1e-10 x max|x|
/// breaks ties; the jitter stream is keyed by (seed, feature index) and
/// bound to a canonical row ordering, so scores are invariant under row
/// permutation. Negative estimates clamp to 0; constant features score 0.
/// Requires every class to have more than k rows.
FeatureScoreVector mi_scores_knn(const Matrix& X, const std::vector<int>& y, int n_classes,
                                 int k = 3, std::uint64_t seed = 0);

/// Plug-in oracle for mutual information: discretize each feature, then
/// MI = H(X) + H(Y) - H(X,Y) with empirical-frequency entropies in nats.
/// Features with at most `bins` distinct values get one bin per distinct
/// value (exact on discrete data and invariant under bijective relabeling);
/// otherwise equal-width bins over [min, max].
FeatureScoreVector mi_scores_plugin(const Matrix& X, const std::vector<int>& y, int n_classes,
                                    int bins);

/// Overloads taking a task view paired with the view's feature matrix.
FeatureScoreVector chi2_scores(const TaskView& view, const Matrix& X, bool min_shift = false);
FeatureScoreVector anova_f_scores(const TaskView& view, const Matrix& X);
FeatureScoreVector mi_scores_knn(const TaskView& view, const Matrix& X, int k = 3,
                                 std::uint64_t seed = 0);
FeatureScoreVector mi_scores_plugin(const TaskView& view, const Matrix& X, int bins);

/// Ordered feature subset for one kept fraction.
struct SelectionProfile {
    double fraction = 1.0;
    std::vector<std::size_t> kept_indices;  // ascending
    std::vector<std::size_t> ranking;       // full order, descending score, ties to lower index
};

/// Keep the top max(1, round-half-up(fraction x n_features)) features.
SelectionProfile rank_and_select(const FeatureScoreVector& scores, double fraction);

/// Serialize one score vector as CSV rows (feature_name, method, score).
void write_scores_csv(const std::filesystem::path& path, const FeatureScoreVector& scores,
                      const std::vector<std::string>& feature_names);

}  // namespace malmem
