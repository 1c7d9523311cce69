#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "malmem/featsel.hpp"
#include "malmem/matrix.hpp"
#include "malmem/models.hpp"

namespace malmem {

/// Per-row fold assignment. Within each class, rows are shuffled by a
/// class-keyed seed stream and dealt round-robin, so per-class fold sizes
/// differ by at most one.
struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;  // per row, in [0, k)
    std::uint64_t seed = 0;
};

FoldPlan stratified_folds(const std::vector<int>& y, int n_classes, int k, std::uint64_t seed);

using ConfusionMatrix = std::vector<std::vector<long long>>;

/// Entry (i, j) counts rows with true class i predicted as j.
ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int n_classes);

/// Unweighted mean of per-class F1 over all n_classes. A class with zero
/// true rows and zero predictions contributes F1 = 0.
double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int n_classes);
double macro_f1_from_confusion(const ConfusionMatrix& cm);
double accuracy_from_confusion(const ConfusionMatrix& cm);

enum class SelectionMode { per_fold, global };
const char* to_string(SelectionMode m);
SelectionMode parse_selection_mode(const std::string& text);

/// What to select before training, if anything. fraction = 1.0 with no
/// method is plain cross-validation.
struct SelectionSettings {
    std::optional<ScoreMethod> method;
    double fraction = 1.0;
    bool min_shift = false;  // chi-square on data with negative values
    int mi_neighbors = 3;
    int plugin_bins = 32;
    bool mi_use_plugin = false;  // score MI with the plug-in estimator instead of knn

    std::string label() const;  // "none100", "mi50", "chi225", ...
};

struct FoldResult {
    int fold = 0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<std::size_t> selected_indices;  // ascending; empty when no selection
    std::vector<std::string> selected_features;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    double seconds = 0.0;
};

/// Cross-validation outcome: per-fold and aggregate metrics plus full
/// provenance. canonical_json() excludes wall-clock timings so reruns of
/// identical inputs serialize byte-identically; to_json() keeps them.
struct EvaluationReport {
    std::string task_name;
    ClassifierSpec spec;
    SelectionSettings selection;
    SelectionMode mode = SelectionMode::per_fold;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;

    std::vector<FoldResult> folds;
    double macro_f1_mean = 0.0;
    double macro_f1_std = 0.0;  // sample standard deviation over folds
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    ConfusionMatrix pooled_confusion;  // summed over folds
    double pooled_macro_f1 = 0.0;      // metrics over pooled predictions
    double pooled_accuracy = 0.0;

    std::uint64_t dataset_hash = 0;
    std::string code_version;
    // conventions recorded for the reader
    std::string zero_division = "f1=0";
    std::string aggregation = "unweighted-fold-mean";

    std::string to_json(bool include_timings = true) const;
    std::string canonical_json() const { return to_json(false); }
    std::uint64_t report_hash() const;
    static EvaluationReport from_json(const std::string& text);
};

/// Everything cross_validate needs about one task view.
struct CvInput {
    Matrix X;
    std::vector<int> y;
    int n_classes = 0;
    std::vector<std::string> class_names;
    std::vector<std::string> feature_names;
    std::string task_name;
    std::uint64_t dataset_hash = 0;
};

CvInput make_cv_input(const LabeledDataset& ds, const TaskView& view);

/// Leakage-safe stratified k-fold evaluation. In per_fold mode the score
/// vector and selection profile are computed on each fold's training rows
/// only; global mode scores once on all rows (both modes are recorded in
/// the report). Per-fold model seeds derive from (seed, fold); the MI
/// jitter stream from (seed, 1000 + fold) per fold or (seed, 999) globally.
EvaluationReport cross_validate(const CvInput& input, const ClassifierSpec& spec,
                                const SelectionSettings& selection, SelectionMode mode, int k,
                                std::uint64_t seed);

}  // namespace malmem
