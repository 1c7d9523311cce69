#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "malmem/dataset.hpp"
#include "malmem/evalkit.hpp"
#include "malmem/featsel.hpp"
#include "malmem/models.hpp"

namespace malmem {

/// One grid cell: task x classifier x (selection method, fraction).
struct GridCell {
    TaskSelector task;
    Algorithm algorithm = Algorithm::random_forest;
    std::optional<ScoreMethod> method;  // unset at fraction 1.0
    double fraction = 1.0;

    std::string setting_label() const;  // "none100", "mi50", ...
    std::string key() const;            // "type3/random_forest/mi50"
    std::string file_stem() const;      // "type3_random_forest_mi50"
};

/// Experiment grid over one dataset. Defaults reproduce the full grid:
/// five tasks x six classifiers x (100% + {25%, 50%} x {chi2, anova, mi}).
struct ExperimentConfig {
    std::filesystem::path data_path;
    CategorySchema schema = CategorySchema::defaults();
    std::vector<TaskSelector> tasks;
    std::vector<Algorithm> classifiers;
    std::vector<ScoreMethod> methods;
    std::vector<double> fractions = {0.25, 0.5, 1.0};
    int k = 5;
    std::uint64_t seed = 42;
    SelectionMode mode = SelectionMode::per_fold;
    bool min_shift = false;
    std::filesystem::path out_dir;

    static ExperimentConfig paper_defaults();
    std::vector<GridCell> expand_grid() const;
    /// Hash of everything that determines one cell's result (config fields,
    /// dataset content, code version). Cached cells are reused only when it
    /// matches.
    std::uint64_t cell_hash(const GridCell& cell, std::uint64_t dataset_hash) const;
};

struct CellStatus {
    GridCell cell;
    std::string status;  // "computed", "cached", "failed"
    std::string path;    // report file, relative to out_dir
    std::string error;
    std::uint64_t report_hash = 0;
};

/// Result of one grid run. The manifest (manifest.json in out_dir) records
/// per-cell status; bundle_hash covers the sorted per-cell report hashes,
/// so identical configs and data yield identical bundle hashes whether or
/// not cells came from cache.
struct Bundle {
    std::filesystem::path out_dir;
    std::uint64_t config_hash = 0;
    std::uint64_t dataset_hash = 0;
    std::vector<CellStatus> cells;
    std::uint64_t bundle_hash = 0;

    bool has_failures() const;
    static Bundle load_manifest(const std::filesystem::path& out_dir);
};

/// Execute the grid. Cells with an existing report whose stored cell hash
/// matches are skipped; failures are recorded without aborting the rest.
/// Outputs are written atomically (temp file + rename).
Bundle run_experiments(const ExperimentConfig& cfg);

/// Aligned-text table for one task: rows = classifiers, column groups =
/// 100% | 25% x {Chi, ANOVA, MI} | 50% x {Chi, ANOVA, MI}, cells =
/// "F1 Acc" at 2 decimals, best F1 per column group starred. Missing cells
/// render as an em-dash placeholder.
std::string render_table_text(const Bundle& bundle, const TaskSelector& task);

/// Same table as CSV (one row per classifier, two columns per setting).
std::string render_table_csv(const Bundle& bundle, const TaskSelector& task);

/// Write pooled cross-fold confusion matrices for every (fraction, method)
/// cell of one task/classifier as CSVs with class-name headers. Returns the
/// written paths; missing cells are noted in `notes`.
std::vector<std::filesystem::path> emit_confusions(const Bundle& bundle, const TaskSelector& task,
                                                   Algorithm algorithm,
                                                   std::vector<std::string>* notes = nullptr);

/// Model container for the CLI's train/predict split: the fitted model plus
/// the feature names it expects (post-selection) and the selection that
/// produced them.
struct PipelineModel {
    TrainedModel model;
    std::vector<std::string> input_features;  // columns to extract, in order
    std::string task_name;
    std::vector<std::string> class_names;
    std::optional<ScoreMethod> selection_method;
    double selection_fraction = 1.0;

    void save(const std::filesystem::path& path) const;
    static PipelineModel load(const std::filesystem::path& path);
};

}  // namespace malmem
