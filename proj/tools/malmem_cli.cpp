// Command-line front end: load-check, score, select, train, predict, cv,
// grid, render, synth. Exit codes: 0 success, 2 configuration error,
// 3 data error, 4 grid completed with failed cells.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "malmem/csv.hpp"
#include "malmem/dataset.hpp"
#include "malmem/error.hpp"
#include "malmem/evalkit.hpp"
#include "malmem/featsel.hpp"
#include "malmem/hash.hpp"
#include "malmem/models.hpp"
#include "malmem/rng.hpp"
#include "malmem/runner.hpp"
#include "malmem/synthgen.hpp"
#include "malmem/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataArgs {
    std::string data;
    std::string schema;
};

malmem::CategorySchema load_schema(const DataArgs& args) {
    return args.schema.empty() ? malmem::CategorySchema::defaults()
                               : malmem::CategorySchema::load(args.schema);
}

malmem::LabeledDataset load_data(const DataArgs& args) {
    return malmem::load_csv(args.data, load_schema(args));
}

void add_data_options(CLI::App* cmd, DataArgs& args) {
    cmd->add_option("--data", args.data, "features CSV path")->required();
    cmd->add_option("--schema", args.schema, "schema config file (key=value)");
}

malmem::FeatureScoreVector score_with(const std::string& method, const malmem::TaskView& view,
                                      const malmem::Matrix& X, int mi_k, std::uint64_t seed,
                                      bool min_shift, int plugin_bins, bool mi_plugin) {
    const malmem::ScoreMethod m = malmem::parse_score_method(method);
    switch (m) {
        case malmem::ScoreMethod::chi_square: return malmem::chi2_scores(view, X, min_shift);
        case malmem::ScoreMethod::anova_f: return malmem::anova_f_scores(view, X);
        case malmem::ScoreMethod::mutual_info:
            return mi_plugin ? malmem::mi_scores_plugin(view, X, plugin_bins)
                             : malmem::mi_scores_knn(view, X, mi_k, seed);
    }
    throw malmem::ConfigError("bad method");
}

int run(int argc, char** argv) {
    CLI::App app{"Memory-feature malware classification pipeline"};
    app.set_version_flag("--version", malmem::kVersion);
    app.require_subcommand(1);

    // ---- load-check ----
    auto* cmd_check = app.add_subcommand("load-check", "validate a features CSV and print stats");
    DataArgs check_args;
    add_data_options(cmd_check, check_args);
    cmd_check->callback([&] {
        const auto ds = load_data(check_args);
        std::cout << "rows: " << ds.n_rows() << "\n"
                  << "feature columns: " << ds.n_features() << "\n"
                  << "benign: " << ds.count_class(malmem::ClassKind::benign) << "\n"
                  << "malware: " << ds.count_class(malmem::ClassKind::malware) << "\n";
        for (const auto type : {malmem::MalwareType::trojan, malmem::MalwareType::spyware,
                                malmem::MalwareType::ransomware}) {
            const auto families = ds.family_counts(type);
            if (families.empty()) continue;
            std::cout << to_string(type) << " (" << ds.count_type(type) << "):\n";
            for (const auto& [family, count] : families)
                std::cout << "  " << family << ": " << count << "\n";
        }
        std::cout << "dataset hash: " << malmem::Fnv1a().u64(ds.content_hash()).hex() << "\n";
    });

    // ---- score ----
    auto* cmd_score = app.add_subcommand("score", "score all features against task labels");
    DataArgs score_args;
    std::string score_task = "binary", score_method = "mi", score_out;
    int score_mi_k = 3, score_bins = 32;
    std::uint64_t score_seed = 42;
    bool score_min_shift = false, score_mi_plugin = false;
    add_data_options(cmd_score, score_args);
    cmd_score->add_option("--task", score_task, "binary | type3 | family5:<type>");
    cmd_score->add_option("--select", score_method, "chi2 | anova | mi")->required();
    cmd_score->add_option("--mi-k", score_mi_k, "MI neighbor count");
    cmd_score->add_option("--mi-bins", score_bins, "plug-in MI bin count");
    cmd_score->add_flag("--mi-plugin", score_mi_plugin, "use the plug-in MI estimator");
    cmd_score->add_option("--seed", score_seed, "jitter seed");
    cmd_score->add_flag("--min-shift", score_min_shift, "chi2: shift features to nonnegative");
    cmd_score->add_option("--out", score_out, "write scores CSV here");
    cmd_score->callback([&] {
        const auto ds = load_data(score_args);
        const auto view = malmem::make_task_view(ds, malmem::TaskSelector::parse(score_task));
        const auto X = malmem::view_matrix(ds, view);
        const auto scores = score_with(score_method, view, X, score_mi_k, score_seed,
                                       score_min_shift, score_bins, score_mi_plugin);
        if (!score_out.empty()) {
            malmem::write_scores_csv(score_out, scores, ds.feature_names);
            std::cout << "wrote " << score_out << "\n";
        }
        auto ranking = malmem::rank_and_select(scores, 1.0).ranking;
        std::cout << "top features (" << to_string(scores.method) << "):\n";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, ranking.size()); ++i)
            std::cout << "  " << ds.feature_names[ranking[i]] << " = "
                      << scores.scores[ranking[i]] << "\n";
    });

    // ---- select ----
    auto* cmd_select = app.add_subcommand("select", "rank features and keep a top fraction");
    DataArgs select_args;
    std::string select_task = "binary", select_method = "mi", select_out;
    double select_fraction = 0.5;
    int select_mi_k = 3, select_bins = 32;
    std::uint64_t select_seed = 42;
    bool select_min_shift = false, select_mi_plugin = false;
    add_data_options(cmd_select, select_args);
    cmd_select->add_option("--task", select_task, "task selector");
    cmd_select->add_option("--select", select_method, "chi2 | anova | mi")->required();
    cmd_select->add_option("--fraction", select_fraction, "kept fraction in (0,1]")->required();
    cmd_select->add_option("--mi-k", select_mi_k, "MI neighbor count");
    cmd_select->add_option("--mi-bins", select_bins, "plug-in MI bin count");
    cmd_select->add_flag("--mi-plugin", select_mi_plugin, "use the plug-in MI estimator");
    cmd_select->add_option("--seed", select_seed, "jitter seed");
    cmd_select->add_flag("--min-shift", select_min_shift, "chi2: shift features to nonnegative");
    cmd_select->add_option("--out", select_out, "write selection profile JSON here");
    cmd_select->callback([&] {
        const auto ds = load_data(select_args);
        const auto view = malmem::make_task_view(ds, malmem::TaskSelector::parse(select_task));
        const auto X = malmem::view_matrix(ds, view);
        const auto scores = score_with(select_method, view, X, select_mi_k, select_seed,
                                       select_min_shift, select_bins, select_mi_plugin);
        const auto profile = malmem::rank_and_select(scores, select_fraction);
        json j;
        j["method"] = to_string(scores.method);
        j["fraction"] = profile.fraction;
        j["kept_indices"] = profile.kept_indices;
        j["ranking"] = profile.ranking;
        json names = json::array();
        for (std::size_t idx : profile.kept_indices) names.push_back(ds.feature_names[idx]);
        j["kept_features"] = std::move(names);
        if (!select_out.empty()) {
            std::ofstream out(select_out);
            out << j.dump(2) << "\n";
            std::cout << "wrote " << select_out << "\n";
        }
        std::cout << "kept " << profile.kept_indices.size() << "/" << scores.scores.size()
                  << " features:";
        for (std::size_t idx : profile.kept_indices) std::cout << ' ' << ds.feature_names[idx];
        std::cout << "\n";
    });

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "fit a classifier on all task rows");
    DataArgs train_args;
    std::string train_task = "binary", train_classifier = "rf", train_method = "none", train_out;
    double train_fraction = 1.0;
    std::uint64_t train_seed = 42;
    bool train_min_shift = false;
    add_data_options(cmd_train, train_args);
    cmd_train->add_option("--task", train_task, "task selector");
    cmd_train->add_option("--classifier", train_classifier, "mnb|lda|adaboost|knn|extratrees|rf")
        ->required();
    cmd_train->add_option("--select", train_method, "chi2 | anova | mi | none");
    cmd_train->add_option("--fraction", train_fraction, "kept fraction");
    cmd_train->add_option("--seed", train_seed, "training seed");
    cmd_train->add_flag("--min-shift", train_min_shift, "chi2: shift features to nonnegative");
    cmd_train->add_option("--out", train_out, "model output path")->required();
    cmd_train->callback([&] {
        const auto ds = load_data(train_args);
        const auto view = malmem::make_task_view(ds, malmem::TaskSelector::parse(train_task));
        malmem::Matrix X = malmem::view_matrix(ds, view);
        std::vector<std::string> used_names = ds.feature_names;

        std::optional<malmem::ScoreMethod> method;
        if (train_method != "none") method = malmem::parse_score_method(train_method);
        if (method && train_fraction < 1.0) {
            const auto scores = score_with(train_method, view, X, 3, malmem::mix_seed(train_seed, 999),
                                           train_min_shift, 32, false);
            const auto profile = malmem::rank_and_select(scores, train_fraction);
            X = X.select_columns(profile.kept_indices);
            used_names.clear();
            for (std::size_t idx : profile.kept_indices)
                used_names.push_back(ds.feature_names[idx]);
        }

        const auto spec = malmem::ClassifierSpec::defaults(
            malmem::parse_algorithm(train_classifier), train_seed);
        malmem::PipelineModel pipeline{malmem::train(spec, X, view.labels, view.n_classes())};
        pipeline.input_features = used_names;
        pipeline.task_name = view.task.name();
        pipeline.class_names = view.class_names;
        pipeline.selection_method = method;
        pipeline.selection_fraction = train_fraction;
        pipeline.save(train_out);
        std::cout << "trained " << spec.canonical_string() << " on " << X.rows() << " rows, "
                  << X.cols() << " features -> " << train_out << "\n";
    });

    // ---- predict ----
    auto* cmd_predict = app.add_subcommand("predict", "apply a trained model to a features CSV");
    DataArgs predict_args;
    std::string predict_model, predict_out;
    add_data_options(cmd_predict, predict_args);
    cmd_predict->add_option("--model", predict_model, "pipeline model path")->required();
    cmd_predict->add_option("--out", predict_out, "predictions CSV path");
    cmd_predict->callback([&] {
        const auto pipeline = malmem::PipelineModel::load(predict_model);
        const auto ds = load_data(predict_args);

        // match model feature names against data columns
        std::vector<std::size_t> cols;
        for (const auto& name : pipeline.input_features) {
            const auto it =
                std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
            if (it == ds.feature_names.end())
                throw malmem::DataError("data is missing model feature '" + name + "'");
            cols.push_back(static_cast<std::size_t>(it - ds.feature_names.begin()));
        }
        const malmem::Matrix X = ds.features.select_columns(cols);
        const auto preds = pipeline.model.predict(X);

        std::vector<std::vector<std::string>> rows;
        rows.reserve(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i)
            rows.push_back({std::to_string(i),
                            pipeline.class_names[static_cast<std::size_t>(preds[i])]});
        if (!predict_out.empty()) {
            malmem::write_csv_file(predict_out, {"row", "predicted_class"}, rows);
            std::cout << "wrote " << predict_out << "\n";
        } else {
            for (const auto& row : rows) std::cout << row[0] << "," << row[1] << "\n";
        }
    });

    // ---- cv ----
    auto* cmd_cv = app.add_subcommand("cv", "stratified k-fold cross-validation of one setting");
    DataArgs cv_args;
    std::string cv_task = "binary", cv_classifier = "rf", cv_method = "none", cv_mode = "perfold";
    std::string cv_out;
    double cv_fraction = 1.0;
    int cv_folds = 5;
    std::uint64_t cv_seed = 42;
    bool cv_min_shift = false;
    add_data_options(cmd_cv, cv_args);
    cmd_cv->add_option("--task", cv_task, "task selector");
    cmd_cv->add_option("--classifier", cv_classifier, "classifier name")->required();
    cmd_cv->add_option("--select", cv_method, "chi2 | anova | mi | none");
    cmd_cv->add_option("--fraction", cv_fraction, "kept fraction");
    cmd_cv->add_option("--folds", cv_folds, "fold count (default 5)");
    cmd_cv->add_option("--seed", cv_seed, "seed");
    cmd_cv->add_option("--mode", cv_mode, "perfold | global selection");
    cmd_cv->add_flag("--min-shift", cv_min_shift, "chi2: shift features to nonnegative");
    cmd_cv->add_option("--out", cv_out, "report JSON path");
    cmd_cv->callback([&] {
        const auto ds = load_data(cv_args);
        const auto view = malmem::make_task_view(ds, malmem::TaskSelector::parse(cv_task));
        const auto input = malmem::make_cv_input(ds, view);
        malmem::SelectionSettings sel;
        if (cv_method != "none") sel.method = malmem::parse_score_method(cv_method);
        sel.fraction = cv_fraction;
        sel.min_shift = cv_min_shift;
        const auto spec =
            malmem::ClassifierSpec::defaults(malmem::parse_algorithm(cv_classifier), cv_seed);
        const auto report = malmem::cross_validate(input, spec, sel,
                                                   malmem::parse_selection_mode(cv_mode),
                                                   cv_folds, cv_seed);
        if (!cv_out.empty()) {
            std::ofstream out(cv_out);
            out << report.to_json() << "\n";
            std::cout << "wrote " << cv_out << "\n";
        }
        std::cout << report.task_name << " " << to_string(spec.algorithm) << " "
                  << sel.label() << ": macro-F1 " << report.macro_f1_mean << " +/- "
                  << report.macro_f1_std << ", accuracy " << report.accuracy_mean << " +/- "
                  << report.accuracy_std << "\n";
    });

    // ---- grid ----
    auto* cmd_grid = app.add_subcommand("grid", "run an experiment grid with caching");
    DataArgs grid_args;
    std::vector<std::string> grid_tasks, grid_classifiers, grid_methods;
    std::vector<double> grid_fractions;
    std::string grid_mode = "perfold", grid_out;
    int grid_folds = 5;
    std::uint64_t grid_seed = 42;
    bool grid_min_shift = false;
    add_data_options(cmd_grid, grid_args);
    cmd_grid->add_option("--tasks", grid_tasks, "task selectors (default: all five)");
    cmd_grid->add_option("--classifiers", grid_classifiers, "classifier names (default: all six)");
    cmd_grid->add_option("--selects", grid_methods, "score methods (default: chi2 anova mi)");
    cmd_grid->add_option("--fractions", grid_fractions, "fractions (default: 0.25 0.5 1.0)");
    cmd_grid->add_option("--folds", grid_folds, "fold count");
    cmd_grid->add_option("--seed", grid_seed, "seed");
    cmd_grid->add_option("--mode", grid_mode, "perfold | global");
    cmd_grid->add_flag("--min-shift", grid_min_shift, "chi2: shift features to nonnegative");
    cmd_grid->add_option("--out", grid_out, "output directory")->required();
    cmd_grid->callback([&] {
        malmem::ExperimentConfig cfg = malmem::ExperimentConfig::paper_defaults();
        cfg.data_path = grid_args.data;
        cfg.schema = load_schema(grid_args);
        cfg.out_dir = grid_out;
        cfg.k = grid_folds;
        cfg.seed = grid_seed;
        cfg.mode = malmem::parse_selection_mode(grid_mode);
        cfg.min_shift = grid_min_shift;
        if (!grid_tasks.empty()) {
            cfg.tasks.clear();
            for (const auto& t : grid_tasks) cfg.tasks.push_back(malmem::TaskSelector::parse(t));
        }
        if (!grid_classifiers.empty()) {
            cfg.classifiers.clear();
            for (const auto& c : grid_classifiers)
                cfg.classifiers.push_back(malmem::parse_algorithm(c));
        }
        if (!grid_methods.empty()) {
            cfg.methods.clear();
            for (const auto& m : grid_methods)
                cfg.methods.push_back(malmem::parse_score_method(m));
        }
        if (!grid_fractions.empty()) cfg.fractions = grid_fractions;

        const auto bundle = malmem::run_experiments(cfg);
        std::size_t computed = 0, cached = 0, failed = 0;
        for (const auto& cell : bundle.cells) {
            if (cell.status == "computed") ++computed;
            if (cell.status == "cached") ++cached;
            if (cell.status == "failed") {
                ++failed;
                std::cerr << "failed: " << cell.cell.key() << ": " << cell.error << "\n";
            }
        }
        std::cout << bundle.cells.size() << " cells (" << computed << " computed, " << cached
                  << " cached, " << failed << " failed)\n"
                  << "bundle hash: " << malmem::Fnv1a().u64(bundle.bundle_hash).hex() << "\n"
                  << "manifest: " << (cfg.out_dir / "manifest.json").string() << "\n";
        if (failed > 0) throw CLI::RuntimeError(4);
    });

    // ---- render ----
    auto* cmd_render = app.add_subcommand("render", "render tables and confusion matrices");
    std::string render_dir, render_task, render_classifier = "rf", render_out;
    bool render_confusions = false;
    cmd_render->add_option("--bundle", render_dir, "grid output directory")->required();
    cmd_render->add_option("--task", render_task, "task selector")->required();
    cmd_render->add_flag("--confusions", render_confusions,
                         "also write pooled confusion CSVs for --classifier");
    cmd_render->add_option("--classifier", render_classifier, "classifier for --confusions");
    cmd_render->add_option("--out", render_out, "write table text here (stdout otherwise)");
    cmd_render->callback([&] {
        const auto bundle = malmem::Bundle::load_manifest(render_dir);
        const auto task = malmem::TaskSelector::parse(render_task);
        const std::string text = malmem::render_table_text(bundle, task);
        const std::string csv = malmem::render_table_csv(bundle, task);
        const fs::path csv_path = fs::path(render_dir) / ("table_" + task.name() + ".csv");
        {
            std::ofstream out(csv_path);
            out << csv;
        }
        if (!render_out.empty()) {
            std::ofstream out(render_out);
            out << text;
            std::cout << "wrote " << render_out << " and " << csv_path.string() << "\n";
        } else {
            std::cout << text << "(csv: " << csv_path.string() << ")\n";
        }
        if (render_confusions) {
            std::vector<std::string> notes;
            const auto written = malmem::emit_confusions(
                bundle, task, malmem::parse_algorithm(render_classifier), &notes);
            for (const auto& path : written) std::cout << "wrote " << path.string() << "\n";
            for (const auto& note : notes) std::cerr << "note: " << note << "\n";
        }
    });

    // ---- synth ----
    auto* cmd_synth = app.add_subcommand("synth", "write a synthetic blob dataset CSV");
    std::string synth_out, synth_shape = "binary";
    std::size_t synth_n = 1000, synth_features = 10, synth_informative = 5;
    int synth_classes = 2;
    double synth_sep = 3.0;
    std::uint64_t synth_seed = 42;
    cmd_synth->add_option("--out", synth_out, "CSV output path")->required();
    cmd_synth->add_option("--shape", synth_shape,
                          "binary | type3 | family5 | hierarchy (all label levels)");
    cmd_synth->add_option("--n", synth_n, "sample count");
    cmd_synth->add_option("--features", synth_features, "feature count");
    cmd_synth->add_option("--informative", synth_informative, "informative feature count");
    cmd_synth->add_option("--classes", synth_classes, "class count");
    cmd_synth->add_option("--sep", synth_sep, "class separation in sigmas");
    cmd_synth->add_option("--seed", synth_seed, "seed");
    cmd_synth->callback([&] {
        if (synth_shape == "hierarchy") {
            // --n is rows per family; a quarter of that total as benign rows
            const std::size_t benign = std::max<std::size_t>(1, 15 * synth_n / 4);
            malmem::write_hierarchy_csv(synth_n, benign, synth_features, synth_sep, synth_seed,
                                        synth_out);
            std::cout << "wrote " << synth_out << " (15 families x " << synth_n
                      << " rows + " << benign << " benign)\n";
            return;
        }
        malmem::SynthSpec spec;
        spec.n_samples = synth_n;
        spec.n_features = synth_features;
        spec.n_informative = synth_informative;
        spec.n_classes = synth_classes;
        spec.class_sep = synth_sep;
        spec.seed = synth_seed;
        const auto blobs = malmem::make_blobs(spec);
        malmem::TaskKind shape = malmem::TaskKind::binary;
        if (synth_shape == "type3") shape = malmem::TaskKind::type3;
        else if (synth_shape == "family5") shape = malmem::TaskKind::family5;
        else if (synth_shape != "binary")
            throw malmem::ConfigError("unknown synth shape: " + synth_shape);
        malmem::write_blobs_csv(blobs, shape, synth_out);
        std::cout << "wrote " << synth_out << " (" << spec.n_samples << " rows, "
                  << spec.n_features << " features, informative:";
        for (std::size_t j : blobs.informative) std::cout << ' ' << 'f' << j;
        std::cout << ")\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::RuntimeError& e) {
        return e.get_exit_code();  // grid cell failures: 4
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const malmem::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const malmem::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const malmem::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
