#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "malmem/csv.hpp"
#include "malmem/error.hpp"
#include "malmem/runner.hpp"
#include "malmem/synthgen.hpp"

using namespace malmem;
using testutil::TempDir;

namespace {

std::filesystem::path write_synth_csv(const TempDir& dir, int classes, TaskKind shape,
                                      std::uint64_t seed = 9, std::size_t n = 150) {
    SynthSpec spec;
    spec.n_samples = n;
    spec.n_features = 4;
    spec.n_informative = 2;
    spec.n_classes = classes;
    spec.class_sep = 4.0;
    spec.seed = seed;
    const auto path = dir.file("synth.csv");
    write_blobs_csv(make_blobs(spec), shape, path);
    return path;
}

ExperimentConfig one_cell_config(const std::filesystem::path& data,
                                 const std::filesystem::path& out) {
    ExperimentConfig cfg;
    cfg.data_path = data;
    cfg.out_dir = out;
    cfg.tasks = {TaskSelector::parse("type3")};
    cfg.classifiers = {Algorithm::random_forest};
    cfg.methods = {ScoreMethod::mutual_info};
    cfg.fractions = {0.5};
    cfg.k = 5;
    cfg.seed = 17;
    return cfg;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("a one-cell grid produces exactly one report") {
    TempDir dir;
    const auto data = write_synth_csv(dir, 3, TaskKind::type3);
    const auto cfg = one_cell_config(data, dir.file("out"));
    const auto bundle = run_experiments(cfg);

    REQUIRE(bundle.cells.size() == 1);
    CHECK(bundle.cells[0].status == "computed");
    CHECK(!bundle.has_failures());
    CHECK(std::filesystem::exists(dir.file("out") / bundle.cells[0].path));
    CHECK(std::filesystem::exists(dir.file("out") / "manifest.json"));
}

TEST_CASE("rerunning an identical config recomputes nothing") {
    TempDir dir;
    const auto data = write_synth_csv(dir, 3, TaskKind::type3);
    const auto cfg = one_cell_config(data, dir.file("out"));

    const auto first = run_experiments(cfg);
    const auto second = run_experiments(cfg);
    CHECK(second.cells[0].status == "cached");
    CHECK(first.bundle_hash == second.bundle_hash);
    CHECK(first.cells[0].report_hash == second.cells[0].report_hash);

    // a different seed is a different cell: cache must not serve it
    auto changed = cfg;
    changed.seed = 18;
    const auto third = run_experiments(changed);
    CHECK(third.cells[0].status == "computed");
    CHECK(third.bundle_hash != first.bundle_hash);
}

TEST_CASE("failed cells are recorded without aborting the grid") {
    TempDir dir;
    const auto data = write_synth_csv(dir, 3, TaskKind::type3);
    ExperimentConfig cfg = one_cell_config(data, dir.file("out"));
    // mnb rejects the (negative-valued) Gaussian features; lda works
    cfg.classifiers = {Algorithm::multinomial_nb, Algorithm::lda};
    cfg.fractions = {1.0};
    cfg.methods.clear();

    const auto bundle = run_experiments(cfg);
    REQUIRE(bundle.cells.size() == 2);
    CHECK(bundle.has_failures());
    int failed = 0, computed = 0;
    for (const auto& cell : bundle.cells) {
        if (cell.status == "failed") {
            ++failed;
            CHECK(cell.error.find("negative") != std::string::npos);
        }
        if (cell.status == "computed") ++computed;
    }
    CHECK(failed == 1);
    CHECK(computed == 1);

    // the manifest round-trips the failure
    const auto loaded = Bundle::load_manifest(dir.file("out"));
    CHECK(loaded.has_failures());
    CHECK(loaded.bundle_hash == bundle.bundle_hash);
}

TEST_CASE("grid expansion covers the full experiment table") {
    ExperimentConfig cfg = ExperimentConfig::paper_defaults();
    const auto cells = cfg.expand_grid();
    // 5 tasks x 6 classifiers x (1 + 2x3 settings)
    CHECK(cells.size() == 5 * 6 * 7);
    CHECK_THROWS_AS([&] {
        ExperimentConfig bad = cfg;
        bad.fractions = {1.5};
        bad.expand_grid();
    }(), ConfigError);
}

TEST_CASE("rendered tables show every setting column") {
    TempDir dir;
    const auto data = write_synth_csv(dir, 3, TaskKind::type3, 10, 200);
    ExperimentConfig cfg = one_cell_config(data, dir.file("out"));
    cfg.classifiers = {Algorithm::random_forest, Algorithm::lda};
    cfg.methods = {ScoreMethod::anova_f, ScoreMethod::mutual_info};
    cfg.fractions = {0.5, 1.0};
    const auto bundle = run_experiments(cfg);

    const auto task = TaskSelector::parse("type3");
    const std::string text = render_table_text(bundle, task);
    CHECK(text.find("Task: type3") != std::string::npos);
    CHECK(text.find("Random Forest") != std::string::npos);
    CHECK(text.find("LDA") != std::string::npos);
    CHECK(text.find("100%") != std::string::npos);
    CHECK(text.find("50% MI") != std::string::npos);
    CHECK(text.find("\u2014") != std::string::npos);  // chi2 cells were not run

    const std::string csv = render_table_csv(bundle, task);
    CHECK(csv.find("classifier,f1_100p") != std::string::npos);
    CHECK(csv.find("random_forest,") != std::string::npos);

    // rendering adds no arithmetic: the csv carries the report value verbatim
    const auto report_path = dir.file("out") / bundle.cells[0].path;
    CHECK(!slurp(report_path).empty());
    CHECK_THROWS_AS(render_table_text(bundle, TaskSelector::parse("binary")), DataError);
}

TEST_CASE("table flags the best f1 per column group") {
    TempDir dir;
    const auto data = write_synth_csv(dir, 3, TaskKind::type3, 11, 200);
    ExperimentConfig cfg = one_cell_config(data, dir.file("out"));
    const auto bundle = run_experiments(cfg);
    const std::string text = render_table_text(bundle, TaskSelector::parse("type3"));
    CHECK(text.find('*') != std::string::npos);  // single cell flags itself
}

TEST_CASE("pooled confusion files cover each run setting") {
    TempDir dir;
    const auto data = write_synth_csv(dir, 3, TaskKind::type3, 12, 150);
    ExperimentConfig cfg = one_cell_config(data, dir.file("out"));
    cfg.fractions = {0.5, 1.0};
    const auto bundle = run_experiments(cfg);

    std::vector<std::string> notes;
    const auto files = emit_confusions(bundle, TaskSelector::parse("type3"),
                                       Algorithm::random_forest, &notes);
    CHECK(files.size() == 2);
    CHECK(notes.empty());

    // matrix totals equal the task row count
    for (const auto& file : files) {
        const auto table = read_csv_file(file);
        long long total = 0;
        for (const auto& row : table.rows)
            for (std::size_t c = 1; c < row.size(); ++c) total += std::stoll(row[c]);
        CHECK(total == 150);
    }

    // missing classifier: no files, one note
    std::vector<std::string> missing_notes;
    const auto none = emit_confusions(bundle, TaskSelector::parse("type3"), Algorithm::knn,
                                      &missing_notes);
    CHECK(none.empty());
    CHECK(missing_notes.size() == 1);
}

TEST_CASE("the full five-task grid runs on a hierarchy dataset") {
    TempDir dir;
    const auto data = dir.file("hier.csv");
    write_hierarchy_csv(/*rows_per_family=*/12, /*benign_rows=*/60, /*n_features=*/6,
                        /*class_sep=*/4.0, /*seed=*/33, data);

    // loader sees the full hierarchy through the alias table
    const auto ds = load_csv(data);
    CHECK(ds.count_class(ClassKind::benign) == 60);
    CHECK(ds.count_type(MalwareType::trojan) == 60);
    CHECK(ds.family_counts(MalwareType::ransomware).count("MAZE") == 1);

    ExperimentConfig cfg;
    cfg.data_path = data;
    cfg.out_dir = dir.file("out");
    cfg.tasks = {TaskSelector::parse("binary"), TaskSelector::parse("type3"),
                 TaskSelector::parse("family5:trojan"), TaskSelector::parse("family5:spyware"),
                 TaskSelector::parse("family5:ransomware")};
    cfg.classifiers = {Algorithm::lda, Algorithm::knn};
    cfg.methods = {ScoreMethod::mutual_info};
    cfg.fractions = {0.5, 1.0};
    cfg.k = 5;
    cfg.seed = 3;

    const auto bundle = run_experiments(cfg);
    CHECK(bundle.cells.size() == 5 * 2 * 2);
    CHECK(!bundle.has_failures());

    // the engineered signal columns make every task learnable
    for (const auto& task : cfg.tasks) {
        const std::string text = render_table_text(bundle, task);
        CHECK(text.find("Task: " + task.name()) != std::string::npos);
    }
    for (const auto& cell : bundle.cells) {
        std::ifstream in(dir.file("out") / cell.path);
        std::ostringstream buf;
        buf << in.rdbuf();
        const auto report = EvaluationReport::from_json(
            nlohmann::json::parse(buf.str()).at("report").dump());
        CHECK(report.macro_f1_mean > 0.9);
    }
}

TEST_CASE("pipeline model saves and reloads") {
    TempDir dir;
    SynthSpec spec;
    spec.n_samples = 90;
    spec.n_features = 4;
    spec.n_informative = 2;
    spec.n_classes = 3;
    spec.class_sep = 4.0;
    spec.seed = 2;
    const auto blobs = make_blobs(spec);

    PipelineModel pipeline{train(ClassifierSpec::defaults(Algorithm::extra_trees, 3), blobs.X,
                                 blobs.y),
                           {"f0", "f1", "f2", "f3"},
                           "type3",
                           {"Ransomware", "Spyware", "Trojan"},
                           ScoreMethod::mutual_info,
                           1.0};
    const auto path = dir.file("model.json");
    pipeline.save(path);
    const auto loaded = PipelineModel::load(path);
    CHECK(loaded.input_features == pipeline.input_features);
    CHECK(loaded.task_name == "type3");
    CHECK(loaded.class_names == pipeline.class_names);
    CHECK(loaded.selection_method == ScoreMethod::mutual_info);
    CHECK(loaded.model.predict(blobs.X) == pipeline.model.predict(blobs.X));
}

#ifdef MALMEM_CLI_PATH
TEST_CASE("cli end-to-end: synth, cv, train, predict, exit codes") {
    TempDir dir;
    const std::string cli = MALMEM_CLI_PATH;
    auto shell = [&](const std::string& args) {
        return std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    };
    auto exit_code = [](int status) { return WEXITSTATUS(status); };

    const auto csv = dir.file("blob.csv").string();
    CHECK(exit_code(shell("synth --out " + csv +
                          " --shape type3 --classes 3 --n 120 --features 4 --informative 2 "
                          "--sep 5 --seed 3")) == 0);
    CHECK(exit_code(shell("load-check --data " + csv)) == 0);
    CHECK(exit_code(shell("cv --data " + csv +
                          " --task type3 --classifier rf --select mi --fraction 0.5 --out " +
                          dir.file("report.json").string())) == 0);
    CHECK(std::filesystem::exists(dir.file("report.json")));

    const auto model = dir.file("model.json").string();
    CHECK(exit_code(shell("train --data " + csv +
                          " --task type3 --classifier knn --select anova --fraction 0.5 --out " +
                          model)) == 0);
    CHECK(exit_code(shell("predict --data " + csv + " --model " + model + " --out " +
                          dir.file("preds.csv").string())) == 0);
    const auto preds = read_csv_file(dir.file("preds.csv"));
    CHECK(preds.rows.size() == 120);

    // exit codes: 2 config, 3 data, 4 grid with failed cells
    CHECK(exit_code(shell("cv --data " + csv + " --task type3 --classifier nope")) == 2);
    CHECK(exit_code(shell("load-check --data " + dir.file("missing.csv").string())) == 3);
    CHECK(exit_code(shell("--not-a-flag")) == 2);
    CHECK(exit_code(shell("grid --data " + csv + " --out " + dir.file("grid4").string() +
                          " --tasks type3 --classifiers mnb --fractions 1.0")) == 4);
}
#endif
