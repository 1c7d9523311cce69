#include "malmem/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "malmem/csv.hpp"
#include "malmem/error.hpp"
#include "malmem/hash.hpp"
#include "malmem/version.hpp"

namespace malmem {

using json = nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Temp file + rename, so a concurrent reader never sees a partial file.
void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string two_decimals(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

const std::vector<Algorithm>& paper_classifier_order() {
    static const std::vector<Algorithm> order = {
        Algorithm::multinomial_nb, Algorithm::lda,         Algorithm::adaboost,
        Algorithm::knn,            Algorithm::extra_trees, Algorithm::random_forest,
    };
    return order;
}

}  // namespace

std::string GridCell::setting_label() const {
    SelectionSettings sel;
    sel.method = method;
    sel.fraction = fraction;
    return sel.label();
}

std::string GridCell::key() const {
    return task.name() + "/" + to_string(algorithm) + "/" + setting_label();
}

std::string GridCell::file_stem() const {
    return task.name() + "_" + to_string(algorithm) + "_" + setting_label();
}

ExperimentConfig ExperimentConfig::paper_defaults() {
    ExperimentConfig cfg;
    cfg.tasks = {
        TaskSelector::parse("binary"),
        TaskSelector::parse("type3"),
        TaskSelector::parse("family5:trojan"),
        TaskSelector::parse("family5:spyware"),
        TaskSelector::parse("family5:ransomware"),
    };
    cfg.classifiers = paper_classifier_order();
    cfg.methods = {ScoreMethod::chi_square, ScoreMethod::anova_f, ScoreMethod::mutual_info};
    cfg.fractions = {0.25, 0.5, 1.0};
    return cfg;
}

std::vector<GridCell> ExperimentConfig::expand_grid() const {
    if (tasks.empty() || classifiers.empty()) throw ConfigError("grid: no tasks or classifiers");
    for (double f : fractions)
        if (!(f > 0.0) || f > 1.0)
            throw ConfigError("grid: fraction outside (0,1]: " + std::to_string(f));
    std::vector<GridCell> cells;
    for (const auto& task : tasks) {
        for (const auto algo : classifiers) {
            for (double f : fractions) {
                if (f == 1.0) {
                    cells.push_back({task, algo, std::nullopt, 1.0});
                } else {
                    for (const auto method : methods) cells.push_back({task, algo, method, f});
                }
            }
        }
    }
    return cells;
}

std::uint64_t ExperimentConfig::cell_hash(const GridCell& cell, std::uint64_t dataset_hash) const {
    ClassifierSpec spec = ClassifierSpec::defaults(cell.algorithm, seed);
    Fnv1a h;
    h.str("cell-v1|")
        .str(cell.key())
        .str("|fraction=")
        .f64(cell.fraction)
        .str("|")
        .str(spec.canonical_string())
        .str("|k=")
        .u64(static_cast<std::uint64_t>(k))
        .str("|seed=")
        .u64(seed)
        .str("|mode=")
        .str(to_string(mode))
        .str("|min_shift=")
        .u64(min_shift ? 1 : 0)
        .str("|data=")
        .u64(dataset_hash)
        .str("|code=")
        .str(kVersion);
    return h.value();
}

bool Bundle::has_failures() const {
    return std::any_of(cells.begin(), cells.end(),
                       [](const CellStatus& c) { return c.status == "failed"; });
}

namespace {

json manifest_to_json(const Bundle& bundle) {
    json cells = json::array();
    for (const auto& c : bundle.cells) {
        cells.push_back({{"task", c.cell.task.name()},
                         {"classifier", to_string(c.cell.algorithm)},
                         {"setting", c.cell.setting_label()},
                         {"fraction", c.cell.fraction},
                         {"status", c.status},
                         {"path", c.path},
                         {"error", c.error},
                         {"report_hash", c.report_hash}});
    }
    return json{{"format", "malmem-bundle"},
                {"format_version", 1},
                {"config_hash", bundle.config_hash},
                {"dataset_hash", bundle.dataset_hash},
                {"code_version", kVersion},
                {"bundle_hash", bundle.bundle_hash},
                {"cells", std::move(cells)}};
}

GridCell cell_from_manifest(const json& j) {
    GridCell cell;
    cell.task = TaskSelector::parse(j.at("task").get<std::string>());
    cell.algorithm = parse_algorithm(j.at("classifier").get<std::string>());
    const std::string setting = j.at("setting").get<std::string>();
    cell.fraction = j.at("fraction").get<double>();
    if (setting.rfind("none", 0) != 0) {
        // setting label = method name + percent
        std::string name;
        for (char c : setting) {
            if (std::isdigit(static_cast<unsigned char>(c))) break;
            name.push_back(c);
        }
        cell.method = parse_score_method(name);
    }
    return cell;
}

std::uint64_t compute_bundle_hash(const std::vector<CellStatus>& cells) {
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    entries.reserve(cells.size());
    for (const auto& c : cells) entries.emplace_back(c.cell.key(), c.report_hash);
    std::sort(entries.begin(), entries.end());
    Fnv1a h;
    for (const auto& [key, hash] : entries) h.str(key).str("=").u64(hash).str(";");
    return h.value();
}

}  // namespace

Bundle run_experiments(const ExperimentConfig& cfg) {
    if (cfg.out_dir.empty()) throw ConfigError("grid: output directory not set");
    std::filesystem::create_directories(cfg.out_dir);

    const LabeledDataset ds = load_csv(cfg.data_path, cfg.schema);
    const std::uint64_t dataset_hash = ds.content_hash();

    Bundle bundle;
    bundle.out_dir = cfg.out_dir;
    bundle.dataset_hash = dataset_hash;
    {
        Fnv1a h;
        h.str("config-v1|").u64(dataset_hash).str("|");
        for (const auto& cell : cfg.expand_grid()) h.u64(cfg.cell_hash(cell, dataset_hash));
        bundle.config_hash = h.value();
    }

    // Task views (and their CvInputs) are shared across that task's cells.
    std::map<std::string, CvInput> inputs;
    std::map<std::string, std::string> view_errors;
    for (const auto& task : cfg.tasks) {
        try {
            const TaskView view = make_task_view(ds, task);
            inputs.emplace(task.name(), make_cv_input(ds, view));
        } catch (const Error& e) {
            view_errors.emplace(task.name(), e.what());
        }
    }

    for (const GridCell& cell : cfg.expand_grid()) {
        CellStatus status;
        status.cell = cell;
        const std::uint64_t expected_hash = cfg.cell_hash(cell, dataset_hash);
        const std::string file_name = cell.file_stem() + ".json";
        const std::filesystem::path report_path = cfg.out_dir / file_name;
        status.path = file_name;

        try {
            if (std::filesystem::exists(report_path)) {
                const json wrapper = json::parse(read_file(report_path));
                if (wrapper.value("cell_hash", std::uint64_t{0}) == expected_hash) {
                    status.status = "cached";
                    status.report_hash = wrapper.at("report_hash").get<std::uint64_t>();
                    bundle.cells.push_back(std::move(status));
                    continue;
                }
            }
            if (const auto it = view_errors.find(cell.task.name()); it != view_errors.end())
                throw DataError(it->second);

            const CvInput& input = inputs.at(cell.task.name());
            SelectionSettings sel;
            sel.method = cell.method;
            sel.fraction = cell.fraction;
            sel.min_shift = cfg.min_shift;
            const ClassifierSpec spec = ClassifierSpec::defaults(cell.algorithm, cfg.seed);
            const EvaluationReport report =
                cross_validate(input, spec, sel, cfg.mode, cfg.k, cfg.seed);

            json wrapper;
            wrapper["cell"] = {{"task", cell.task.name()},
                               {"classifier", to_string(cell.algorithm)},
                               {"setting", cell.setting_label()}};
            wrapper["cell_hash"] = expected_hash;
            wrapper["report_hash"] = report.report_hash();
            wrapper["report"] = json::parse(report.to_json());
            atomic_write(report_path, wrapper.dump(2));

            status.status = "computed";
            status.report_hash = report.report_hash();
        } catch (const Error& e) {
            status.status = "failed";
            status.error = e.what();
        }
        bundle.cells.push_back(std::move(status));
    }

    bundle.bundle_hash = compute_bundle_hash(bundle.cells);
    atomic_write(cfg.out_dir / "manifest.json", manifest_to_json(bundle).dump(2));
    return bundle;
}

Bundle Bundle::load_manifest(const std::filesystem::path& out_dir) {
    const json j = json::parse(read_file(out_dir / "manifest.json"));
    if (j.value("format", "") != "malmem-bundle") throw DataError("not a bundle manifest");
    Bundle bundle;
    bundle.out_dir = out_dir;
    bundle.config_hash = j.at("config_hash").get<std::uint64_t>();
    bundle.dataset_hash = j.at("dataset_hash").get<std::uint64_t>();
    bundle.bundle_hash = j.at("bundle_hash").get<std::uint64_t>();
    for (const auto& c : j.at("cells")) {
        CellStatus status;
        status.cell = cell_from_manifest(c);
        status.status = c.at("status").get<std::string>();
        status.path = c.at("path").get<std::string>();
        status.error = c.at("error").get<std::string>();
        status.report_hash = c.at("report_hash").get<std::uint64_t>();
        bundle.cells.push_back(std::move(status));
    }
    return bundle;
}

namespace {

std::optional<EvaluationReport> load_cell_report(const Bundle& bundle, const CellStatus& status) {
    if (status.status == "failed") return std::nullopt;
    const std::filesystem::path path = bundle.out_dir / status.path;
    if (!std::filesystem::exists(path)) return std::nullopt;
    const json wrapper = json::parse(read_file(path));
    return EvaluationReport::from_json(wrapper.at("report").dump());
}

struct TableLayout {
    // column order within a task table, grouped for best-F1 flagging
    std::vector<GridCell> settings;       // one per column (task/algorithm unset)
    std::vector<std::size_t> group_of;    // column -> group id
    std::vector<std::string> headers;
};

TableLayout table_layout() {
    TableLayout layout;
    auto add = [&](std::optional<ScoreMethod> m, double f, std::size_t group,
                   const std::string& header) {
        GridCell cell;
        cell.method = m;
        cell.fraction = f;
        layout.settings.push_back(cell);
        layout.group_of.push_back(group);
        layout.headers.push_back(header);
    };
    add(std::nullopt, 1.0, 0, "100%");
    add(ScoreMethod::chi_square, 0.25, 1, "25% Chi");
    add(ScoreMethod::anova_f, 0.25, 1, "25% ANOVA");
    add(ScoreMethod::mutual_info, 0.25, 1, "25% MI");
    add(ScoreMethod::chi_square, 0.5, 2, "50% Chi");
    add(ScoreMethod::anova_f, 0.5, 2, "50% ANOVA");
    add(ScoreMethod::mutual_info, 0.5, 2, "50% MI");
    return layout;
}

struct TableData {
    std::vector<Algorithm> rows;
    // per row, per column: (f1, acc) or unset
    std::vector<std::vector<std::optional<std::pair<double, double>>>> cells;
    std::vector<std::vector<bool>> best;  // best F1 within column group
    TableLayout layout;
};

TableData collect_table(const Bundle& bundle, const TaskSelector& task) {
    TableData data;
    data.layout = table_layout();

    std::map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < data.layout.settings.size(); ++c)
        col_of[data.layout.settings[c].setting_label()] = c;

    std::map<Algorithm, std::vector<std::optional<std::pair<double, double>>>> by_algo;
    for (const auto& status : bundle.cells) {
        if (status.cell.task.name() != task.name()) continue;
        const auto col = col_of.find(status.cell.setting_label());
        if (col == col_of.end()) continue;
        auto& row = by_algo[status.cell.algorithm];
        row.resize(data.layout.settings.size());
        if (const auto report = load_cell_report(bundle, status))
            row[col->second] = std::make_pair(report->macro_f1_mean, report->accuracy_mean);
    }
    if (by_algo.empty()) throw DataError("no cells for task " + task.name() + " in bundle");

    // Paper row order first, then anything else that was run.
    for (const auto algo : paper_classifier_order())
        if (by_algo.count(algo)) data.rows.push_back(algo);
    for (const auto& [algo, _] : by_algo)
        if (std::find(data.rows.begin(), data.rows.end(), algo) == data.rows.end())
            data.rows.push_back(algo);

    for (const auto algo : data.rows) {
        auto row = by_algo[algo];
        row.resize(data.layout.settings.size());
        data.cells.push_back(std::move(row));
    }

    // Flag best F1 per column group (ties all flagged).
    const std::size_t n_groups =
        1 + *std::max_element(data.layout.group_of.begin(), data.layout.group_of.end());
    data.best.assign(data.rows.size(),
                     std::vector<bool>(data.layout.settings.size(), false));
    for (std::size_t g = 0; g < n_groups; ++g) {
        double best_f1 = -1.0;
        for (std::size_t r = 0; r < data.rows.size(); ++r)
            for (std::size_t c = 0; c < data.layout.settings.size(); ++c)
                if (data.layout.group_of[c] == g && data.cells[r][c])
                    best_f1 = std::max(best_f1, data.cells[r][c]->first);
        if (best_f1 < 0.0) continue;
        for (std::size_t r = 0; r < data.rows.size(); ++r)
            for (std::size_t c = 0; c < data.layout.settings.size(); ++c)
                if (data.layout.group_of[c] == g && data.cells[r][c] &&
                    two_decimals(data.cells[r][c]->first) == two_decimals(best_f1))
                    data.best[r][c] = true;
    }
    return data;
}

}  // namespace

std::string render_table_text(const Bundle& bundle, const TaskSelector& task) {
    const TableData data = collect_table(bundle, task);
    std::ostringstream os;
    os << "Task: " << task.name() << "\n";

    const std::size_t name_width = 14;
    const std::size_t cell_width = 13;
    os << std::string(name_width, ' ');
    for (const auto& header : data.layout.headers) {
        std::string h = header;
        h.resize(cell_width, ' ');
        os << "| " << h;
    }
    os << "\n" << std::string(name_width, ' ');
    for (std::size_t c = 0; c < data.layout.headers.size(); ++c) {
        std::string h = "F1    Acc";
        h.resize(cell_width, ' ');
        os << "| " << h;
    }
    os << "\n";
    os << std::string(name_width + data.layout.headers.size() * (cell_width + 2), '-') << "\n";

    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        std::string name = display_name(data.rows[r]);
        name.resize(name_width, ' ');
        os << name;
        for (std::size_t c = 0; c < data.layout.settings.size(); ++c) {
            std::string cell;
            if (data.cells[r][c]) {
                cell = two_decimals(data.cells[r][c]->first) +
                       (data.best[r][c] ? "* " : "  ") +
                       two_decimals(data.cells[r][c]->second);
            } else {
                cell = "—";
            }
            // the em dash is 3 bytes but 1 display column
            cell.resize(cell_width + (data.cells[r][c] ? 0 : 2), ' ');
            os << "| " << cell;
        }
        os << "\n";
    }
    os << "* best F1 within the feature-fraction group\n";
    return os.str();
}

std::string render_table_csv(const Bundle& bundle, const TaskSelector& task) {
    const TableData data = collect_table(bundle, task);
    std::ostringstream os;
    os << "classifier";
    for (const auto& header : data.layout.headers) {
        std::string tag = header;
        std::replace(tag.begin(), tag.end(), ' ', '_');
        std::replace(tag.begin(), tag.end(), '%', 'p');
        os << ",f1_" << tag << ",acc_" << tag << ",best_" << tag;
    }
    os << "\n";
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        os << to_string(data.rows[r]);
        for (std::size_t c = 0; c < data.layout.settings.size(); ++c) {
            if (data.cells[r][c]) {
                os << ',' << format_double(data.cells[r][c]->first) << ','
                   << format_double(data.cells[r][c]->second) << ','
                   << (data.best[r][c] ? 1 : 0);
            } else {
                os << ",,,";
            }
        }
        os << "\n";
    }
    return os.str();
}

std::vector<std::filesystem::path> emit_confusions(const Bundle& bundle, const TaskSelector& task,
                                                   Algorithm algorithm,
                                                   std::vector<std::string>* notes) {
    std::vector<std::filesystem::path> written;
    for (const auto& status : bundle.cells) {
        if (status.cell.task.name() != task.name() || status.cell.algorithm != algorithm) continue;
        const auto report = load_cell_report(bundle, status);
        if (!report) {
            if (notes)
                notes->push_back("missing cell " + status.cell.key() +
                                 (status.error.empty() ? "" : ": " + status.error));
            continue;
        }
        std::vector<std::string> header;
        header.push_back("true\\pred");
        for (const auto& name : report->class_names) header.push_back(name);
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < report->pooled_confusion.size(); ++i) {
            std::vector<std::string> row;
            row.push_back(report->class_names[i]);
            for (const long long v : report->pooled_confusion[i]) row.push_back(std::to_string(v));
            rows.push_back(std::move(row));
        }
        const std::filesystem::path path =
            bundle.out_dir / ("confusion_" + status.cell.file_stem() + ".csv");
        write_csv_file(path, header, rows);
        written.push_back(path);
    }
    if (written.empty() && notes) notes->push_back("no cells for " + task.name());
    return written;
}

void PipelineModel::save(const std::filesystem::path& path) const {
    json j;
    j["format"] = "malmem-pipeline";
    j["format_version"] = 1;
    j["task"] = task_name;
    j["class_names"] = class_names;
    j["input_features"] = input_features;
    j["selection_method"] = selection_method ? to_string(*selection_method) : "none";
    j["selection_fraction"] = selection_fraction;
    j["model"] = json::parse(model.to_json());
    atomic_write(path, j.dump(2));
}

PipelineModel PipelineModel::load(const std::filesystem::path& path) {
    const json j = json::parse(read_file(path));
    if (j.value("format", "") != "malmem-pipeline") throw DataError("not a pipeline container");
    PipelineModel p{TrainedModel::from_json(j.at("model").dump()), {}, {}, {}, {}, 1.0};
    p.task_name = j.at("task").get<std::string>();
    p.class_names = j.at("class_names").get<std::vector<std::string>>();
    p.input_features = j.at("input_features").get<std::vector<std::string>>();
    const auto method = j.at("selection_method").get<std::string>();
    if (method != "none") p.selection_method = parse_score_method(method);
    p.selection_fraction = j.at("selection_fraction").get<double>();
    return p;
}

}  // namespace malmem
