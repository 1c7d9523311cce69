#include "malmem/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "malmem/error.hpp"
#include "malmem/hash.hpp"
#include "malmem/rng.hpp"
#include "malmem/version.hpp"

namespace malmem {

using json = nlohmann::json;

FoldPlan stratified_folds(const std::vector<int>& y, int n_classes, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("cross-validation needs k >= 2, got " + std::to_string(k));
    std::vector<std::vector<std::size_t>> per_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= n_classes) throw Error("stratified_folds: label out of range");
        per_class[static_cast<std::size_t>(y[i])].push_back(i);
    }
    for (int c = 0; c < n_classes; ++c)
        if (per_class[static_cast<std::size_t>(c)].size() < static_cast<std::size_t>(k))
            throw DataError("class " + std::to_string(c) + " has " +
                            std::to_string(per_class[static_cast<std::size_t>(c)].size()) +
                            " rows, fewer than k=" + std::to_string(k));

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(y.size(), -1);
    for (int c = 0; c < n_classes; ++c) {
        auto& rows = per_class[static_cast<std::size_t>(c)];
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(rows);
        for (std::size_t j = 0; j < rows.size(); ++j)
            plan.assignments[rows[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
    }
    return plan;
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                          int n_classes) {
    if (y_true.size() != y_pred.size()) throw Error("confusion: length mismatch");
    ConfusionMatrix cm(static_cast<std::size_t>(n_classes),
                       std::vector<long long>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < y_true.size(); ++i)
        ++cm[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
    return cm;
}

double macro_f1_from_confusion(const ConfusionMatrix& cm) {
    const std::size_t k = cm.size();
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        long long tp = cm[c][c];
        long long fn = 0, fp = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j != c) {
                fn += cm[c][j];
                fp += cm[j][c];
            }
        }
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        sum += f1;
    }
    return k > 0 ? sum / static_cast<double>(k) : 0.0;
}

double accuracy_from_confusion(const ConfusionMatrix& cm) {
    long long diag = 0, total = 0;
    for (std::size_t i = 0; i < cm.size(); ++i)
        for (std::size_t j = 0; j < cm.size(); ++j) {
            total += cm[i][j];
            if (i == j) diag += cm[i][j];
        }
    return total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
}

double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred, int n_classes) {
    return macro_f1_from_confusion(confusion(y_true, y_pred, n_classes));
}

const char* to_string(SelectionMode m) {
    return m == SelectionMode::per_fold ? "perfold" : "global";
}

SelectionMode parse_selection_mode(const std::string& text) {
    if (text == "perfold" || text == "per-fold" || text == "per_fold")
        return SelectionMode::per_fold;
    if (text == "global") return SelectionMode::global;
    throw ConfigError("unknown selection mode: '" + text + "' (expected perfold or global)");
}

std::string SelectionSettings::label() const {
    std::ostringstream os;
    if (!method) {
        os << "none";
    } else {
        switch (*method) {
            case ScoreMethod::chi_square: os << "chi2"; break;
            case ScoreMethod::anova_f: os << "anova"; break;
            case ScoreMethod::mutual_info: os << "mi"; break;
        }
    }
    os << static_cast<int>(std::lround(fraction * 100.0));
    return os.str();
}

namespace {

FeatureScoreVector score_features(const SelectionSettings& sel, const Matrix& X,
                                  const std::vector<int>& y, int n_classes, std::uint64_t mi_seed) {
    switch (*sel.method) {
        case ScoreMethod::chi_square:
            return chi2_scores(X, y, n_classes, sel.min_shift);
        case ScoreMethod::anova_f:
            return anova_f_scores(X, y, n_classes);
        case ScoreMethod::mutual_info:
            return sel.mi_use_plugin ? mi_scores_plugin(X, y, n_classes, sel.plugin_bins)
                                     : mi_scores_knn(X, y, n_classes, sel.mi_neighbors, mi_seed);
    }
    throw Error("score_features: bad method");
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

json confusion_to_json(const ConfusionMatrix& cm) {
    json rows = json::array();
    for (const auto& row : cm) rows.push_back(row);
    return rows;
}

ConfusionMatrix confusion_from_json(const json& j) {
    ConfusionMatrix cm;
    for (const auto& row : j) cm.push_back(row.get<std::vector<long long>>());
    return cm;
}

json selection_to_json(const SelectionSettings& sel) {
    json j;
    j["method"] = sel.method ? to_string(*sel.method) : "none";
    j["fraction"] = sel.fraction;
    j["min_shift"] = sel.min_shift;
    j["mi_neighbors"] = sel.mi_neighbors;
    j["plugin_bins"] = sel.plugin_bins;
    j["mi_estimator"] = sel.mi_use_plugin ? "plugin" : "knn";
    return j;
}

SelectionSettings selection_from_json(const json& j) {
    SelectionSettings sel;
    const auto method = j.at("method").get<std::string>();
    if (method != "none") sel.method = parse_score_method(method);
    sel.fraction = j.at("fraction").get<double>();
    sel.min_shift = j.at("min_shift").get<bool>();
    sel.mi_neighbors = j.at("mi_neighbors").get<int>();
    sel.plugin_bins = j.at("plugin_bins").get<int>();
    sel.mi_use_plugin = j.at("mi_estimator").get<std::string>() == "plugin";
    return sel;
}

}  // namespace

CvInput make_cv_input(const LabeledDataset& ds, const TaskView& view) {
    CvInput input;
    input.X = view_matrix(ds, view);
    input.y = view.labels;
    input.n_classes = view.n_classes();
    input.class_names = view.class_names;
    input.feature_names = ds.feature_names;
    input.task_name = view.task.name();
    input.dataset_hash = ds.content_hash();
    return input;
}

EvaluationReport cross_validate(const CvInput& input, const ClassifierSpec& spec,
                                const SelectionSettings& selection, SelectionMode mode, int k,
                                std::uint64_t seed) {
    const FoldPlan plan = stratified_folds(input.y, input.n_classes, k, seed);

    EvaluationReport report;
    report.task_name = input.task_name;
    report.spec = spec;
    report.selection = selection;
    report.mode = mode;
    report.k = k;
    report.seed = seed;
    report.class_names = input.class_names;
    report.feature_names = input.feature_names;
    report.dataset_hash = input.dataset_hash;
    report.code_version = kVersion;

    const bool selecting = selection.method.has_value() && selection.fraction < 1.0;

    std::optional<SelectionProfile> global_profile;
    if (selecting && mode == SelectionMode::global) {
        const auto scores = score_features(selection, input.X, input.y, input.n_classes,
                                           mix_seed(seed, 999));
        global_profile = rank_and_select(scores, selection.fraction);
    }

    ConfusionMatrix pooled(static_cast<std::size_t>(input.n_classes),
                           std::vector<long long>(static_cast<std::size_t>(input.n_classes), 0));
    std::vector<double> f1s, accs;

    const auto run_fold = [&](int fold) {
        const auto started = std::chrono::steady_clock::now();
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t i = 0; i < input.y.size(); ++i)
            (plan.assignments[i] == fold ? test_rows : train_rows).push_back(i);

        Matrix x_train = input.X.select_rows(train_rows);
        Matrix x_test = input.X.select_rows(test_rows);
        std::vector<int> y_train, y_test;
        y_train.reserve(train_rows.size());
        y_test.reserve(test_rows.size());
        for (std::size_t i : train_rows) y_train.push_back(input.y[i]);
        for (std::size_t i : test_rows) y_test.push_back(input.y[i]);

        FoldResult result;
        result.fold = fold;
        result.train_rows = train_rows.size();
        result.test_rows = test_rows.size();

        if (selecting) {
            SelectionProfile profile;
            if (mode == SelectionMode::global) {
                profile = *global_profile;
            } else {
                const auto scores =
                    score_features(selection, x_train, y_train, input.n_classes,
                                   mix_seed(seed, 1000 + static_cast<std::uint64_t>(fold)));
                profile = rank_and_select(scores, selection.fraction);
            }
            x_train = x_train.select_columns(profile.kept_indices);
            x_test = x_test.select_columns(profile.kept_indices);
            result.selected_indices = profile.kept_indices;
            for (std::size_t j : profile.kept_indices)
                result.selected_features.push_back(input.feature_names[j]);
        }

        ClassifierSpec fold_spec = spec;
        fold_spec.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(fold));
        const TrainedModel model = train(fold_spec, x_train, y_train, input.n_classes);
        const std::vector<int> y_pred = model.predict(x_test);

        result.confusion = confusion(y_test, y_pred, input.n_classes);
        result.macro_f1 = macro_f1_from_confusion(result.confusion);
        result.accuracy = accuracy_from_confusion(result.confusion);
        result.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        for (std::size_t i = 0; i < pooled.size(); ++i)
            for (std::size_t j = 0; j < pooled.size(); ++j)
                pooled[i][j] += result.confusion[i][j];
        f1s.push_back(result.macro_f1);
        accs.push_back(result.accuracy);
        report.folds.push_back(std::move(result));
    };

    for (int fold = 0; fold < k; ++fold) {
        try {
            run_fold(fold);
        } catch (const ConfigError& e) {
            throw ConfigError("fold " + std::to_string(fold) + ": " + e.what());
        } catch (const Error& e) {
            throw DataError("fold " + std::to_string(fold) + ": " + e.what());
        }
    }

    report.macro_f1_mean = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(k);
    report.accuracy_mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(k);
    report.macro_f1_std = sample_std(f1s, report.macro_f1_mean);
    report.accuracy_std = sample_std(accs, report.accuracy_mean);
    report.pooled_confusion = std::move(pooled);
    report.pooled_macro_f1 = macro_f1_from_confusion(report.pooled_confusion);
    report.pooled_accuracy = accuracy_from_confusion(report.pooled_confusion);
    return report;
}

std::string EvaluationReport::to_json(bool include_timings) const {
    json j;
    j["format"] = "malmem-report";
    j["format_version"] = 1;
    j["task"] = task_name;
    j["classifier"] = to_string(spec.algorithm);
    j["classifier_spec"] = spec.canonical_string();
    j["seed"] = seed;
    j["k"] = k;
    j["mode"] = to_string(mode);
    j["selection"] = selection_to_json(selection);
    j["class_names"] = class_names;
    j["feature_names"] = feature_names;
    json folds_json = json::array();
    for (const auto& fold : folds) {
        json f;
        f["fold"] = fold.fold;
        f["macro_f1"] = fold.macro_f1;
        f["accuracy"] = fold.accuracy;
        f["confusion"] = confusion_to_json(fold.confusion);
        f["selected_indices"] = fold.selected_indices;
        f["selected_features"] = fold.selected_features;
        f["train_rows"] = fold.train_rows;
        f["test_rows"] = fold.test_rows;
        if (include_timings) f["seconds"] = fold.seconds;
        folds_json.push_back(std::move(f));
    }
    j["folds"] = std::move(folds_json);
    j["aggregate"] = {{"macro_f1_mean", macro_f1_mean},
                      {"macro_f1_std", macro_f1_std},
                      {"accuracy_mean", accuracy_mean},
                      {"accuracy_std", accuracy_std},
                      {"pooled_macro_f1", pooled_macro_f1},
                      {"pooled_accuracy", pooled_accuracy}};
    j["pooled_confusion"] = confusion_to_json(pooled_confusion);
    j["provenance"] = {{"dataset_hash", Fnv1a().u64(dataset_hash).hex()},
                       {"dataset_hash_raw", dataset_hash},
                       {"code_version", code_version},
                       {"zero_division", zero_division},
                       {"aggregation", aggregation}};
    return j.dump(2);
}

std::uint64_t EvaluationReport::report_hash() const {
    return Fnv1a().str(canonical_json()).value();
}

EvaluationReport EvaluationReport::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("report json: ") + e.what());
    }
    if (j.value("format", "") != "malmem-report") throw DataError("not a report container");

    EvaluationReport r;
    r.task_name = j.at("task").get<std::string>();
    r.spec = ClassifierSpec::defaults(parse_algorithm(j.at("classifier").get<std::string>()),
                                      j.at("seed").get<std::uint64_t>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.k = j.at("k").get<int>();
    r.mode = parse_selection_mode(j.at("mode").get<std::string>());
    r.selection = selection_from_json(j.at("selection"));
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    r.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& f : j.at("folds")) {
        FoldResult fold;
        fold.fold = f.at("fold").get<int>();
        fold.macro_f1 = f.at("macro_f1").get<double>();
        fold.accuracy = f.at("accuracy").get<double>();
        fold.confusion = confusion_from_json(f.at("confusion"));
        fold.selected_indices = f.at("selected_indices").get<std::vector<std::size_t>>();
        fold.selected_features = f.at("selected_features").get<std::vector<std::string>>();
        fold.train_rows = f.at("train_rows").get<std::size_t>();
        fold.test_rows = f.at("test_rows").get<std::size_t>();
        fold.seconds = f.value("seconds", 0.0);
        r.folds.push_back(std::move(fold));
    }
    const auto& agg = j.at("aggregate");
    r.macro_f1_mean = agg.at("macro_f1_mean").get<double>();
    r.macro_f1_std = agg.at("macro_f1_std").get<double>();
    r.accuracy_mean = agg.at("accuracy_mean").get<double>();
    r.accuracy_std = agg.at("accuracy_std").get<double>();
    r.pooled_macro_f1 = agg.at("pooled_macro_f1").get<double>();
    r.pooled_accuracy = agg.at("pooled_accuracy").get<double>();
    r.pooled_confusion = confusion_from_json(j.at("pooled_confusion"));
    r.dataset_hash = j.at("provenance").at("dataset_hash_raw").get<std::uint64_t>();
    r.code_version = j.at("provenance").at("code_version").get<std::string>();
    return r;
}

}  // namespace malmem
