#include "malmem/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "malmem/csv.hpp"
#include "malmem/error.hpp"
#include "malmem/hash.hpp"

namespace malmem {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == delim) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    const std::string t = trim(cell);
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw DataError("unparseable numeric cell at row " + std::to_string(row) + ", column '" +
                        column + "': '" + cell + "'");
    if (!std::isfinite(v))
        throw DataError("non-finite value at row " + std::to_string(row) + ", column '" + column +
                        "'");
    return v;
}

}  // namespace

const char* to_string(ClassKind c) { return c == ClassKind::benign ? "Benign" : "Malware"; }

const char* to_string(MalwareType t) {
    switch (t) {
        case MalwareType::trojan: return "Trojan";
        case MalwareType::spyware: return "Spyware";
        case MalwareType::ransomware: return "Ransomware";
    }
    return "?";
}

MalwareType parse_malware_type(const std::string& token) {
    const std::string t = to_lower(trim(token));
    if (t == "trojan") return MalwareType::trojan;
    if (t == "spyware") return MalwareType::spyware;
    if (t == "ransomware") return MalwareType::ransomware;
    throw DataError("unrecognized malware type token: '" + token + "'");
}

CategorySchema CategorySchema::defaults() {
    CategorySchema s;
    // Raw family tokens observed in the public CSV, normalized to the
    // published family names.
    s.family_aliases = {
        {"Zeus", "Zeu"},        {"Scar", "scar"},  {"180solutions", "180Solutions"},
        {"CWS", "Coolwebsearch"}, {"Ako", "ako"},  {"Maze", "MAZE"},
    };
    return s;
}

CategorySchema CategorySchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file: " + path.string());
    CategorySchema s = defaults();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key == "category_column") {
            s.category_column = value;
        } else if (key == "class_column") {
            s.class_column = value;
        } else if (key == "delimiter") {
            if (value.size() != 1)
                throw ConfigError(path.string() + ": delimiter must be a single character");
            s.delimiter = value[0];
        } else if (key == "benign_token") {
            s.benign_token = value;
        } else if (key.rfind("alias.", 0) == 0) {
            s.family_aliases[key.substr(6)] = value;
        } else {
            throw ConfigError(path.string() + ": unknown schema key '" + key + "'");
        }
    }
    return s;
}

ParsedCategory parse_category(const std::string& raw, const CategorySchema& schema) {
    const std::string t = trim(raw);
    if (t.empty()) throw DataError("empty category string");
    const auto tokens = split(t, schema.delimiter);
    if (to_lower(tokens[0]) == to_lower(schema.benign_token))
        return {ClassKind::benign, std::nullopt, std::nullopt};
    if (tokens.size() < 2)
        throw DataError("malformed category string (need type" +
                        std::string(1, schema.delimiter) + "family): '" + raw + "'");
    const MalwareType type = parse_malware_type(tokens[0]);
    std::string family = trim(tokens[1]);
    if (family.empty()) throw DataError("empty family token in category: '" + raw + "'");
    if (const auto it = schema.family_aliases.find(family); it != schema.family_aliases.end())
        family = it->second;
    return {ClassKind::malware, type, family};
}

std::size_t LabeledDataset::count_class(ClassKind c) const {
    return static_cast<std::size_t>(std::count(class_label.begin(), class_label.end(), c));
}

std::size_t LabeledDataset::count_type(MalwareType t) const {
    std::size_t n = 0;
    for (const auto& tl : type_label)
        if (tl && *tl == t) ++n;
    return n;
}

std::map<std::string, std::size_t> LabeledDataset::family_counts(MalwareType t) const {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < n_rows(); ++i)
        if (type_label[i] && *type_label[i] == t) ++out[*family_label[i]];
    return out;
}

std::uint64_t LabeledDataset::content_hash() const {
    Fnv1a h;
    h.u64(n_rows()).u64(n_features());
    for (const auto& name : feature_names) h.str(name).str("\x1f");
    h.f64s(features.data());
    for (std::size_t i = 0; i < n_rows(); ++i) {
        h.u64(class_label[i] == ClassKind::malware ? 1 : 0);
        h.str(type_label[i] ? to_string(*type_label[i]) : "");
        h.str(family_label[i] ? *family_label[i] : "");
    }
    return h.value();
}

LabeledDataset load_csv(const std::filesystem::path& path, const CategorySchema& schema) {
    if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
    const CsvTable table = read_csv_file(path);
    if (table.header.empty()) throw DataError(path.string() + ": empty header");
    if (table.rows.empty()) throw DataError(path.string() + ": empty dataset");

    std::ptrdiff_t category_col = -1;
    std::ptrdiff_t class_col = -1;
    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string name = trim(table.header[c]);
        if (name == schema.category_column) {
            if (category_col >= 0)
                throw DataError(path.string() + ": duplicate category column '" + name + "'");
            category_col = static_cast<std::ptrdiff_t>(c);
        } else if (!schema.class_column.empty() && name == schema.class_column) {
            if (class_col >= 0)
                throw DataError(path.string() + ": duplicate class column '" + name + "'");
            class_col = static_cast<std::ptrdiff_t>(c);
        } else {
            if (!seen.insert(name).second)
                throw DataError(path.string() + ": duplicate feature name '" + name + "'");
            feature_cols.push_back(c);
            feature_names.push_back(name);
        }
    }
    if (category_col < 0)
        throw DataError(path.string() + ": category column '" + schema.category_column +
                        "' not found");
    if (!schema.class_column.empty() && class_col < 0)
        throw DataError(path.string() + ": class column '" + schema.class_column + "' not found");

    LabeledDataset ds;
    ds.feature_names = std::move(feature_names);
    ds.features = Matrix(table.rows.size(), feature_cols.size());
    ds.raw_category.reserve(table.rows.size());
    ds.class_label.reserve(table.rows.size());
    ds.type_label.reserve(table.rows.size());
    ds.family_label.reserve(table.rows.size());

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw DataError(path.string() + ": row " + std::to_string(r) + " has " +
                            std::to_string(row.size()) + " cells, header has " +
                            std::to_string(table.header.size()));
        for (std::size_t j = 0; j < feature_cols.size(); ++j)
            ds.features(r, j) = parse_cell(row[feature_cols[j]], r, ds.feature_names[j]);

        const std::string raw = trim(row[static_cast<std::size_t>(category_col)]);
        ClassKind cls;
        if (class_col >= 0) {
            const std::string token = to_lower(trim(row[static_cast<std::size_t>(class_col)]));
            if (token == "benign") {
                cls = ClassKind::benign;
            } else if (token == "malware") {
                cls = ClassKind::malware;
            } else {
                throw DataError(path.string() + ": unknown label token '" +
                                row[static_cast<std::size_t>(class_col)] + "' at row " +
                                std::to_string(r));
            }
        } else {
            cls = parse_category(raw, schema).cls;
        }
        ds.raw_category.push_back(raw);
        ds.class_label.push_back(cls);
        if (cls == ClassKind::malware) {
            ParsedCategory parsed;
            try {
                parsed = parse_category(raw, schema);
            } catch (const DataError& e) {
                throw DataError(path.string() + ": row " + std::to_string(r) + ": " + e.what());
            }
            if (parsed.cls != ClassKind::malware)
                throw DataError(path.string() + ": row " + std::to_string(r) +
                                ": class column says Malware but category is benign: '" + raw +
                                "'");
            ds.type_label.push_back(parsed.type);
            ds.family_label.push_back(parsed.family);
        } else {
            ds.type_label.push_back(std::nullopt);
            ds.family_label.push_back(std::nullopt);
        }
    }
    return ds;
}

void write_canonical_csv(const LabeledDataset& ds, const std::filesystem::path& path,
                         const CategorySchema& schema) {
    std::vector<std::string> header;
    header.push_back(schema.category_column);
    header.insert(header.end(), ds.feature_names.begin(), ds.feature_names.end());
    const bool with_class = !schema.class_column.empty();
    if (with_class) header.push_back(schema.class_column);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(header.size());
        row.push_back(ds.raw_category[r]);
        for (std::size_t j = 0; j < ds.n_features(); ++j)
            row.push_back(format_double(ds.features(r, j)));
        if (with_class) row.push_back(to_string(ds.class_label[r]));
        rows.push_back(std::move(row));
    }
    write_csv_file(path, header, rows);
}

TaskSelector TaskSelector::parse(const std::string& text) {
    const std::string t = to_lower(trim(text));
    TaskSelector sel;
    if (t == "binary") {
        sel.kind = TaskKind::binary;
        return sel;
    }
    if (t == "type3") {
        sel.kind = TaskKind::type3;
        return sel;
    }
    if (t.rfind("family5:", 0) == 0 || t.rfind("family5-", 0) == 0) {
        sel.kind = TaskKind::family5;
        sel.family_of = parse_malware_type(t.substr(8));
        return sel;
    }
    throw ConfigError("unknown task selector: '" + text +
                      "' (expected binary, type3 or family5:<type>)");
}

std::string TaskSelector::name() const {
    switch (kind) {
        case TaskKind::binary: return "binary";
        case TaskKind::type3: return "type3";
        case TaskKind::family5: return std::string("family5-") + to_lower(to_string(family_of));
    }
    return "?";
}

std::vector<std::size_t> TaskView::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
}

TaskView make_task_view(const LabeledDataset& ds, const TaskSelector& task) {
    TaskView view;
    view.task = task;

    // Collect per-row class names for retained rows, then assign ids by
    // sorted class-name order so the mapping is a pure function of the
    // class-name set.
    std::vector<std::size_t> rows;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        switch (task.kind) {
            case TaskKind::binary:
                rows.push_back(i);
                names.push_back(to_string(ds.class_label[i]));
                break;
            case TaskKind::type3:
                if (ds.class_label[i] == ClassKind::malware) {
                    rows.push_back(i);
                    names.push_back(to_string(*ds.type_label[i]));
                }
                break;
            case TaskKind::family5:
                if (ds.type_label[i] && *ds.type_label[i] == task.family_of) {
                    rows.push_back(i);
                    names.push_back(*ds.family_label[i]);
                }
                break;
        }
    }
    if (rows.empty()) {
        if (task.kind == TaskKind::family5)
            throw DataError(std::string("no rows of malware type ") + to_string(task.family_of));
        throw DataError("task view retained no rows");
    }

    std::set<std::string> observed(names.begin(), names.end());
    switch (task.kind) {
        case TaskKind::binary:
            for (const char* required : {"Benign", "Malware"})
                if (!observed.count(required))
                    throw DataError(std::string("binary task: class '") + required +
                                    "' has no rows");
            break;
        case TaskKind::type3:
            for (const char* required : {"Ransomware", "Spyware", "Trojan"})
                if (!observed.count(required))
                    throw DataError(std::string("type3 task: type '") + required + "' has no rows");
            break;
        case TaskKind::family5:
            if (observed.size() != 5 && !task.allow_any_k)
                throw DataError("family5 task: expected 5 distinct families, found " +
                                std::to_string(observed.size()) +
                                " (set allow_any_k to accept)");
            if (observed.size() < 2) throw DataError("family5 task: need at least 2 families");
            break;
    }

    view.class_names.assign(observed.begin(), observed.end());  // sorted by std::set
    std::unordered_map<std::string, int> id;
    for (std::size_t c = 0; c < view.class_names.size(); ++c)
        id[view.class_names[c]] = static_cast<int>(c);

    view.row_filter = std::move(rows);
    view.labels.reserve(view.row_filter.size());
    for (const auto& name : names) view.labels.push_back(id.at(name));
    return view;
}

Matrix view_matrix(const LabeledDataset& ds, const TaskView& view) {
    return ds.features.select_rows(view.row_filter);
}

}  // namespace malmem
