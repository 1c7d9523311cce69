#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "malmem/matrix.hpp"

namespace malmem {

enum class ClassKind { benign, malware };

enum class MalwareType { trojan, spyware, ransomware };

const char* to_string(ClassKind c);
const char* to_string(MalwareType t);
MalwareType parse_malware_type(const std::string& token);  // case-insensitive

/// How to interpret the label columns of a features CSV.
///
/// The default matches the MalMemAnalysis-2022 layout: a "Category" column
/// holding hyphen-delimited strings ("Benign", "Trojan-Zeus-<hash>", ...),
/// a "Class" column holding Benign/Malware, and an alias table mapping the
/// raw family tokens onto the published family names (Zeus -> Zeu, etc.).
struct CategorySchema {
    std::string category_column = "Category";
    std::string class_column = "Class";  // empty: derive the class from the category string
    char delimiter = '-';
    std::string benign_token = "Benign";
    std::map<std::string, std::string> family_aliases;

    static CategorySchema defaults();

    /// Key=value file; keys: category_column, class_column, delimiter,
    /// benign_token, alias.<from>=<to>. Unknown keys are an error.
    static CategorySchema load(const std::filesystem::path& path);
};

struct ParsedCategory {
    ClassKind cls = ClassKind::benign;
    std::optional<MalwareType> type;
    std::optional<std::string> family;
};

/// Split a raw category string into (class, type, family).
/// Benign rows map to (benign, none, none); malware rows split on the
/// schema delimiter: first token = type, second = family (alias-normalized),
/// any further tokens (sample hashes) are ignored.
ParsedCategory parse_category(const std::string& raw, const CategorySchema& schema);

/// A loaded features CSV: numeric matrix plus the three-level label
/// hierarchy. Immutable after load; safe for concurrent reads.
struct LabeledDataset {
    Matrix features;
    std::vector<std::string> feature_names;
    std::vector<std::string> raw_category;
    std::vector<ClassKind> class_label;
    std::vector<std::optional<MalwareType>> type_label;    // set iff malware
    std::vector<std::optional<std::string>> family_label;  // set iff malware

    std::size_t n_rows() const { return features.rows(); }
    std::size_t n_features() const { return features.cols(); }
    std::size_t count_class(ClassKind c) const;
    std::size_t count_type(MalwareType t) const;
    std::map<std::string, std::size_t> family_counts(MalwareType t) const;

    /// FNV-1a over the matrix bits, labels and feature names. Stable across
    /// runs for identical content; used as provenance in reports.
    std::uint64_t content_hash() const;
};

/// Load and validate a features CSV. Order-preserving: file row i is matrix
/// row i. Every non-label cell must parse as a finite double.
LabeledDataset load_csv(const std::filesystem::path& path,
                        const CategorySchema& schema = CategorySchema::defaults());

/// Canonical writer, the inverse of load_csv: category column, features
/// (shortest round-trip formatting), class column. Reloading yields an
/// identical matrix and identical labels.
void write_canonical_csv(const LabeledDataset& ds, const std::filesystem::path& path,
                         const CategorySchema& schema = CategorySchema::defaults());

enum class TaskKind { binary, type3, family5 };

/// Task selector: binary (all rows), type3 (malware rows), family5:<type>
/// (one malware type's rows, labeled by family).
struct TaskSelector {
    TaskKind kind = TaskKind::binary;
    MalwareType family_of = MalwareType::trojan;  // family5 only
    bool allow_any_k = false;  // family5: accept a family count other than 5

    /// Accepts "binary", "type3", "family5:<type>" (also "family5-<type>").
    static TaskSelector parse(const std::string& text);
    std::string name() const;  // "binary", "type3", "family5-trojan", ...
};

/// One task level's view of a dataset: retained rows, dense integer labels,
/// and the class-name table. Class ids follow sorted class-name order.
struct TaskView {
    TaskSelector task;
    std::vector<int> labels;               // per retained row, in [0, n_classes)
    std::vector<std::string> class_names;  // sorted; index = class id
    std::vector<std::size_t> row_filter;   // dataset row indices, ascending

    int n_classes() const { return static_cast<int>(class_names.size()); }
    std::vector<std::size_t> class_counts() const;
};

/// Build a task view. Binary requires both classes present; type3 all three
/// types; family5 exactly 5 families unless allow_any_k (then >= 2).
TaskView make_task_view(const LabeledDataset& ds, const TaskSelector& task);

/// Copy of the view's rows, in row_filter order.
Matrix view_matrix(const LabeledDataset& ds, const TaskView& view);

}  // namespace malmem
