#include "malmem/synthgen.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "malmem/csv.hpp"
#include "malmem/error.hpp"
#include "malmem/rng.hpp"

namespace malmem {

Blobs make_blobs(const SynthSpec& spec) {
    if (spec.n_samples == 0 || spec.n_features == 0) throw ConfigError("blobs: empty shape");
    if (spec.n_informative > spec.n_features)
        throw ConfigError("blobs: n_informative exceeds n_features");
    if (spec.n_classes < 2) throw ConfigError("blobs: need at least 2 classes");
    if (!(spec.class_sep > 0.0)) throw ConfigError("blobs: class_sep must be positive");

    Rng rng(spec.seed);
    Blobs blobs;
    blobs.informative = rng.sample_without_replacement(spec.n_features, spec.n_informative);
    std::sort(blobs.informative.begin(), blobs.informative.end());
    std::vector<char> is_informative(spec.n_features, 0);
    for (std::size_t j : blobs.informative) is_informative[j] = 1;

    blobs.X = Matrix(spec.n_samples, spec.n_features);
    blobs.y.resize(spec.n_samples);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const int cls = static_cast<int>(i % static_cast<std::size_t>(spec.n_classes));
        blobs.y[i] = cls;
        for (std::size_t j = 0; j < spec.n_features; ++j) {
            const double mean = is_informative[j] ? spec.class_sep * static_cast<double>(cls) : 0.0;
            blobs.X(i, j) = mean + rng.normal();
        }
    }
    return blobs;
}

void write_hierarchy_csv(std::size_t rows_per_family, std::size_t benign_rows,
                         std::size_t n_features, double class_sep, std::uint64_t seed,
                         const std::filesystem::path& path) {
    if (n_features < 4) throw ConfigError("hierarchy: need at least 4 features");
    if (rows_per_family == 0 || benign_rows == 0) throw ConfigError("hierarchy: empty shape");

    // Raw tokens as the public CSV spells them; the loader's alias table
    // maps them onto the published family names.
    struct TypeBlock {
        const char* type;
        std::array<const char*, 5> families;
    };
    const std::array<TypeBlock, 3> blocks = {{
        {"Trojan", {"Zeus", "Emotet", "Refroso", "Scar", "Reconyc"}},
        {"Spyware", {"180solutions", "CWS", "Gator", "Transponder", "TIBS"}},
        {"Ransomware", {"Conti", "Maze", "Pysa", "Ako", "Shade"}},
    }};

    std::vector<std::string> header;
    header.push_back("Category");
    for (std::size_t j = 0; j < n_features; ++j) header.push_back("f" + std::to_string(j));
    header.push_back("Class");

    Rng rng(seed);
    std::vector<std::vector<std::string>> rows;
    std::size_t row_id = 0;
    // features 0-1 carry the type signal, 2-3 the family signal
    auto emit = [&](const std::string& category, const std::string& cls, double type_level,
                    double family_level) {
        std::vector<std::string> row;
        row.reserve(header.size());
        row.push_back(category);
        for (std::size_t j = 0; j < n_features; ++j) {
            double mean = 0.0;
            if (j < 2) mean = class_sep * type_level;
            else if (j < 4) mean = class_sep * family_level;
            row.push_back(format_double(mean + rng.normal()));
        }
        row.push_back(cls);
        rows.push_back(std::move(row));
        ++row_id;
    };

    for (std::size_t i = 0; i < benign_rows; ++i) emit("Benign", "Benign", 0.0, 0.0);
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        for (std::size_t f = 0; f < blocks[t].families.size(); ++f) {
            for (std::size_t i = 0; i < rows_per_family; ++i) {
                const std::string category = std::string(blocks[t].type) + "-" +
                                             blocks[t].families[f] + "-" +
                                             std::to_string(row_id);
                emit(category, "Malware", static_cast<double>(t + 1),
                     static_cast<double>(f + 1));
            }
        }
    }
    write_csv_file(path, header, rows);
}

void write_blobs_csv(const Blobs& blobs, TaskKind shape, const std::filesystem::path& path) {
    const int n_classes = 1 + *std::max_element(blobs.y.begin(), blobs.y.end());

    // Category strings per class id, matching the sorted-class-name ids the
    // task view will assign when the file is loaded back.
    std::vector<std::string> category;
    std::vector<std::string> cls;
    switch (shape) {
        case TaskKind::binary:
            if (n_classes != 2) throw ConfigError("binary-shaped blobs need 2 classes");
            category = {"Benign", "Trojan-synA"};
            cls = {"Benign", "Malware"};
            break;
        case TaskKind::type3:
            if (n_classes != 3) throw ConfigError("type3-shaped blobs need 3 classes");
            // sorted type names: Ransomware, Spyware, Trojan
            category = {"Ransomware-synA", "Spyware-synB", "Trojan-synC"};
            cls = {"Malware", "Malware", "Malware"};
            break;
        case TaskKind::family5:
            if (n_classes != 5) throw ConfigError("family5-shaped blobs need 5 classes");
            category.resize(5);
            cls.assign(5, "Malware");
            for (int c = 0; c < 5; ++c)
                category[static_cast<std::size_t>(c)] = "Trojan-syn" + std::to_string(c);
            break;
    }

    std::vector<std::string> header;
    header.push_back("Category");
    for (std::size_t j = 0; j < blobs.X.cols(); ++j) header.push_back("f" + std::to_string(j));
    header.push_back("Class");

    std::vector<std::vector<std::string>> rows;
    rows.reserve(blobs.X.rows());
    for (std::size_t i = 0; i < blobs.X.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(header.size());
        row.push_back(category[static_cast<std::size_t>(blobs.y[i])]);
        for (std::size_t j = 0; j < blobs.X.cols(); ++j)
            row.push_back(format_double(blobs.X(i, j)));
        row.push_back(cls[static_cast<std::size_t>(blobs.y[i])]);
        rows.push_back(std::move(row));
    }
    write_csv_file(path, header, rows);
}

}  // namespace malmem
