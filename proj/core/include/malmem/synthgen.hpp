#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "malmem/dataset.hpp"
#include "malmem/matrix.hpp"

namespace malmem {

/// Synthetic Gaussian-blob dataset description. Informative columns get a
/// class-dependent mean (adjacent classes class_sep sigmas apart, sigma=1);
/// the rest are class-independent N(0,1) noise.
struct SynthSpec {
    std::size_t n_samples = 1000;
    std::size_t n_features = 10;
    std::size_t n_informative = 5;
    int n_classes = 2;
    double class_sep = 3.0;
    std::uint64_t seed = 0;
};

struct Blobs {
    Matrix X;
    std::vector<int> y;
    std::vector<std::size_t> informative;  // ground-truth relevant columns, ascending
};

/// Deterministic in the spec: identical specs give identical matrices.
Blobs make_blobs(const SynthSpec& spec);

/// Emit blobs in the features-CSV format so they can travel through
/// load_csv and make_task_view. The blob class ids map onto the task's
/// sorted class names: binary needs 2 classes, type3 needs 3, family5
/// needs 5 (written as Trojan families "syn0".."syn4").
void write_blobs_csv(const Blobs& blobs, TaskKind shape, const std::filesystem::path& path);

/// Full label-hierarchy CSV at desk scale: benign rows plus three malware
/// types with five families each, category strings using the raw tokens the
/// public dataset uses ("Trojan-Zeus-<row>", "Spyware-CWS-<row>", ...), so
/// every task level and the alias table are exercised. Two feature pairs
/// carry the type and family signals (offset class_sep sigmas per class);
/// remaining features are noise.
void write_hierarchy_csv(std::size_t rows_per_family, std::size_t benign_rows,
                         std::size_t n_features, double class_sep, std::uint64_t seed,
                         const std::filesystem::path& path);

}  // namespace malmem
