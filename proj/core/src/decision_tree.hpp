#pragma once

// Internal CART machinery shared by the random-forest and extra-trees
// trainers and the AdaBoost stump.

#include <cstdint>
#include <span>
#include <vector>

#include "malmem/matrix.hpp"
#include "malmem/rng.hpp"

namespace malmem::detail {

struct TreeNode {
    std::int32_t feature = -1;  // -1: leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf_class = -1;
};

using Tree = std::vector<TreeNode>;

struct TreeConfig {
    int n_classes = 2;
    int max_features = 0;       // non-constant candidate features per node; 0 = all
    bool random_thresholds = false;  // extra-trees: one uniform threshold per candidate
    int min_samples_split = 2;
};

/// Grow one unlimited-depth tree on the given sample rows. Candidate
/// features are drawn in a random order per node; constant-in-node features
/// are skipped without counting against max_features, so a split is found
/// whenever the node is impure and any feature still varies.
Tree build_tree(const Matrix& X, const std::vector<int>& y, std::vector<std::size_t> samples,
                const TreeConfig& cfg, Rng& rng);

int tree_predict(const Tree& tree, std::span<const double> row);

struct Stump {
    std::int32_t feature = 0;
    double threshold = 0.0;
    std::int32_t left_class = 0;   // x <= threshold
    std::int32_t right_class = 0;  // x >  threshold
};

/// Depth-1 stump minimizing weighted Gini over all features and midpoint
/// thresholds; leaf classes are weighted majorities. Ties go to the lower
/// feature index, then the lower threshold.
Stump fit_stump(const Matrix& X, const std::vector<int>& y, const std::vector<double>& w,
                int n_classes);

inline int stump_predict(const Stump& s, std::span<const double> row) {
    return row[static_cast<std::size_t>(s.feature)] <= s.threshold ? s.left_class : s.right_class;
}

}  // namespace malmem::detail
