#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "malmem/matrix.hpp"

namespace malmem {

enum class Algorithm {
    multinomial_nb,
    lda,
    adaboost,
    knn,
    extra_trees,
    random_forest,
    gaussian_nb,  // sensitivity-check variant, not part of the default grid
};

const char* to_string(Algorithm a);
std::string display_name(Algorithm a);  // table row labels: "MNB", "Random Forest", ...
Algorithm parse_algorithm(const std::string& text);

/// Algorithm choice plus pinned hyperparameters. Every field has a fixed
/// default; canonical_string() is embedded in reports so a result can be
/// traced to the exact configuration that produced it.
struct ClassifierSpec {
    Algorithm algorithm = Algorithm::random_forest;
    std::uint64_t seed = 0;

    // forests (random_forest / extra_trees)
    int forest_trees = 100;
    int forest_max_features = 0;           // 0: ceil(sqrt(d)) per split
    std::optional<bool> forest_bootstrap;  // unset: true for RF, false for extra-trees

    // adaboost: SAMME over depth-1 stumps
    int boost_rounds = 50;
    double boost_learning_rate = 1.0;

    // knn
    int knn_k = 5;

    // naive bayes
    double nb_alpha = 1.0;  // Laplace smoothing

    // lda: ridge added to the pooled covariance diagonal, scaled by trace/d
    double lda_ridge = 1e-9;

    static ClassifierSpec defaults(Algorithm a, std::uint64_t seed = 0);
    bool bootstrap() const;
    std::string canonical_string() const;
};

namespace detail {
struct ModelState;
}

/// A fitted classifier. Immutable; safe for concurrent predict calls.
///
/// Tie-breaks everywhere resolve to the lowest class id (votes, argmax,
/// stump selection). The one refinement is KNN, which breaks vote ties by
/// the nearer neighbor first and falls back to the lowest class id.
class TrainedModel {
public:
    TrainedModel(TrainedModel&&) noexcept;
    TrainedModel& operator=(TrainedModel&&) noexcept;
    TrainedModel(const TrainedModel&);
    TrainedModel& operator=(const TrainedModel&);
    ~TrainedModel();

    Algorithm algorithm() const { return spec_.algorithm; }
    const ClassifierSpec& spec() const { return spec_; }
    int n_classes() const { return n_classes_; }
    std::size_t n_features_in() const { return n_features_in_; }

    /// One class id per row; pure function of (model, X).
    std::vector<int> predict(const Matrix& X) const;

    /// Per-class probability rows summing to 1. Forests and KNN report vote
    /// fractions; AdaBoost normalized stump weights; NB/LDA posterior
    /// probabilities.
    Matrix predict_proba(const Matrix& X) const;

    /// Versioned JSON container: algorithm tag, hyperparameters, fitted state.
    std::string to_json() const;
    static TrainedModel from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static TrainedModel load(const std::filesystem::path& path);

private:
    friend TrainedModel train(const ClassifierSpec&, const Matrix&, const std::vector<int>&, int);
    TrainedModel();

    ClassifierSpec spec_;
    int n_classes_ = 0;
    std::size_t n_features_in_ = 0;
    std::unique_ptr<detail::ModelState> state_;
};

/// Fit a classifier. Deterministic given (spec.seed, X, y); forests draw
/// per-tree randomness from (seed, tree index) so parallel training gives
/// the same model as sequential.
///
/// n_classes = 0 infers max(y)+1. At least 2 classes must be present.
/// MultinomialNB additionally requires X >= 0; KNN requires rows >= k.
TrainedModel train(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y,
                   int n_classes = 0);

}  // namespace malmem
