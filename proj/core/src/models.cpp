#include "malmem/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "decision_tree.hpp"
#include "malmem/error.hpp"
#include "malmem/parallel.hpp"
#include "malmem/rng.hpp"

namespace malmem {

using json = nlohmann::json;

namespace detail {

struct ForestState {
    std::vector<Tree> trees;
};

struct KnnState {
    Matrix train_x;
    std::vector<int> train_y;
};

struct AdaState {
    std::vector<Stump> stumps;
    std::vector<double> alphas;
};

// Linear discriminants: score_c(x) = coef_c . x + intercept_c.
struct LdaState {
    Matrix coef;  // n_classes x d
    std::vector<double> intercept;
};

struct MnbState {
    Matrix feature_log_prob;  // n_classes x d
    std::vector<double> class_log_prior;
};

struct GnbState {
    Matrix mean;      // n_classes x d
    Matrix variance;  // n_classes x d, smoothed
    std::vector<double> class_log_prior;
};

struct ModelState {
    std::optional<ForestState> forest;
    std::optional<KnnState> knn;
    std::optional<AdaState> ada;
    std::optional<LdaState> lda;
    std::optional<MnbState> mnb;
    std::optional<GnbState> gnb;
};

}  // namespace detail

using detail::ModelState;

namespace {

constexpr int kModelFormatVersion = 1;

int argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return static_cast<int>(best);
}

std::vector<std::size_t> count_classes(const std::vector<int>& y, int n_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (int l : y) {
        if (l < 0 || l >= n_classes) throw Error("train: label id out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    return counts;
}

// ---- LDA linear algebra -------------------------------------------------

// In-place lower Cholesky of a dense symmetric d x d matrix.
bool cholesky(std::vector<double>& a, std::size_t d) {
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a[j * d + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * d + k] * a[j * d + k];
        if (diag <= 0.0) return false;
        const double root = std::sqrt(diag);
        a[j * d + j] = root;
        for (std::size_t i = j + 1; i < d; ++i) {
            double v = a[i * d + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * d + k] * a[j * d + k];
            a[i * d + j] = v / root;
        }
    }
    return true;
}

// Solve (L L^T) x = b given the lower factor.
void cholesky_solve(const std::vector<double>& L, std::size_t d, std::vector<double>& b) {
    for (std::size_t i = 0; i < d; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= L[i * d + k] * b[k];
        b[i] = v / L[i * d + i];
    }
    for (std::size_t ii = d; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t k = ii + 1; k < d; ++k) v -= L[k * d + ii] * b[k];
        b[ii] = v / L[ii * d + ii];
    }
}

void softmax_row(std::span<double> row) {
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : row) v /= sum;
}

// ---- trainers -----------------------------------------------------------

detail::ForestState train_forest(const ClassifierSpec& spec, const Matrix& X,
                                 const std::vector<int>& y, int n_classes) {
    if (spec.forest_trees < 1) throw ConfigError("forest: tree count must be >= 1");
    detail::TreeConfig cfg;
    cfg.n_classes = n_classes;
    cfg.max_features = spec.forest_max_features > 0
                           ? spec.forest_max_features
                           : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(X.cols()))));
    cfg.random_thresholds = spec.algorithm == Algorithm::extra_trees;

    detail::ForestState state;
    state.trees.resize(static_cast<std::size_t>(spec.forest_trees));
    const bool bootstrap = spec.bootstrap();
    const std::size_t n = X.rows();

    parallel_for(state.trees.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            Rng rng(mix_seed(spec.seed, t));
            std::vector<std::size_t> samples;
            if (bootstrap) {
                samples.resize(n);
                for (std::size_t i = 0; i < n; ++i)
                    samples[i] = static_cast<std::size_t>(rng.below(n));
            } else {
                samples.resize(n);
                std::iota(samples.begin(), samples.end(), 0);
            }
            state.trees[t] = detail::build_tree(X, y, std::move(samples), cfg, rng);
        }
    });
    return state;
}

detail::AdaState train_adaboost(const ClassifierSpec& spec, const Matrix& X,
                                const std::vector<int>& y, int n_classes) {
    if (spec.boost_rounds < 1) throw ConfigError("adaboost: rounds must be >= 1");
    const std::size_t n = X.rows();
    const double k = static_cast<double>(n_classes);
    std::vector<double> w(n, 1.0 / static_cast<double>(n));

    detail::AdaState state;
    for (int round = 0; round < spec.boost_rounds; ++round) {
        const detail::Stump stump = detail::fit_stump(X, y, w, n_classes);
        double err = 0.0;
        std::vector<char> miss(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (detail::stump_predict(stump, X.row(i)) != y[i]) {
                miss[i] = 1;
                err += w[i];
            }
        }
        if (err <= 1e-12) {
            // Perfect stump: record it with the capped SAMME weight and stop.
            constexpr double eps = 1e-12;
            state.stumps.push_back(stump);
            state.alphas.push_back(spec.boost_learning_rate *
                                   (std::log((1.0 - eps) / eps) + std::log(k - 1.0)));
            break;
        }
        const double alpha =
            spec.boost_learning_rate * (std::log((1.0 - err) / err) + std::log(k - 1.0));
        if (alpha <= 0.0) break;  // stump no better than chance
        state.stumps.push_back(stump);
        state.alphas.push_back(alpha);

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (miss[i]) w[i] *= std::exp(alpha);
            total += w[i];
        }
        for (double& v : w) v /= total;
    }
    if (state.stumps.empty())
        throw DataError("adaboost: no stump performed better than chance on this data");
    return state;
}

detail::LdaState train_lda(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y,
                           int n_classes, const std::vector<std::size_t>& counts) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    if (n <= static_cast<std::size_t>(n_classes))
        throw DataError("lda: need more rows than classes");

    Matrix means(static_cast<std::size_t>(n_classes), d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = X.row(i);
        for (std::size_t j = 0; j < d; ++j) means(static_cast<std::size_t>(y[i]), j) += row[j];
    }
    for (int c = 0; c < n_classes; ++c)
        for (std::size_t j = 0; j < d; ++j)
            means(static_cast<std::size_t>(c), j) /=
                static_cast<double>(counts[static_cast<std::size_t>(c)]);

    // Pooled within-class covariance, normalized by N - K.
    std::vector<double> cov(d * d, 0.0);
    std::vector<double> dev(d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = X.row(i);
        const auto mean = means.row(static_cast<std::size_t>(y[i]));
        for (std::size_t j = 0; j < d; ++j) dev[j] = row[j] - mean[j];
        for (std::size_t a = 0; a < d; ++a) {
            const double va = dev[a];
            if (va == 0.0) continue;
            double* crow = cov.data() + a * d;
            for (std::size_t b = a; b < d; ++b) crow[b] += va * dev[b];
        }
    }
    const double denom = static_cast<double>(n - static_cast<std::size_t>(n_classes));
    double trace = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            cov[a * d + b] /= denom;
            cov[b * d + a] = cov[a * d + b];
        }
        trace += cov[a * d + a];
    }
    const double ridge = spec.lda_ridge * (trace > 0.0 ? trace / static_cast<double>(d) : 1.0);
    for (std::size_t a = 0; a < d; ++a) cov[a * d + a] += ridge;

    if (!cholesky(cov, d)) throw DataError("lda: pooled covariance is singular");

    detail::LdaState state;
    state.coef = Matrix(static_cast<std::size_t>(n_classes), d);
    state.intercept.resize(static_cast<std::size_t>(n_classes));
    std::vector<double> solved(d);
    for (int c = 0; c < n_classes; ++c) {
        const auto mean = means.row(static_cast<std::size_t>(c));
        std::copy(mean.begin(), mean.end(), solved.begin());
        cholesky_solve(cov, d, solved);
        double quad = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            state.coef(static_cast<std::size_t>(c), j) = solved[j];
            quad += mean[j] * solved[j];
        }
        const double prior =
            static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(n);
        state.intercept[static_cast<std::size_t>(c)] = -0.5 * quad + std::log(prior);
    }
    return state;
}

detail::MnbState train_mnb(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y,
                           int n_classes, const std::vector<std::size_t>& counts) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();
    const double alpha = spec.nb_alpha;

    Matrix mass(static_cast<std::size_t>(n_classes), d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = X.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            if (row[j] < 0.0)
                throw DataError("multinomial_nb: negative feature value at row " +
                                std::to_string(i) + ", column " + std::to_string(j));
            mass(static_cast<std::size_t>(y[i]), j) += row[j];
        }
    }
    detail::MnbState state;
    state.feature_log_prob = Matrix(static_cast<std::size_t>(n_classes), d);
    state.class_log_prior.resize(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) {
        double total = 0.0;
        for (std::size_t j = 0; j < d; ++j) total += mass(static_cast<std::size_t>(c), j);
        const double log_denom = std::log(total + alpha * static_cast<double>(d));
        for (std::size_t j = 0; j < d; ++j)
            state.feature_log_prob(static_cast<std::size_t>(c), j) =
                std::log(mass(static_cast<std::size_t>(c), j) + alpha) - log_denom;
        state.class_log_prior[static_cast<std::size_t>(c)] =
            std::log(static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                     static_cast<double>(n));
    }
    return state;
}

detail::GnbState train_gnb(const Matrix& X, const std::vector<int>& y, int n_classes,
                           const std::vector<std::size_t>& counts) {
    const std::size_t n = X.rows();
    const std::size_t d = X.cols();

    detail::GnbState state;
    state.mean = Matrix(static_cast<std::size_t>(n_classes), d, 0.0);
    state.variance = Matrix(static_cast<std::size_t>(n_classes), d, 0.0);
    state.class_log_prior.resize(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
            state.mean(static_cast<std::size_t>(y[i]), j) += X(i, j);
    for (int c = 0; c < n_classes; ++c)
        for (std::size_t j = 0; j < d; ++j)
            state.mean(static_cast<std::size_t>(c), j) /=
                static_cast<double>(counts[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double dv = X(i, j) - state.mean(static_cast<std::size_t>(y[i]), j);
            state.variance(static_cast<std::size_t>(y[i]), j) += dv * dv;
        }
    }
    double max_var = 0.0;
    {
        // overall per-feature variance upper bound for the smoothing term
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += X(i, j);
        for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dv = X(i, j) - mean[j];
                v += dv * dv;
            }
            max_var = std::max(max_var, v / static_cast<double>(n));
        }
    }
    const double smoothing = 1e-9 * std::max(max_var, 1e-300);
    for (int c = 0; c < n_classes; ++c) {
        for (std::size_t j = 0; j < d; ++j) {
            auto& var = state.variance(static_cast<std::size_t>(c), j);
            var = var / static_cast<double>(counts[static_cast<std::size_t>(c)]) + smoothing;
        }
        state.class_log_prior[static_cast<std::size_t>(c)] =
            std::log(static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                     static_cast<double>(n));
    }
    return state;
}

// ---- per-algorithm scoring ------------------------------------------------

void forest_votes(const detail::ForestState& s, std::span<const double> row,
                  std::span<double> votes) {
    std::fill(votes.begin(), votes.end(), 0.0);
    for (const auto& tree : s.trees)
        votes[static_cast<std::size_t>(detail::tree_predict(tree, row))] += 1.0;
}

void ada_votes(const detail::AdaState& s, std::span<const double> row, std::span<double> votes) {
    std::fill(votes.begin(), votes.end(), 0.0);
    for (std::size_t t = 0; t < s.stumps.size(); ++t)
        votes[static_cast<std::size_t>(detail::stump_predict(s.stumps[t], row))] += s.alphas[t];
}

struct KnnVote {
    std::vector<double> votes;
    int decided;
};

KnnVote knn_classify(const detail::KnnState& s, std::span<const double> row, int k, int n_classes) {
    const std::size_t n = s.train_x.rows();
    const std::size_t d = s.train_x.cols();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto train_row = s.train_x.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = row[j] - train_row[j];
            acc += diff * diff;
        }
        dist[i] = {acc, i};  // index as secondary key: deterministic neighbor set
    }
    const auto kk = static_cast<std::ptrdiff_t>(k);
    std::nth_element(dist.begin(), dist.begin() + (kk - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + kk);

    KnnVote out;
    out.votes.assign(static_cast<std::size_t>(n_classes), 0.0);
    std::vector<double> nearest(static_cast<std::size_t>(n_classes),
                                std::numeric_limits<double>::infinity());
    for (std::ptrdiff_t t = 0; t < kk; ++t) {
        const auto cls = static_cast<std::size_t>(s.train_y[dist[static_cast<std::size_t>(t)].second]);
        out.votes[cls] += 1.0;
        nearest[cls] = std::min(nearest[cls], dist[static_cast<std::size_t>(t)].first);
    }
    // Majority vote; ties go to the class with the nearer neighbor, then to
    // the lower class id.
    int best = -1;
    for (int c = 0; c < n_classes; ++c) {
        if (best < 0) {
            if (out.votes[static_cast<std::size_t>(c)] > 0) best = c;
            continue;
        }
        const auto cc = static_cast<std::size_t>(c);
        const auto bb = static_cast<std::size_t>(best);
        if (out.votes[cc] > out.votes[bb] ||
            (out.votes[cc] == out.votes[bb] && nearest[cc] < nearest[bb]))
            best = c;
    }
    out.decided = best;
    return out;
}

}  // namespace

// ---- public surface -------------------------------------------------------

const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::multinomial_nb: return "multinomial_nb";
        case Algorithm::lda: return "lda";
        case Algorithm::adaboost: return "adaboost";
        case Algorithm::knn: return "knn";
        case Algorithm::extra_trees: return "extra_trees";
        case Algorithm::random_forest: return "random_forest";
        case Algorithm::gaussian_nb: return "gaussian_nb";
    }
    return "?";
}

std::string display_name(Algorithm a) {
    switch (a) {
        case Algorithm::multinomial_nb: return "MNB";
        case Algorithm::lda: return "LDA";
        case Algorithm::adaboost: return "AdaBoost";
        case Algorithm::knn: return "K-NN";
        case Algorithm::extra_trees: return "Extra-Tree";
        case Algorithm::random_forest: return "Random Forest";
        case Algorithm::gaussian_nb: return "GNB";
    }
    return "?";
}

Algorithm parse_algorithm(const std::string& text) {
    std::string t;
    for (char c : text)
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "mnb" || t == "multinomial_nb" || t == "nb") return Algorithm::multinomial_nb;
    if (t == "lda") return Algorithm::lda;
    if (t == "adaboost" || t == "ada") return Algorithm::adaboost;
    if (t == "knn" || t == "k-nn") return Algorithm::knn;
    if (t == "extratrees" || t == "extra_trees" || t == "et") return Algorithm::extra_trees;
    if (t == "rf" || t == "random_forest" || t == "randomforest") return Algorithm::random_forest;
    if (t == "gnb" || t == "gaussian_nb") return Algorithm::gaussian_nb;
    throw ConfigError("unknown classifier: '" + text + "'");
}

ClassifierSpec ClassifierSpec::defaults(Algorithm a, std::uint64_t seed) {
    ClassifierSpec spec;
    spec.algorithm = a;
    spec.seed = seed;
    return spec;
}

bool ClassifierSpec::bootstrap() const {
    if (forest_bootstrap) return *forest_bootstrap;
    return algorithm == Algorithm::random_forest;
}

std::string ClassifierSpec::canonical_string() const {
    std::ostringstream os;
    os << to_string(algorithm) << '(';
    switch (algorithm) {
        case Algorithm::random_forest:
        case Algorithm::extra_trees:
            os << "trees=" << forest_trees << ",criterion=gini,max_features="
               << (forest_max_features > 0 ? std::to_string(forest_max_features)
                                           : std::string("sqrt"))
               << ",bootstrap=" << (bootstrap() ? "true" : "false") << ",min_split=2";
            break;
        case Algorithm::adaboost:
            os << "rounds=" << boost_rounds << ",learning_rate=" << boost_learning_rate
               << ",base=stump,scheme=samme";
            break;
        case Algorithm::knn:
            os << "k=" << knn_k << ",metric=euclidean,votes=uniform";
            break;
        case Algorithm::multinomial_nb:
            os << "alpha=" << nb_alpha;
            break;
        case Algorithm::gaussian_nb:
            os << "var_smoothing=1e-9";
            break;
        case Algorithm::lda:
            os << "solver=pooled-cholesky,ridge=" << lda_ridge;
            break;
    }
    os << ",seed=" << seed << ')';
    return os.str();
}

TrainedModel::TrainedModel() : state_(std::make_unique<ModelState>()) {}
TrainedModel::TrainedModel(TrainedModel&&) noexcept = default;
TrainedModel& TrainedModel::operator=(TrainedModel&&) noexcept = default;
TrainedModel::~TrainedModel() = default;

TrainedModel::TrainedModel(const TrainedModel& other)
    : spec_(other.spec_),
      n_classes_(other.n_classes_),
      n_features_in_(other.n_features_in_),
      state_(std::make_unique<ModelState>(*other.state_)) {}

TrainedModel& TrainedModel::operator=(const TrainedModel& other) {
    if (this != &other) {
        spec_ = other.spec_;
        n_classes_ = other.n_classes_;
        n_features_in_ = other.n_features_in_;
        state_ = std::make_unique<ModelState>(*other.state_);
    }
    return *this;
}

TrainedModel train(const ClassifierSpec& spec, const Matrix& X, const std::vector<int>& y,
                   int n_classes) {
    if (X.rows() != y.size()) throw Error("train: labels/matrix row count mismatch");
    if (X.rows() == 0) throw DataError("train: empty training set");
    if (n_classes == 0) n_classes = 1 + *std::max_element(y.begin(), y.end());
    const auto counts = count_classes(y, n_classes);
    int present = 0;
    for (auto c : counts) present += c > 0 ? 1 : 0;
    if (present < 2) throw DataError("train: need at least 2 classes present");

    TrainedModel model;
    model.spec_ = spec;
    model.n_classes_ = n_classes;
    model.n_features_in_ = X.cols();
    switch (spec.algorithm) {
        case Algorithm::random_forest:
        case Algorithm::extra_trees:
            model.state_->forest = train_forest(spec, X, y, n_classes);
            break;
        case Algorithm::knn:
            if (X.rows() < static_cast<std::size_t>(spec.knn_k))
                throw DataError("knn: fewer training rows than k=" + std::to_string(spec.knn_k));
            model.state_->knn = detail::KnnState{X, y};
            break;
        case Algorithm::adaboost:
            model.state_->ada = train_adaboost(spec, X, y, n_classes);
            break;
        case Algorithm::lda:
            for (auto c : counts)
                if (c == 0) throw DataError("lda: every class needs at least one row");
            model.state_->lda = train_lda(spec, X, y, n_classes, counts);
            break;
        case Algorithm::multinomial_nb:
            model.state_->mnb = train_mnb(spec, X, y, n_classes, counts);
            break;
        case Algorithm::gaussian_nb:
            for (auto c : counts)
                if (c == 0) throw DataError("gaussian_nb: every class needs at least one row");
            model.state_->gnb = train_gnb(X, y, n_classes, counts);
            break;
    }
    return model;
}

std::vector<int> TrainedModel::predict(const Matrix& X) const {
    if (X.cols() != n_features_in_)
        throw Error("predict: expected " + std::to_string(n_features_in_) + " features, got " +
                    std::to_string(X.cols()));
    std::vector<int> out(X.rows());
    const auto k = static_cast<std::size_t>(n_classes_);

    if (state_->knn) {
        parallel_for(X.rows(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i)
                out[i] = knn_classify(*state_->knn, X.row(i), spec_.knn_k, n_classes_).decided;
        });
        return out;
    }

    parallel_for(X.rows(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> scores(k);
        for (std::size_t i = begin; i < end; ++i) {
            const auto row = X.row(i);
            if (state_->forest) {
                forest_votes(*state_->forest, row, scores);
            } else if (state_->ada) {
                ada_votes(*state_->ada, row, scores);
            } else if (state_->lda) {
                for (std::size_t c = 0; c < k; ++c) {
                    double s = state_->lda->intercept[c];
                    const auto coef = state_->lda->coef.row(c);
                    for (std::size_t j = 0; j < row.size(); ++j) s += coef[j] * row[j];
                    scores[c] = s;
                }
            } else if (state_->mnb) {
                for (std::size_t c = 0; c < k; ++c) {
                    double s = state_->mnb->class_log_prior[c];
                    const auto lp = state_->mnb->feature_log_prob.row(c);
                    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * lp[j];
                    scores[c] = s;
                }
            } else if (state_->gnb) {
                for (std::size_t c = 0; c < k; ++c) {
                    double s = state_->gnb->class_log_prior[c];
                    for (std::size_t j = 0; j < row.size(); ++j) {
                        const double var = state_->gnb->variance(c, j);
                        const double dv = row[j] - state_->gnb->mean(c, j);
                        s += -0.5 * (std::log(2.0 * std::numbers::pi * var) + dv * dv / var);
                    }
                    scores[c] = s;
                }
            } else {
                throw Error("predict on an empty model");
            }
            out[i] = argmax_lowest(scores);
        }
    });
    return out;
}

Matrix TrainedModel::predict_proba(const Matrix& X) const {
    if (X.cols() != n_features_in_)
        throw Error("predict_proba: expected " + std::to_string(n_features_in_) +
                    " features, got " + std::to_string(X.cols()));
    const auto k = static_cast<std::size_t>(n_classes_);
    Matrix out(X.rows(), k);

    parallel_for(X.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto row = X.row(i);
            auto dst = out.row(i);
            if (state_->forest) {
                forest_votes(*state_->forest, row, dst);
                const auto total = static_cast<double>(state_->forest->trees.size());
                for (double& v : dst) v /= total;
            } else if (state_->ada) {
                ada_votes(*state_->ada, row, dst);
                const double total =
                    std::accumulate(state_->ada->alphas.begin(), state_->ada->alphas.end(), 0.0);
                for (double& v : dst) v /= total;
            } else if (state_->knn) {
                const auto vote = knn_classify(*state_->knn, row, spec_.knn_k, n_classes_);
                for (std::size_t c = 0; c < k; ++c)
                    dst[c] = vote.votes[c] / static_cast<double>(spec_.knn_k);
            } else if (state_->lda) {
                for (std::size_t c = 0; c < k; ++c) {
                    double s = state_->lda->intercept[c];
                    const auto coef = state_->lda->coef.row(c);
                    for (std::size_t j = 0; j < row.size(); ++j) s += coef[j] * row[j];
                    dst[c] = s;
                }
                softmax_row(dst);
            } else if (state_->mnb) {
                for (std::size_t c = 0; c < k; ++c) {
                    double s = state_->mnb->class_log_prior[c];
                    const auto lp = state_->mnb->feature_log_prob.row(c);
                    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * lp[j];
                    dst[c] = s;
                }
                softmax_row(dst);
            } else if (state_->gnb) {
                for (std::size_t c = 0; c < k; ++c) {
                    double s = state_->gnb->class_log_prior[c];
                    for (std::size_t j = 0; j < row.size(); ++j) {
                        const double var = state_->gnb->variance(c, j);
                        const double dv = row[j] - state_->gnb->mean(c, j);
                        s += -0.5 * (std::log(2.0 * std::numbers::pi * var) + dv * dv / var);
                    }
                    dst[c] = s;
                }
                softmax_row(dst);
            }
        }
    });
    return out;
}

// ---- serialization ----------------------------------------------------------

namespace {

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.rows() * m.cols()) throw Error("model json: matrix size mismatch");
    m.data() = data;
    return m;
}

json spec_to_json(const ClassifierSpec& s) {
    json j{{"algorithm", to_string(s.algorithm)}, {"seed", s.seed}};
    switch (s.algorithm) {
        case Algorithm::random_forest:
        case Algorithm::extra_trees:
            j["forest_trees"] = s.forest_trees;
            j["forest_max_features"] = s.forest_max_features;
            j["bootstrap"] = s.bootstrap();
            break;
        case Algorithm::adaboost:
            j["boost_rounds"] = s.boost_rounds;
            j["boost_learning_rate"] = s.boost_learning_rate;
            break;
        case Algorithm::knn:
            j["knn_k"] = s.knn_k;
            break;
        case Algorithm::multinomial_nb:
            j["nb_alpha"] = s.nb_alpha;
            break;
        case Algorithm::lda:
            j["lda_ridge"] = s.lda_ridge;
            break;
        case Algorithm::gaussian_nb:
            break;
    }
    return j;
}

ClassifierSpec spec_from_json(const json& j) {
    ClassifierSpec s = ClassifierSpec::defaults(parse_algorithm(j.at("algorithm").get<std::string>()),
                                                j.at("seed").get<std::uint64_t>());
    if (j.contains("forest_trees")) s.forest_trees = j["forest_trees"].get<int>();
    if (j.contains("forest_max_features"))
        s.forest_max_features = j["forest_max_features"].get<int>();
    if (j.contains("bootstrap")) s.forest_bootstrap = j["bootstrap"].get<bool>();
    if (j.contains("boost_rounds")) s.boost_rounds = j["boost_rounds"].get<int>();
    if (j.contains("boost_learning_rate"))
        s.boost_learning_rate = j["boost_learning_rate"].get<double>();
    if (j.contains("knn_k")) s.knn_k = j["knn_k"].get<int>();
    if (j.contains("nb_alpha")) s.nb_alpha = j["nb_alpha"].get<double>();
    if (j.contains("lda_ridge")) s.lda_ridge = j["lda_ridge"].get<double>();
    return s;
}

}  // namespace

std::string TrainedModel::to_json() const {
    json j;
    j["format"] = "malmem-model";
    j["format_version"] = kModelFormatVersion;
    j["spec"] = spec_to_json(spec_);
    j["n_classes"] = n_classes_;
    j["n_features_in"] = n_features_in_;
    json state;
    if (state_->forest) {
        json trees = json::array();
        for (const auto& tree : state_->forest->trees) {
            json nodes = json::array();
            for (const auto& node : tree)
                nodes.push_back({node.feature, node.threshold, node.left, node.right,
                                 node.leaf_class});
            trees.push_back(std::move(nodes));
        }
        state["trees"] = std::move(trees);
    } else if (state_->knn) {
        state["train_x"] = matrix_to_json(state_->knn->train_x);
        state["train_y"] = state_->knn->train_y;
    } else if (state_->ada) {
        json stumps = json::array();
        for (const auto& s : state_->ada->stumps)
            stumps.push_back({s.feature, s.threshold, s.left_class, s.right_class});
        state["stumps"] = std::move(stumps);
        state["alphas"] = state_->ada->alphas;
    } else if (state_->lda) {
        state["coef"] = matrix_to_json(state_->lda->coef);
        state["intercept"] = state_->lda->intercept;
    } else if (state_->mnb) {
        state["feature_log_prob"] = matrix_to_json(state_->mnb->feature_log_prob);
        state["class_log_prior"] = state_->mnb->class_log_prior;
    } else if (state_->gnb) {
        state["mean"] = matrix_to_json(state_->gnb->mean);
        state["variance"] = matrix_to_json(state_->gnb->variance);
        state["class_log_prior"] = state_->gnb->class_log_prior;
    }
    j["state"] = std::move(state);
    return j.dump();
}

TrainedModel TrainedModel::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model json: ") + e.what());
    }
    if (j.value("format", "") != "malmem-model") throw DataError("not a model container");
    if (j.value("format_version", -1) != kModelFormatVersion)
        throw DataError("unsupported model format version");

    TrainedModel model;
    model.spec_ = spec_from_json(j.at("spec"));
    model.n_classes_ = j.at("n_classes").get<int>();
    model.n_features_in_ = j.at("n_features_in").get<std::size_t>();
    const json& state = j.at("state");
    switch (model.spec_.algorithm) {
        case Algorithm::random_forest:
        case Algorithm::extra_trees: {
            detail::ForestState forest;
            for (const auto& tree_json : state.at("trees")) {
                detail::Tree tree;
                for (const auto& node_json : tree_json) {
                    detail::TreeNode node;
                    node.feature = node_json.at(0).get<std::int32_t>();
                    node.threshold = node_json.at(1).get<double>();
                    node.left = node_json.at(2).get<std::int32_t>();
                    node.right = node_json.at(3).get<std::int32_t>();
                    node.leaf_class = node_json.at(4).get<std::int32_t>();
                    tree.push_back(node);
                }
                forest.trees.push_back(std::move(tree));
            }
            model.state_->forest = std::move(forest);
            break;
        }
        case Algorithm::knn:
            model.state_->knn = detail::KnnState{matrix_from_json(state.at("train_x")),
                                                 state.at("train_y").get<std::vector<int>>()};
            break;
        case Algorithm::adaboost: {
            detail::AdaState ada;
            for (const auto& s : state.at("stumps"))
                ada.stumps.push_back({s.at(0).get<std::int32_t>(), s.at(1).get<double>(),
                                      s.at(2).get<std::int32_t>(), s.at(3).get<std::int32_t>()});
            ada.alphas = state.at("alphas").get<std::vector<double>>();
            model.state_->ada = std::move(ada);
            break;
        }
        case Algorithm::lda:
            model.state_->lda = detail::LdaState{
                matrix_from_json(state.at("coef")),
                state.at("intercept").get<std::vector<double>>()};
            break;
        case Algorithm::multinomial_nb:
            model.state_->mnb = detail::MnbState{
                matrix_from_json(state.at("feature_log_prob")),
                state.at("class_log_prior").get<std::vector<double>>()};
            break;
        case Algorithm::gaussian_nb:
            model.state_->gnb = detail::GnbState{
                matrix_from_json(state.at("mean")), matrix_from_json(state.at("variance")),
                state.at("class_log_prior").get<std::vector<double>>()};
            break;
    }
    return model;
}

void TrainedModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << to_json();
    if (!out) throw DataError("model write failed: " + path.string());
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

}  // namespace malmem
