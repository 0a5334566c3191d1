#include "picore/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "picore/rng.hpp"

namespace picore::coreset {

std::string to_string(FeatureSource source) {
    switch (source) {
        case FeatureSource::Data: return "data";
        case FeatureSource::Physics: return "physics";
        case FeatureSource::Inputs: return "inputs";
    }
    return "unknown";
}

void FeatureMatrix::validate() const {
    if (n() < 1 || dim() < 1) throw ConfigError("FeatureMatrix: empty");
    if (!columns.allFinite()) throw ConfigError("FeatureMatrix: non-finite features");
    if (per_sample_loss.size() != n() || !per_sample_loss.allFinite())
        throw ConfigError("FeatureMatrix: bad per-sample losses");
}

namespace {

void check_budget(int k, int64_t n) {
    if (k < 1 || k > n) throw BudgetOutOfRange("coreset budget k out of range [1, n]");
}

/// Indices of the k largest keys, ties broken toward the lower index.
std::vector<int> top_k_indices(const std::vector<double>& keys, int k) {
    std::vector<int> order(keys.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (keys[a] != keys[b]) return keys[a] > keys[b];
        return a < b;
    });
    order.resize(k);
    return order;
}

}  // namespace

Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& columns) {
    int64_t n = columns.cols();
    Eigen::MatrixXd dist(n, n);
    for (int64_t i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int64_t j = i + 1; j < n; ++j) {
            double d = (columns.col(i) - columns.col(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    double shift = dist.maxCoeff();
    return Eigen::MatrixXd::Constant(n, n, shift) - dist;
}

double facility_location_value(const Eigen::MatrixXd& similarity,
                               const std::vector<int>& subset) {
    if (subset.empty()) return 0.0;
    int64_t n = similarity.rows();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double best = 0.0;
        for (int j : subset) best = std::max(best, similarity(i, j));
        total += best;
    }
    return total;
}

int default_subsample(int n, int k) {
    double pool = std::ceil(static_cast<double>(n) / k * std::log(100.0));
    return std::min<int>(n, std::max(1, static_cast<int>(pool)));
}

namespace {

CoresetSelection craig_on_similarity(const Eigen::MatrixXd& sim, int k, int subsample,
                                     uint64_t rng_seed, const std::string& name) {
    int n = static_cast<int>(sim.rows());
    check_budget(k, n);
    if (subsample <= 0) subsample = default_subsample(n, k);
    Rng rng(rng_seed);

    std::vector<int> selected;
    std::vector<char> in_set(n, 0);
    Eigen::VectorXd coverage = Eigen::VectorXd::Zero(n);

    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int step = 0; step < k; ++step) {
        // Candidate pool: `subsample` unselected elements drawn without
        // replacement (all of them when the pool covers the remainder).
        pool.clear();
        for (int i = 0; i < n; ++i)
            if (!in_set[i]) pool.push_back(i);
        int draw = std::min<int>(subsample, static_cast<int>(pool.size()));
        if (draw < static_cast<int>(pool.size())) {
            for (int i = 0; i < draw; ++i) {
                int64_t j = rng.uniform_int(i, static_cast<int64_t>(pool.size()) - 1);
                std::swap(pool[i], pool[j]);
            }
            pool.resize(draw);
            std::sort(pool.begin(), pool.end());
        }

        int best = -1;
        double best_gain = -1.0;
        for (int cand : pool) {
            double gain = 0.0;
            for (int i = 0; i < n; ++i)
                gain += std::max(0.0, sim(i, cand) - coverage(i));
            if (gain > best_gain) {
                best_gain = gain;
                best = cand;
            }
        }
        selected.push_back(best);
        in_set[best] = 1;
        for (int i = 0; i < n; ++i) coverage(i) = std::max(coverage(i), sim(i, best));
    }

    // gamma_j = |{i : nearest selected element of i is j}| (ties: lowest index).
    std::vector<double> weights(selected.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        int best_pos = 0;
        double best_sim = -1.0;
        for (size_t p = 0; p < selected.size(); ++p) {
            double s = sim(i, selected[p]);
            if (s > best_sim || (s == best_sim && selected[p] < selected[best_pos])) {
                best_sim = s;
                best_pos = static_cast<int>(p);
            }
        }
        weights[best_pos] += 1.0;
    }

    CoresetSelection out;
    out.indices = std::move(selected);
    out.weights = std::move(weights);
    out.algorithm = name;
    out.budget_fraction = static_cast<double>(k) / n;
    out.seed = rng_seed;
    return out;
}

}  // namespace

CoresetSelection select_craig(const FeatureMatrix& features, int k, int subsample,
                              uint64_t rng_seed) {
    features.validate();
    return craig_on_similarity(similarity_matrix(features.columns), k, subsample, rng_seed,
                               "craig");
}

CoresetSelection select_adacore(const FeatureMatrix& features, int k,
                                const std::vector<double>& hess_diag, double eps,
                                int subsample, uint64_t rng_seed) {
    features.validate();
    if (static_cast<int64_t>(hess_diag.size()) != features.dim())
        throw ShapeMismatch("select_adacore: hess_diag length != feature dim");
    Eigen::MatrixXd preconditioned = features.columns;
    for (int64_t r = 0; r < preconditioned.rows(); ++r)
        preconditioned.row(r) /= std::fabs(hess_diag[r]) + eps;
    CoresetSelection out = craig_on_similarity(similarity_matrix(preconditioned), k,
                                               subsample, rng_seed, "adacore");
    return out;
}

namespace {

/// Non-negative ridge least squares min_{x>=0} ||Ax-b||^2 + ridge ||x||^2 by
/// projected gradient with a Lipschitz step.
Eigen::VectorXd nnls_ridge(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double ridge,
                           Eigen::VectorXd x0, double tol = 1e-10, int max_iters = 50000) {
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += ridge;
    Eigen::VectorXd atb = a.transpose() * b;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    double lipschitz = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
    double step = 1.0 / lipschitz;

    Eigen::VectorXd x = x0.cwiseMax(0.0);
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd grad = gram * x - atb;
        Eigen::VectorXd next = (x - step * grad).cwiseMax(0.0);
        double delta = (next - x).lpNorm<Eigen::Infinity>();
        x = next;
        if (delta < tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
    }
    return x;
}

}  // namespace

CoresetSelection select_gradmatch(const FeatureMatrix& features, int k, double ridge) {
    features.validate();
    if (ridge < 0.0) throw ConfigError("select_gradmatch: ridge must be >= 0");
    int n = static_cast<int>(features.n());
    check_budget(k, n);

    const Eigen::MatrixXd& a = features.columns;
    Eigen::VectorXd b = a.rowwise().mean();
    Eigen::VectorXd r = b;

    std::vector<int> support;
    Eigen::VectorXd x;
    for (int step = 0; step < k; ++step) {
        int best = -1;
        double best_corr = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (std::find(support.begin(), support.end(), j) != support.end()) continue;
            double corr = a.col(j).dot(r);
            if (corr > best_corr) {
                best_corr = corr;
                best = j;
            }
        }
        support.push_back(best);

        Eigen::MatrixXd a_s(a.rows(), support.size());
        for (size_t c = 0; c < support.size(); ++c) a_s.col(c) = a.col(support[c]);
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(support.size());
        x0.head(x.size()) = x;
        x = nnls_ridge(a_s, b, ridge, std::move(x0));
        r = b - a_s * x;
    }

    CoresetSelection out;
    for (size_t c = 0; c < support.size(); ++c) {
        if (x(c) > 0.0) {
            out.indices.push_back(support[c]);
            out.weights.push_back(x(c));
        }
    }
    out.algorithm = "gradmatch";
    out.budget_fraction = static_cast<double>(k) / n;
    return out;
}

std::vector<double> hutchinson_diag(
    const std::function<std::vector<double>(const std::vector<double>&)>& hvp, int d,
    int probes, uint64_t rng_seed) {
    if (probes < 1) throw ConfigError("hutchinson_diag: probes must be >= 1");
    Rng rng(rng_seed);
    std::vector<double> estimate(d, 0.0);
    std::vector<double> z(d);
    for (int p = 0; p < probes; ++p) {
        for (double& v : z) v = rng.rademacher();
        std::vector<double> hz = hvp(z);
        if (static_cast<int>(hz.size()) != d)
            throw ShapeMismatch("hutchinson_diag: hvp returned wrong length");
        for (int i = 0; i < d; ++i) estimate[i] += z[i] * hz[i];
    }
    for (double& v : estimate) v /= probes;
    return estimate;
}

CoresetSelection select_el2n(const std::vector<double>& per_sample_loss, int k) {
    int n = static_cast<int>(per_sample_loss.size());
    check_budget(k, n);
    CoresetSelection out;
    out.indices = top_k_indices(per_sample_loss, k);
    out.weights.assign(k, static_cast<double>(n) / k);
    out.algorithm = "el2n";
    out.budget_fraction = static_cast<double>(k) / n;
    return out;
}

CoresetSelection select_grand(const FeatureMatrix& features, int k) {
    features.validate();
    int n = static_cast<int>(features.n());
    check_budget(k, n);
    std::vector<double> norms(n);
    for (int j = 0; j < n; ++j) norms[j] = features.columns.col(j).norm();
    CoresetSelection out;
    out.indices = top_k_indices(norms, k);
    out.weights.assign(k, static_cast<double>(n) / k);
    out.algorithm = "grand";
    out.budget_fraction = static_cast<double>(k) / n;
    return out;
}

CoresetSelection select_kmeans(const Eigen::MatrixXd& inputs, int k, int iters,
                               uint64_t rng_seed) {
    int n = static_cast<int>(inputs.cols());
    check_budget(k, n);
    Rng rng(rng_seed);

    // k-means++ seeding.
    Eigen::MatrixXd centers(inputs.rows(), k);
    centers.col(0) = inputs.col(rng.uniform_int(0, n - 1));
    Eigen::VectorXd d_sq(n);
    for (int j = 0; j < n; ++j) d_sq(j) = (inputs.col(j) - centers.col(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        double total = d_sq.sum();
        int pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                acc += d_sq(j);
                if (acc >= target) {
                    pick = j;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.uniform_int(0, n - 1));
        }
        centers.col(c) = inputs.col(pick);
        for (int j = 0; j < n; ++j)
            d_sq(j) = std::min(d_sq(j), (inputs.col(j) - centers.col(c)).squaredNorm());
    }

    // Lloyd iterations.
    std::vector<int> assignment(n, -1);
    for (int it = 0; it < iters; ++it) {
        bool changed = false;
        for (int j = 0; j < n; ++j) {
            int best = 0;
            double best_d = (inputs.col(j) - centers.col(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                double d = (inputs.col(j) - centers.col(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assignment[j] != best) {
                assignment[j] = best;
                changed = true;
            }
        }
        if (!changed) break;
        for (int c = 0; c < k; ++c) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(inputs.rows());
            int count = 0;
            for (int j = 0; j < n; ++j) {
                if (assignment[j] == c) {
                    mean += inputs.col(j);
                    ++count;
                }
            }
            if (count > 0) centers.col(c) = mean / count;
        }
    }

    // Nearest distinct data point per center.
    std::vector<char> claimed(n, 0);
    CoresetSelection out;
    for (int c = 0; c < k; ++c) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int p, int q) {
            double dp = (inputs.col(p) - centers.col(c)).squaredNorm();
            double dq = (inputs.col(q) - centers.col(c)).squaredNorm();
            if (dp != dq) return dp < dq;
            return p < q;
        });
        for (int j : order) {
            if (!claimed[j]) {
                claimed[j] = 1;
                out.indices.push_back(j);
                break;
            }
        }
    }
    out.weights.assign(out.indices.size(), static_cast<double>(n) / k);
    out.algorithm = "kmeans";
    out.budget_fraction = static_cast<double>(k) / n;
    out.seed = rng_seed;
    return out;
}

CoresetSelection select_cosine(const Eigen::MatrixXd& inputs, int k) {
    int n = static_cast<int>(inputs.cols());
    check_budget(k, n);
    Eigen::VectorXd norms(n);
    for (int j = 0; j < n; ++j) {
        norms(j) = inputs.col(j).norm();
        if (norms(j) == 0.0) throw ZeroVector("select_cosine: zero input vector");
    }
    Eigen::MatrixXd unit = inputs;
    for (int j = 0; j < n; ++j) unit.col(j) /= norms(j);

    int start = 0;
    for (int j = 1; j < n; ++j)
        if (norms(j) > norms(start)) start = j;

    std::vector<char> in_set(n, 0);
    CoresetSelection out;
    out.indices.push_back(start);
    in_set[start] = 1;
    Eigen::VectorXd max_sim(n);
    for (int j = 0; j < n; ++j) max_sim(j) = unit.col(j).dot(unit.col(start));

    while (static_cast<int>(out.indices.size()) < k) {
        int best = -1;
        for (int j = 0; j < n; ++j) {
            if (in_set[j]) continue;
            if (best == -1 || max_sim(j) < max_sim(best)) best = j;
        }
        out.indices.push_back(best);
        in_set[best] = 1;
        for (int j = 0; j < n; ++j)
            max_sim(j) = std::max(max_sim(j), unit.col(j).dot(unit.col(best)));
    }
    out.weights.assign(k, static_cast<double>(n) / k);
    out.algorithm = "cosine";
    out.budget_fraction = static_cast<double>(k) / n;
    return out;
}

CoresetSelection select_herding(const Eigen::MatrixXd& inputs, int k) {
    int n = static_cast<int>(inputs.cols());
    check_budget(k, n);
    Eigen::VectorXd mean = inputs.rowwise().mean();
    Eigen::VectorXd w = mean;

    std::vector<char> in_set(n, 0);
    CoresetSelection out;
    for (int step = 0; step < k; ++step) {
        int best = -1;
        double best_dot = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (in_set[j]) continue;
            double d = w.dot(inputs.col(j));
            if (d > best_dot) {
                best_dot = d;
                best = j;
            }
        }
        out.indices.push_back(best);
        in_set[best] = 1;
        w += mean - inputs.col(best);
    }
    out.weights.assign(k, static_cast<double>(n) / k);
    out.algorithm = "herding";
    out.budget_fraction = static_cast<double>(k) / n;
    return out;
}

}  // namespace picore::coreset
