#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "picore/errors.hpp"

namespace picore::coreset {

enum class FeatureSource { Data, Physics, Inputs };

std::string to_string(FeatureSource source);

/// Per-sample feature columns (d x n) plus per-sample scalar losses.
struct FeatureMatrix {
    Eigen::MatrixXd columns;          ///< column i = features of sample i
    Eigen::VectorXd per_sample_loss;  ///< loss of sample i under the scoring loss
    FeatureSource source = FeatureSource::Physics;

    int64_t n() const { return columns.cols(); }
    int64_t dim() const { return columns.rows(); }
    void validate() const;
};

/// A selected, weighted subset of sample indices.
struct CoresetSelection {
    std::vector<int> indices;      ///< ordered as selected, distinct, in [0, n)
    std::vector<double> weights;   ///< positive, aligned with indices
    std::string algorithm;
    double budget_fraction = 0.0;
    uint64_t seed = 0;
};

/// Pairwise similarity s_ij = M - ||g_i - g_j||_2 with M the maximum pairwise
/// distance, so entries are non-negative, symmetric, with M on the diagonal.
Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& columns);

/// Facility-location value f(S) = sum_i max_{j in S} s_ij (0 for empty S).
double facility_location_value(const Eigen::MatrixXd& similarity,
                               const std::vector<int>& subset);

/// Stochastic-greedy candidate pool size: min(n, ceil((n/k) ln(1/0.01))).
int default_subsample(int n, int k);

/// CRAIG: stochastic-greedy facility-location maximization over the
/// similarity matrix; weight of j = number of samples whose most similar
/// selected element is j (weights sum to n). subsample = 0 uses the default
/// pool size; subsample >= n is plain greedy.
CoresetSelection select_craig(const FeatureMatrix& features, int k, int subsample,
                              uint64_t rng_seed);

/// GradMatch: orthogonal matching pursuit on min ||Ax - b||^2, x >= 0, with a
/// ridge-regularized non-negative least-squares refit (projected gradient,
/// tolerance 1e-10). b is the mean feature column. Zero-weight entries are
/// pruned, so fewer than k indices may be returned.
CoresetSelection select_gradmatch(const FeatureMatrix& features, int k, double ridge = 1e-4);

/// Hutchinson diagonal estimate: mean of z .* hvp(z) over Rademacher probes.
std::vector<double> hutchinson_diag(
    const std::function<std::vector<double>(const std::vector<double>&)>& hvp, int d,
    int probes, uint64_t rng_seed);

/// AdaCore: CRAIG on features preconditioned elementwise by
/// 1 / (|hess_diag| + eps).
CoresetSelection select_adacore(const FeatureMatrix& features, int k,
                                const std::vector<double>& hess_diag, double eps,
                                int subsample, uint64_t rng_seed);

/// EL2N: top-k indices by per-sample loss, uniform weights n/k.
CoresetSelection select_el2n(const std::vector<double>& per_sample_loss, int k);

/// GraNd: top-k indices by feature-column L2 norm, uniform weights n/k.
CoresetSelection select_grand(const FeatureMatrix& features, int k);

/// k-means++ seeding + Lloyd iterations; selects the data point nearest each
/// center (distinct; a point claimed twice falls to the next nearest).
CoresetSelection select_kmeans(const Eigen::MatrixXd& inputs, int k, int iters,
                               uint64_t rng_seed);

/// Greedy diversity maximization over cosine similarity: start from the
/// largest-norm vector, then repeatedly add the vector whose maximum cosine
/// similarity to the selected set is smallest.
CoresetSelection select_cosine(const Eigen::MatrixXd& inputs, int k);

/// Kernel herding in input space: w starts at the mean, each step picks
/// argmax <w, x_j> and updates w += mean - x_pick.
CoresetSelection select_herding(const Eigen::MatrixXd& inputs, int k);

}  // namespace picore::coreset
