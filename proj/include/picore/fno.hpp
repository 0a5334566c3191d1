#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "picore/autodiff.hpp"
#include "picore/coreset.hpp"
#include "picore/grid.hpp"
#include "picore/residuals.hpp"

namespace picore::fno {

using ad::Tensor;

enum class Activation { Gelu, Identity };
enum class LossKind { Data, Physics };

std::string to_string(LossKind kind);

struct FnoConfig {
    int spatial_dims = 1;
    int modes = 16;  ///< retained Fourier modes per axis
    int width = 32;
    int n_layers = 4;
    int in_channels = 2;
    int out_channels = 1;
    Activation activation = Activation::Gelu;

    void validate() const;
    bool operator==(const FnoConfig&) const = default;

    /// Task encoding: input function + coordinate channels in, the full
    /// solution block out (time frames as output channels for dynamic PDEs).
    static FnoConfig for_task(PdeKind kind, const GridSpec& grid, int modes = 0,
                              int width = 32, int n_layers = 4);
};

/// All trainable parameters; resolution independent.
struct FnoParams {
    FnoConfig config;
    Tensor lift_w, lift_b;
    struct Layer {
        Tensor spec_re, spec_im;  ///< [out, in, modes] or [out, in, 2*m, m]
        Tensor byp_w, byp_b;
    };
    std::vector<Layer> layers;
    Tensor proj1_w, proj1_b;
    Tensor proj2_w, proj2_b;  ///< the "last layer" used for features

    int64_t parameter_count() const;
    int64_t last_layer_size() const { return proj2_w.size() + proj2_b.size(); }

    /// Fixed order: lift, per layer (spec_re, spec_im, byp_w, byp_b),
    /// proj1, proj2. The last-layer block is the tail of the flat vector.
    std::vector<double> flatten() const;
    void assign_flat(const std::vector<double>& flat);
    static FnoParams from_flat(const FnoConfig& config, const std::vector<double>& flat);
};

/// Seeded initialization: spectral weights uniform in [0, 1/width^2),
/// affine maps uniform within +-1/sqrt(fan_in).
FnoParams fno_init(const FnoConfig& config, uint64_t rng_seed);

/// Encode a sample input into the network input tensor
/// (value channels + coordinate channels).
Tensor encode_input(PdeKind kind, const Field& input);

/// Network output tensor back to a Field on the instance grid.
Field decode_output(const Tensor& out, const GridSpec& grid, PdeKind kind);

/// Full forward pass at the input's resolution.
Field fno_forward(const FnoParams& params, const PdeInstance& instance);

struct TrainRecord {
    int epoch = 0;
    double loss = 0.0;
    double wall_seconds = 0.0;
    LossKind loss_kind = LossKind::Data;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  ///< aligned with FnoParams::flatten()
};

/// Weighted batch loss sum_i w_i l_i / sum_i w_i and its parameter gradient.
/// Data mode needs labels for every index; physics mode only inputs.
LossGrad loss_and_grad(const FnoParams& params, const Dataset& dataset,
                       const std::vector<int>& indices, const std::vector<double>& weights,
                       LossKind kind, const residuals::PiWeights& pi, int max_workers = 1);

/// Per-sample loss and gradient; the feature column is the gradient
/// restricted to the last layer (tail of the flat vector).
struct SampleScore {
    double loss = 0.0;
    std::vector<double> last_layer_grad;
};
SampleScore score_sample(const FnoParams& params, const Dataset& dataset, int index,
                         LossKind kind, const residuals::PiWeights& pi);

/// Features for all listed samples: column i = last-layer gradient of sample
/// indices[i]; per_sample_loss holds the individual losses.
coreset::FeatureMatrix per_sample_features(const FnoParams& params, const Dataset& dataset,
                                           const std::vector<int>& indices, LossKind kind,
                                           const residuals::PiWeights& pi,
                                           int max_workers = 1);

/// Central-difference Hessian-vector product of the mean scoring loss with
/// respect to the last-layer parameters.
std::vector<double> last_layer_hvp(const FnoParams& params, const Dataset& dataset,
                                   const std::vector<int>& indices, LossKind kind,
                                   const residuals::PiWeights& pi,
                                   const std::vector<double>& direction,
                                   int max_workers = 1);

struct AdamState {
    std::vector<double> m, v;
    int64_t step = 0;

    static AdamState zeros(int64_t size) { return {std::vector<double>(size, 0.0), std::vector<double>(size, 0.0), 0}; }
};

/// Standard Adam update with bias correction, in place.
void adam_step(std::vector<double>& params_flat, const std::vector<double>& grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

struct TrainOptions {
    int epochs = 100;
    LossKind loss_kind = LossKind::Data;
    double lr = 1e-3;
    double lr_min = 1e-5;
    bool cosine_decay = true;
    int batch_size = 16;
    uint64_t shuffle_seed = 0;
    residuals::PiWeights pi;
    int max_workers = 1;
};

/// Seeded-shuffle epoch training over a weighted subset. Indices are sorted
/// ascending before training, so any selection covering the full dataset with
/// unit weights reproduces full-data training bit for bit.
std::vector<TrainRecord> train(FnoParams& params, const Dataset& dataset,
                               std::vector<int> indices, std::vector<double> weights,
                               const TrainOptions& opts);

/// Physics-informed loss evaluated on the autodiff tape, with its gradient
/// with respect to the prediction values. The value matches
/// residuals::pi_loss exactly; the gradient feeds the network backward pass.
std::pair<double, Field> pi_loss_with_prediction_grad(const PdeInstance& instance,
                                                      const Field& prediction,
                                                      const residuals::PiWeights& pi);

/// Squared-L2 error over squared reference norm (the NRMSE of the reports).
double nrmse(const Field& prediction, const Field& truth);

/// Mean NRMSE of the model over labeled samples.
double mean_test_nrmse(const FnoParams& params, const Dataset& dataset,
                       const std::vector<int>& indices, int max_workers = 1);

}  // namespace picore::fno
