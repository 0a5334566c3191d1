#include "picore/fno.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>

#include "picore/rng.hpp"
#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

namespace picore::fno {

namespace {
using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Deterministic parallel map: out[i] = fn(i), any completion order.
template <typename Fn>
void parallel_for(int64_t count, int max_workers, Fn&& fn) {
    int workers = std::min<int64_t>(pde::resolve_worker_count(max_workers), count);
    if (workers <= 1) {
        for (int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::vector<std::future<void>> futures;
    for (int w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&]() {
            for (int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace

std::string to_string(LossKind kind) { return kind == LossKind::Data ? "data" : "physics"; }

void FnoConfig::validate() const {
    if (spatial_dims != 1 && spatial_dims != 2) throw ConfigError("FnoConfig: spatial_dims");
    if (modes < 1) throw ConfigError("FnoConfig: modes must be >= 1");
    if (width < 1) throw ConfigError("FnoConfig: width must be >= 1");
    if (n_layers < 1) throw ConfigError("FnoConfig: n_layers must be >= 1");
    if (in_channels < 1 || out_channels < 1) throw ConfigError("FnoConfig: channels");
}

FnoConfig FnoConfig::for_task(PdeKind kind, const GridSpec& grid, int modes, int width,
                              int n_layers) {
    FnoConfig c;
    c.spatial_dims = grid.spatial_dims;
    c.modes = modes > 0 ? modes : (grid.spatial_dims == 1 ? 16 : 12);
    c.width = width;
    c.n_layers = n_layers;
    c.in_channels = 1 + grid.spatial_dims;  // input function + coordinates
    c.out_channels = is_dynamic(kind) ? grid.n_time : 1;
    c.validate();
    return c;
}

namespace {

std::vector<const Tensor*> tensor_list(const FnoParams& p) {
    std::vector<const Tensor*> list = {&p.lift_w, &p.lift_b};
    for (const auto& layer : p.layers) {
        list.push_back(&layer.spec_re);
        list.push_back(&layer.spec_im);
        list.push_back(&layer.byp_w);
        list.push_back(&layer.byp_b);
    }
    list.push_back(&p.proj1_w);
    list.push_back(&p.proj1_b);
    list.push_back(&p.proj2_w);
    list.push_back(&p.proj2_b);
    return list;
}

std::vector<Tensor*> tensor_list_mut(FnoParams& p) {
    std::vector<Tensor*> list;
    for (const Tensor* t : tensor_list(p)) list.push_back(const_cast<Tensor*>(t));
    return list;
}

FnoParams make_shapes(const FnoConfig& config) {
    config.validate();
    FnoParams p;
    p.config = config;
    int64_t w = config.width;
    p.lift_w = Tensor({w, config.in_channels});
    p.lift_b = Tensor({w});
    for (int l = 0; l < config.n_layers; ++l) {
        FnoParams::Layer layer;
        if (config.spatial_dims == 1) {
            layer.spec_re = Tensor({w, w, config.modes});
            layer.spec_im = Tensor({w, w, config.modes});
        } else {
            layer.spec_re = Tensor({w, w, 2 * config.modes, config.modes});
            layer.spec_im = Tensor({w, w, 2 * config.modes, config.modes});
        }
        layer.byp_w = Tensor({w, w});
        layer.byp_b = Tensor({w});
        p.layers.push_back(std::move(layer));
    }
    p.proj1_w = Tensor({w, w});
    p.proj1_b = Tensor({w});
    p.proj2_w = Tensor({config.out_channels, w});
    p.proj2_b = Tensor({config.out_channels});
    return p;
}

}  // namespace

int64_t FnoParams::parameter_count() const {
    int64_t total = 0;
    for (const Tensor* t : tensor_list(*this)) total += t->size();
    return total;
}

std::vector<double> FnoParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Tensor* t : tensor_list(*this))
        flat.insert(flat.end(), t->data.begin(), t->data.end());
    return flat;
}

void FnoParams::assign_flat(const std::vector<double>& flat) {
    if (static_cast<int64_t>(flat.size()) != parameter_count())
        throw ShapeMismatch("FnoParams::assign_flat: size mismatch");
    int64_t offset = 0;
    for (Tensor* t : tensor_list_mut(*this)) {
        std::copy(flat.begin() + offset, flat.begin() + offset + t->size(), t->data.begin());
        offset += t->size();
    }
}

FnoParams FnoParams::from_flat(const FnoConfig& config, const std::vector<double>& flat) {
    FnoParams p = make_shapes(config);
    p.assign_flat(flat);
    return p;
}

FnoParams fno_init(const FnoConfig& config, uint64_t rng_seed) {
    FnoParams p = make_shapes(config);
    Rng rng(rng_seed);
    double spec_scale = 1.0 / (static_cast<double>(config.width) * config.width);

    auto fill_affine = [&](Tensor& w, Tensor& b, int64_t fan_in) {
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        for (double& v : b.data) v = rng.uniform(-bound, bound);
    };

    fill_affine(p.lift_w, p.lift_b, config.in_channels);
    for (auto& layer : p.layers) {
        for (double& v : layer.spec_re.data) v = spec_scale * rng.uniform();
        for (double& v : layer.spec_im.data) v = spec_scale * rng.uniform();
        fill_affine(layer.byp_w, layer.byp_b, config.width);
    }
    fill_affine(p.proj1_w, p.proj1_b, config.width);
    fill_affine(p.proj2_w, p.proj2_b, config.width);
    return p;
}

Tensor encode_input(PdeKind kind, const Field& input) {
    const GridSpec& grid = input.grid;
    (void)kind;
    if (grid.spatial_dims == 1) {
        int n = grid.n_points;
        Tensor x({2, n});
        for (int j = 0; j < n; ++j) {
            x.data[j] = input.at(j);
            x.data[n + j] = grid.coord(j);
        }
        return x;
    }
    int n = grid.n_points;
    int64_t plane = grid.spatial_size();
    Tensor x({3, n, n});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            int64_t idx = static_cast<int64_t>(i) * n + j;
            x.data[idx] = input.values[idx];
            x.data[plane + idx] = grid.coord(i);
            x.data[2 * plane + idx] = grid.coord(j);
        }
    }
    return x;
}

Field decode_output(const Tensor& out, const GridSpec& grid, PdeKind kind) {
    Field f;
    f.grid = grid;
    f.frames = is_dynamic(kind) ? grid.n_time : 1;
    f.values = out.data;
    if (f.size() != static_cast<int64_t>(f.frames) * f.spatial_size())
        throw ShapeMismatch("decode_output: tensor does not match grid");
    return f;
}

namespace {

/// Leaf ids of every parameter tensor on a tape, in flatten() order.
struct ParamLeaves {
    std::vector<int> ids;
    int proj2_w = -1, proj2_b = -1;
};

ParamLeaves push_params(ad::Tape& tape, const FnoParams& p) {
    ParamLeaves leaves;
    for (const Tensor* t : tensor_list(p)) leaves.ids.push_back(tape.leaf(*t));
    leaves.proj2_w = leaves.ids[leaves.ids.size() - 2];
    leaves.proj2_b = leaves.ids[leaves.ids.size() - 1];
    return leaves;
}

std::vector<double> gather_grad(const ad::Tape& tape, const ParamLeaves& leaves) {
    std::vector<double> flat;
    for (int id : leaves.ids) {
        const Tensor& g = tape.grad(id);
        flat.insert(flat.end(), g.data.begin(), g.data.end());
    }
    return flat;
}

int activation_node(ad::Tape& tape, int x, Activation act) {
    return act == Activation::Gelu ? tape.gelu(x) : x;
}

/// The network graph; returns the output node [out_channels, n(, n)].
int forward_on_tape(ad::Tape& tape, const ParamLeaves& leaves, const FnoParams& p, int x) {
    const FnoConfig& c = p.config;
    int resolution = static_cast<int>(tape.value(x).shape[1]);
    if (resolution < 2 * c.modes)
        throw ResolutionTooLow("fno_forward: input resolution < 2*modes");

    size_t t = 0;
    int lift_w = leaves.ids[t++], lift_b = leaves.ids[t++];
    int h = tape.affine_pointwise(x, lift_w, lift_b);
    for (int l = 0; l < c.n_layers; ++l) {
        int spec_re = leaves.ids[t++], spec_im = leaves.ids[t++];
        int byp_w = leaves.ids[t++], byp_b = leaves.ids[t++];
        int spectral = c.spatial_dims == 1 ? tape.spectral_conv_1d(h, spec_re, spec_im)
                                           : tape.spectral_conv_2d(h, spec_re, spec_im);
        int bypass = tape.affine_pointwise(h, byp_w, byp_b);
        h = tape.add(spectral, bypass);
        if (l + 1 < c.n_layers) h = activation_node(tape, h, c.activation);
    }
    int proj1_w = leaves.ids[t++], proj1_b = leaves.ids[t++];
    h = tape.affine_pointwise(h, proj1_w, proj1_b);
    h = activation_node(tape, h, c.activation);
    int proj2_w = leaves.ids[t++], proj2_b = leaves.ids[t++];
    return tape.affine_pointwise(h, proj2_w, proj2_b);
}

double space_measure(const GridSpec& grid) {
    double m = grid.domain_length;
    if (grid.spatial_dims == 2) m *= grid.domain_length;
    return m;
}

/// Physics-informed loss on the tape; mirrors residuals::pi_loss exactly.
int pi_loss_on_tape(ad::Tape& tape, const PdeInstance& instance, int pred,
                    const residuals::PiWeights& pi) {
    const GridSpec& grid = instance.grid;
    double h = grid.spacing();
    double measure = residuals::residual_measure(instance);
    int n = grid.n_points;

    int residual_l2 = -1;
    switch (instance.kind) {
        case PdeKind::Advection: {
            int ut = tape.fd(pred, 0, 1, false, grid.dt_store());
            int ux = tape.fd(pred, 1, 1, true, h);
            int r = tape.add(ut, tape.scale(ux, instance.params.beta));
            residual_l2 = tape.mean_sq_scaled(r, measure);
            break;
        }
        case PdeKind::Burgers: {
            int ut = tape.fd(pred, 0, 1, false, grid.dt_store());
            int half_sq = tape.scale(tape.mul(pred, pred), 0.5);
            int flux = tape.fd(half_sq, 1, 1, true, h);
            int uxx = tape.fd(pred, 1, 2, true, h);
            int r = tape.add(tape.add(ut, flux),
                             tape.scale(uxx, -instance.params.nu / M_PI));
            residual_l2 = tape.mean_sq_scaled(r, measure);
            break;
        }
        case PdeKind::Darcy: {
            // Coefficient derivatives are constants of the graph.
            Field ax = residuals::fd_derivative(instance.input, residuals::FieldAxis::X, 1,
                                                residuals::Boundary::OneSided);
            Field ay = residuals::fd_derivative(instance.input, residuals::FieldAxis::Y, 1,
                                                residuals::Boundary::OneSided);
            auto as_tensor = [n](const Field& f) {
                Tensor t({1, n, n});
                t.data = f.values;
                return t;
            };
            int a_leaf = tape.leaf(as_tensor(instance.input));
            int ax_leaf = tape.leaf(as_tensor(ax));
            int ay_leaf = tape.leaf(as_tensor(ay));

            int ux = tape.fd(pred, 1, 1, false, h);
            int uy = tape.fd(pred, 2, 1, false, h);
            int uxx = tape.fd(pred, 1, 2, false, h);
            int uyy = tape.fd(pred, 2, 2, false, h);
            int div = tape.add(tape.add(tape.mul(ux, ax_leaf), tape.mul(uy, ay_leaf)),
                               tape.mul(tape.add(uxx, uyy), a_leaf));
            Tensor beta_const({1, n, n}, instance.params.beta);
            int r = tape.sub(tape.scale(div, -1.0), tape.leaf(std::move(beta_const)));

            std::vector<int64_t> interior, boundary;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    int64_t idx = static_cast<int64_t>(i) * n + j;
                    if (i == 0 || j == 0 || i == n - 1 || j == n - 1)
                        boundary.push_back(idx);
                    else
                        interior.push_back(idx);
                }
            }
            residual_l2 = tape.masked_mean_sq_scaled(r, interior, measure);
            if (pi.lambda != 0.0) {
                double perimeter = 4.0 * grid.domain_length;
                int btm = tape.masked_mean_sq_scaled(pred, std::move(boundary),
                                                     pi.lambda * perimeter);
                residual_l2 = tape.add(residual_l2, btm);
            }
            break;
        }
        case PdeKind::NavierStokes: {
            int wt = tape.fd(pred, 0, 1, false, grid.dt_store());
            int wx = tape.fd(pred, 1, 1, true, h);
            int wy = tape.fd(pred, 2, 1, true, h);
            int wxx = tape.fd(pred, 1, 2, true, h);
            int wyy = tape.fd(pred, 2, 2, true, h);
            int ux = tape.ns_velocity(pred, 0, grid.domain_length);
            int uy = tape.ns_velocity(pred, 1, grid.domain_length);
            int advect = tape.add(tape.mul(ux, wx), tape.mul(uy, wy));
            int lap = tape.scale(tape.add(wxx, wyy), -instance.params.nu);

            Field forcing = instance.params.forcing ? *instance.params.forcing
                                                    : pde::ns_default_forcing(grid);
            Tensor f_tiled(tape.value(pred).shape);
            int64_t plane = grid.spatial_size();
            for (int t = 0; t < grid.n_time; ++t)
                std::copy(forcing.values.begin(), forcing.values.end(),
                          f_tiled.data.begin() + static_cast<int64_t>(t) * plane);
            int r = tape.sub(tape.add(tape.add(wt, advect), lap),
                             tape.leaf(std::move(f_tiled)));
            residual_l2 = tape.mean_sq_scaled(r, measure);
            break;
        }
    }

    if (is_dynamic(instance.kind) && pi.mu != 0.0) {
        // (pred - A) restricted to frame 0 where A carries the input there.
        Tensor a_pad(tape.value(pred).shape, 0.0);
        std::copy(instance.input.values.begin(), instance.input.values.end(),
                  a_pad.data.begin());
        int diff = tape.sub(pred, tape.leaf(std::move(a_pad)));
        std::vector<int64_t> frame0(instance.grid.spatial_size());
        std::iota(frame0.begin(), frame0.end(), 0);
        int ic = tape.masked_mean_sq_scaled(diff, std::move(frame0),
                                            pi.mu * space_measure(instance.grid));
        residual_l2 = tape.add(residual_l2, ic);
    }
    return residual_l2;
}

/// Loss node for one sample under the given loss kind.
int sample_loss_on_tape(ad::Tape& tape, const ParamLeaves& leaves, const FnoParams& params,
                        const Dataset& dataset, int index, LossKind kind,
                        const residuals::PiWeights& pi) {
    const PdeInstance& instance = dataset.instances[index];
    int x = tape.leaf(encode_input(instance.kind, instance.input));
    int pred = forward_on_tape(tape, leaves, params, x);
    if (kind == LossKind::Physics) return pi_loss_on_tape(tape, instance, pred, pi);

    if (!dataset.has_label(index))
        throw MissingLabels("data loss requires a label for sample " + std::to_string(index));
    const Field& label = *dataset.labels[index];
    Tensor y(tape.value(pred).shape);
    if (static_cast<int64_t>(label.values.size()) != y.size())
        throw ShapeMismatch("data loss: label shape mismatch");
    y.data = label.values;
    int diff = tape.sub(pred, tape.leaf(std::move(y)));
    return tape.mean_sq_scaled(diff, residuals::residual_measure(instance));
}

}  // namespace

Field fno_forward(const FnoParams& params, const PdeInstance& instance) {
    ad::Tape tape;
    ParamLeaves leaves = push_params(tape, params);
    int x = tape.leaf(encode_input(instance.kind, instance.input));
    int out = forward_on_tape(tape, leaves, params, x);
    return decode_output(tape.value(out), instance.grid, instance.kind);
}

LossGrad loss_and_grad(const FnoParams& params, const Dataset& dataset,
                       const std::vector<int>& indices, const std::vector<double>& weights,
                       LossKind kind, const residuals::PiWeights& pi, int max_workers) {
    if (indices.empty()) throw ConfigError("loss_and_grad: empty batch");
    if (weights.size() != indices.size())
        throw ConfigError("loss_and_grad: weights/indices size mismatch");

    std::vector<double> losses(indices.size());
    std::vector<std::vector<double>> grads(indices.size());
    parallel_for(static_cast<int64_t>(indices.size()), max_workers, [&](int64_t i) {
        ad::Tape tape;
        ParamLeaves leaves = push_params(tape, params);
        int loss = sample_loss_on_tape(tape, leaves, params, dataset, indices[i], kind, pi);
        tape.backward(loss);
        losses[i] = tape.value(loss)[0];
        grads[i] = gather_grad(tape, leaves);
    });

    double weight_total = 0.0;
    for (double w : weights) weight_total += w;
    if (weight_total <= 0.0) throw ConfigError("loss_and_grad: weights must sum > 0");

    LossGrad out;
    out.grad.assign(params.parameter_count(), 0.0);
    for (size_t i = 0; i < indices.size(); ++i) {
        double scale = weights[i] / weight_total;
        out.loss += scale * losses[i];
        for (size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += scale * grads[i][j];
    }
    return out;
}

SampleScore score_sample(const FnoParams& params, const Dataset& dataset, int index,
                         LossKind kind, const residuals::PiWeights& pi) {
    ad::Tape tape;
    ParamLeaves leaves = push_params(tape, params);
    int loss = sample_loss_on_tape(tape, leaves, params, dataset, index, kind, pi);
    tape.backward(loss);
    SampleScore score;
    score.loss = tape.value(loss)[0];
    const Tensor& gw = tape.grad(leaves.proj2_w);
    const Tensor& gb = tape.grad(leaves.proj2_b);
    score.last_layer_grad.reserve(gw.size() + gb.size());
    score.last_layer_grad.insert(score.last_layer_grad.end(), gw.data.begin(), gw.data.end());
    score.last_layer_grad.insert(score.last_layer_grad.end(), gb.data.begin(), gb.data.end());
    return score;
}

coreset::FeatureMatrix per_sample_features(const FnoParams& params, const Dataset& dataset,
                                           const std::vector<int>& indices, LossKind kind,
                                           const residuals::PiWeights& pi, int max_workers) {
    int64_t n = static_cast<int64_t>(indices.size());
    int64_t d = params.last_layer_size();
    coreset::FeatureMatrix features;
    features.columns.resize(d, n);
    features.per_sample_loss.resize(n);
    features.source = kind == LossKind::Data ? coreset::FeatureSource::Data
                                             : coreset::FeatureSource::Physics;
    parallel_for(n, max_workers, [&](int64_t i) {
        SampleScore score = score_sample(params, dataset, indices[i], kind, pi);
        for (int64_t r = 0; r < d; ++r) features.columns(r, i) = score.last_layer_grad[r];
        features.per_sample_loss(i) = score.loss;
    });
    return features;
}

std::vector<double> last_layer_hvp(const FnoParams& params, const Dataset& dataset,
                                   const std::vector<int>& indices, LossKind kind,
                                   const residuals::PiWeights& pi,
                                   const std::vector<double>& direction, int max_workers) {
    int64_t d = params.last_layer_size();
    if (static_cast<int64_t>(direction.size()) != d)
        throw ShapeMismatch("last_layer_hvp: direction length mismatch");

    double dir_norm = 0.0;
    for (double v : direction) dir_norm += v * v;
    dir_norm = std::sqrt(dir_norm);
    if (dir_norm == 0.0) return std::vector<double>(d, 0.0);

    std::vector<double> flat = params.flatten();
    int64_t tail = static_cast<int64_t>(flat.size()) - d;
    double scale = 0.0;
    for (int64_t i = 0; i < d; ++i) scale = std::max(scale, std::fabs(flat[tail + i]));
    double eps = 1e-5 * (1.0 + scale) / dir_norm;

    auto mean_last_layer_grad = [&](const std::vector<double>& theta) {
        FnoParams perturbed = FnoParams::from_flat(params.config, theta);
        std::vector<double> mean(d, 0.0);
        std::vector<std::vector<double>> grads(indices.size());
        parallel_for(static_cast<int64_t>(indices.size()), max_workers, [&](int64_t i) {
            grads[i] = score_sample(perturbed, dataset, indices[i], kind, pi).last_layer_grad;
        });
        for (const auto& g : grads)
            for (int64_t r = 0; r < d; ++r) mean[r] += g[r];
        for (double& v : mean) v /= static_cast<double>(indices.size());
        return mean;
    };

    std::vector<double> plus = flat, minus = flat;
    for (int64_t i = 0; i < d; ++i) {
        plus[tail + i] += eps * direction[i];
        minus[tail + i] -= eps * direction[i];
    }
    std::vector<double> g_plus = mean_last_layer_grad(plus);
    std::vector<double> g_minus = mean_last_layer_grad(minus);
    std::vector<double> hvp(d);
    for (int64_t i = 0; i < d; ++i) hvp[i] = (g_plus[i] - g_minus[i]) / (2.0 * eps);
    return hvp;
}

void adam_step(std::vector<double>& params_flat, const std::vector<double>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    if (params_flat.size() != grads.size() || state.m.size() != params_flat.size() ||
        state.v.size() != params_flat.size())
        throw ShapeMismatch("adam_step: size mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params_flat.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        double m_hat = state.m[i] / bc1;
        double v_hat = state.v[i] / bc2;
        params_flat[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

std::vector<TrainRecord> train(FnoParams& params, const Dataset& dataset,
                               std::vector<int> indices, std::vector<double> weights,
                               const TrainOptions& opts) {
    if (indices.size() != weights.size()) throw ConfigError("train: indices/weights mismatch");
    if (opts.epochs < 0) throw ConfigError("train: negative epochs");
    std::vector<TrainRecord> records;
    if (opts.epochs == 0 || indices.empty()) return records;

    // Sort by index so a full-coverage selection reproduces full training.
    std::vector<size_t> order(indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return indices[a] < indices[b]; });
    std::vector<int> sorted_idx(indices.size());
    std::vector<double> sorted_w(indices.size());
    for (size_t i = 0; i < order.size(); ++i) {
        sorted_idx[i] = indices[order[i]];
        sorted_w[i] = weights[order[i]];
    }

    std::vector<double> flat = params.flatten();
    AdamState state = AdamState::zeros(static_cast<int64_t>(flat.size()));
    Rng shuffle_rng(opts.shuffle_seed);

    std::vector<int> positions(sorted_idx.size());
    std::iota(positions.begin(), positions.end(), 0);

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        auto start = Clock::now();
        double lr = opts.lr;
        if (opts.cosine_decay && opts.epochs > 1) {
            double phase = static_cast<double>(epoch) / (opts.epochs - 1);
            lr = opts.lr_min + 0.5 * (opts.lr - opts.lr_min) * (1.0 + std::cos(M_PI * phase));
        }

        shuffle_rng.shuffle(positions);
        double epoch_loss = 0.0, epoch_weight = 0.0;
        for (size_t begin = 0; begin < positions.size();
             begin += static_cast<size_t>(opts.batch_size)) {
            size_t end = std::min(positions.size(), begin + opts.batch_size);
            std::vector<int> batch_idx;
            std::vector<double> batch_w;
            for (size_t p = begin; p < end; ++p) {
                batch_idx.push_back(sorted_idx[positions[p]]);
                batch_w.push_back(sorted_w[positions[p]]);
            }
            LossGrad lg = loss_and_grad(params, dataset, batch_idx, batch_w, opts.loss_kind,
                                        opts.pi, opts.max_workers);
            double batch_weight = std::accumulate(batch_w.begin(), batch_w.end(), 0.0);
            epoch_loss += lg.loss * batch_weight;
            epoch_weight += batch_weight;
            adam_step(flat, lg.grad, state, lr);
            params.assign_flat(flat);
        }
        records.push_back({epoch, epoch_loss / epoch_weight, elapsed_seconds(start),
                           opts.loss_kind});
    }
    return records;
}

std::pair<double, Field> pi_loss_with_prediction_grad(const PdeInstance& instance,
                                                      const Field& prediction,
                                                      const residuals::PiWeights& pi) {
    int want_frames = is_dynamic(instance.kind) ? instance.grid.n_time : 1;
    if (prediction.frames != want_frames ||
        prediction.spatial_size() != instance.grid.spatial_size())
        throw ShapeMismatch("pi_loss_with_prediction_grad: prediction shape mismatch");

    ad::Tape tape;
    Tensor pred_tensor;
    if (instance.grid.spatial_dims == 1)
        pred_tensor = Tensor({prediction.frames, instance.grid.n_points});
    else
        pred_tensor = Tensor({prediction.frames, instance.grid.n_points,
                              instance.grid.n_points});
    pred_tensor.data = prediction.values;
    int pred = tape.leaf(std::move(pred_tensor));
    int loss = pi_loss_on_tape(tape, instance, pred, pi);
    tape.backward(loss);

    Field grad = prediction;
    grad.values = tape.grad(pred).data;
    return {tape.value(loss)[0], std::move(grad)};
}

double nrmse(const Field& prediction, const Field& truth) {
    if (prediction.values.size() != truth.values.size())
        throw ShapeMismatch("nrmse: shape mismatch");
    double denom = truth.sum_sq();
    if (denom == 0.0) throw ZeroReference("nrmse: reference field has zero norm");
    return sum_sq_diff(prediction, truth) / std::max(denom, 1e-12);
}

double mean_test_nrmse(const FnoParams& params, const Dataset& dataset,
                       const std::vector<int>& indices, int max_workers) {
    if (indices.empty()) throw ConfigError("mean_test_nrmse: empty index set");
    std::vector<double> values(indices.size());
    parallel_for(static_cast<int64_t>(indices.size()), max_workers, [&](int64_t i) {
        int idx = indices[i];
        if (!dataset.has_label(idx))
            throw MissingLabels("mean_test_nrmse: unlabeled sample");
        Field pred = fno_forward(params, dataset.instances[idx]);
        values[i] = nrmse(pred, *dataset.labels[idx]);
    });
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

}  // namespace picore::fno
