#include <doctest.h>

#include <cmath>
#include <complex>
#include <numeric>

#include "picore/fno.hpp"
#include "picore/rng.hpp"
#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

using namespace picore;
using namespace picore::fno;

namespace {

GridSpec grid_1d(int n, int n_time, double t_final = 1.0) {
    GridSpec g;
    g.spatial_dims = 1;
    g.n_points = n;
    g.n_time = n_time;
    g.t_final = t_final;
    return g;
}

PdeInstance tiny_advection(int n = 16, int n_time = 5) {
    PdeInstance instance;
    instance.kind = PdeKind::Advection;
    instance.params.beta = 1.0;
    instance.grid = grid_1d(n, n_time);
    instance.input = pde::sinusoidal_field(instance.grid, {0.9, 0.3}, {1, 2}, {0.4, 1.2});
    return instance;
}

Dataset tiny_dataset(int n_samples, int n = 16, int n_time = 5, bool with_labels = true) {
    Dataset dataset;
    GridSpec g = grid_1d(n, n_time);
    Rng rng(42);
    for (int i = 0; i < n_samples; ++i) {
        PdeInstance instance;
        instance.kind = PdeKind::Advection;
        instance.params.beta = 1.0;
        instance.grid = g;
        instance.input = pde::sample_sinusoidal_ic(100 + i, g, {1, 3}, {1, 4});
        dataset.instances.push_back(std::move(instance));
        if (with_labels) {
            Field label = Field::spacetime(g);
            for (double& v : label.values) v = rng.normal();
            dataset.labels.push_back(std::move(label));
        } else {
            dataset.labels.push_back(std::nullopt);
        }
    }
    return dataset;
}

/// Central-difference gradient on selected flat coordinates.
double fd_loss(const FnoConfig& config, std::vector<double> flat, const Dataset& dataset,
               const std::vector<int>& idx, const std::vector<double>& w, LossKind kind,
               const residuals::PiWeights& pi) {
    FnoParams p = FnoParams::from_flat(config, flat);
    // Loss only; gradient ignored.
    return loss_and_grad(p, dataset, idx, w, kind, pi).loss;
}

void check_gradient(const FnoConfig& config, const Dataset& dataset,
                    const std::vector<int>& idx, LossKind kind, uint64_t seed,
                    double tolerance = 1e-4) {
    FnoParams params = fno_init(config, seed);
    std::vector<double> weights(idx.size(), 1.0);
    residuals::PiWeights pi;
    LossGrad lg = loss_and_grad(params, dataset, idx, weights, kind, pi);

    std::vector<double> flat = params.flatten();
    double grad_max = 0.0;
    for (double g : lg.grad) grad_max = std::max(grad_max, std::fabs(g));

    Rng rng(seed + 1);
    for (int trial = 0; trial < 20; ++trial) {
        int64_t coord = rng.uniform_int(0, static_cast<int64_t>(flat.size()) - 1);
        double eps = 1e-6 * std::max(1.0, std::fabs(flat[coord]));
        std::vector<double> plus = flat, minus = flat;
        plus[coord] += eps;
        minus[coord] -= eps;
        double fd = (fd_loss(config, plus, dataset, idx, weights, kind, pi) -
                     fd_loss(config, minus, dataset, idx, weights, kind, pi)) /
                    (2.0 * eps);
        double ad = lg.grad[coord];
        // Floor at the central-difference oracle's own resolution so
        // near-zero coordinates are not judged against cancellation noise.
        double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-6 * grad_max, 1e-8});
        CHECK(std::fabs(ad - fd) / denom <= tolerance);
    }
}

}  // namespace

TEST_CASE("fno_init: deterministic, seeds differ, parameter count closed form") {
    FnoConfig config;
    config.modes = 16;
    config.width = 32;
    config.n_layers = 4;
    config.in_channels = 2;
    config.out_channels = 41;

    FnoParams a = fno_init(config, 7);
    FnoParams b = fno_init(config, 7);
    CHECK(a.flatten() == b.flatten());
    FnoParams c = fno_init(config, 8);
    CHECK(a.flatten() != c.flatten());

    // lift 32*2+32, 4 layers of (2*32*32*16 complex halves + 32*32+32),
    // projection (32*32+32) + (41*32+41).
    int64_t expect = (32 * 2 + 32) + 4 * (2 * 32 * 32 * 16 + 32 * 32 + 32) +
                     (32 * 32 + 32) + (41 * 32 + 41);
    CHECK(a.parameter_count() == expect);
    CHECK(static_cast<int64_t>(a.flatten().size()) == expect);
}

TEST_CASE("spectral layer equals the dense DFT-truncate-weight-inverse oracle") {
    const int n = 16, modes = 5;
    ad::Tape tape;
    Rng rng(3);

    ad::Tensor x({1, n});
    for (double& v : x.data) v = rng.normal();
    ad::Tensor w_re({1, 1, modes}), w_im({1, 1, modes});
    for (double& v : w_re.data) v = rng.normal();
    for (double& v : w_im.data) v = rng.normal();

    int xid = tape.leaf(x);
    int out = tape.spectral_conv_1d(xid, tape.leaf(w_re), tape.leaf(w_im));

    // Dense oracle: forward DFT, keep k < modes, multiply, unnormalized
    // inverse on the kept modes, real part / n.
    for (int j = 0; j < n; ++j) {
        std::complex<double> acc(0.0, 0.0);
        for (int k = 0; k < modes; ++k) {
            std::complex<double> xk(0.0, 0.0);
            for (int m = 0; m < n; ++m)
                xk += x.data[m] * std::exp(std::complex<double>(0, -2.0 * M_PI * m * k / n));
            std::complex<double> w(w_re.data[k], w_im.data[k]);
            acc += w * xk * std::exp(std::complex<double>(0, 2.0 * M_PI * j * k / n));
        }
        CHECK(tape.value(out)[j] == doctest::Approx(acc.real() / n).epsilon(1e-11));
    }
}

TEST_CASE("full network with identity maps reduces to the spectral layer") {
    const int n = 16;
    FnoConfig config;
    config.modes = 4;
    config.width = 1;
    config.n_layers = 1;
    config.in_channels = 1;
    config.out_channels = 1;
    config.activation = Activation::Identity;

    FnoParams p = fno_init(config, 1);
    p.lift_w.data = {1.0};
    p.lift_b.data = {0.0};
    p.layers[0].byp_w.data = {0.0};
    p.layers[0].byp_b.data = {0.0};
    p.proj1_w.data = {1.0};
    p.proj1_b.data = {0.0};
    p.proj2_w.data = {1.0};
    p.proj2_b.data = {0.0};

    ad::Tape tape;
    ad::Tensor x({1, n});
    Rng rng(5);
    for (double& v : x.data) v = rng.normal();
    int direct = tape.spectral_conv_1d(tape.leaf(x), tape.leaf(p.layers[0].spec_re),
                                       tape.leaf(p.layers[0].spec_im));

    // Same input through the full parameter stack.
    ad::Tape tape2;
    std::vector<int> ids;
    for (const ad::Tensor* t :
         {&p.lift_w, &p.lift_b, &p.layers[0].spec_re, &p.layers[0].spec_im,
          &p.layers[0].byp_w, &p.layers[0].byp_b, &p.proj1_w, &p.proj1_b, &p.proj2_w,
          &p.proj2_b})
        ids.push_back(tape2.leaf(*t));
    int h = tape2.affine_pointwise(tape2.leaf(x), ids[0], ids[1]);
    int spec = tape2.spectral_conv_1d(h, ids[2], ids[3]);
    int byp = tape2.affine_pointwise(h, ids[4], ids[5]);
    h = tape2.add(spec, byp);
    h = tape2.affine_pointwise(h, ids[6], ids[7]);
    h = tape2.affine_pointwise(h, ids[8], ids[9]);

    for (int j = 0; j < n; ++j)
        CHECK(tape2.value(h)[j] == doctest::Approx(tape.value(direct)[j]).epsilon(1e-13));
}

TEST_CASE("fno_forward: zero final projection gives identically zero output") {
    PdeInstance instance = tiny_advection();
    FnoConfig config = FnoConfig::for_task(instance.kind, instance.grid, 4, 6, 2);
    FnoParams params = fno_init(config, 2);
    for (double& v : params.proj2_w.data) v = 0.0;
    for (double& v : params.proj2_b.data) v = 0.0;
    Field out = fno_forward(params, instance);
    for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("fno_forward: parameters are resolution invariant") {
    FnoConfig config;
    config.modes = 4;
    config.width = 6;
    config.n_layers = 2;
    config.in_channels = 2;
    config.out_channels = 5;
    FnoParams params = fno_init(config, 9);

    PdeInstance coarse = tiny_advection(64, 5);
    PdeInstance fine = tiny_advection(128, 5);
    Field out_coarse = fno_forward(params, coarse);
    Field out_fine = fno_forward(params, fine);
    CHECK(out_coarse.grid.n_points == 64);
    CHECK(out_fine.grid.n_points == 128);

    // Same parameter vector runs at both; outputs on the shared subgrid are
    // not required to match (no exactness claim), only to exist and differ.
    bool any_differ = false;
    for (int j = 0; j < 64; ++j)
        if (out_coarse.frame(1)[j] != out_fine.frame(1)[2 * j]) any_differ = true;
    CHECK(any_differ);

    PdeInstance too_small = tiny_advection(6, 5);
    CHECK_THROWS_AS(fno_forward(params, too_small), ResolutionTooLow);
}

TEST_CASE("loss_and_grad: gradient matches central finite differences (1D)") {
    Dataset dataset = tiny_dataset(2, 16, 5);
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection,
                                           dataset.instances[0].grid, 4, 4, 2);
    std::vector<int> idx = {0, 1};
    SUBCASE("data loss") { check_gradient(config, dataset, idx, LossKind::Data, 11); }
    SUBCASE("physics loss") { check_gradient(config, dataset, idx, LossKind::Physics, 12); }
}

TEST_CASE("loss_and_grad: gradient matches finite differences (darcy)") {
    GridSpec g;
    g.spatial_dims = 2;
    g.n_points = 10;
    g.periodic = false;
    Dataset dataset;
    PdeInstance instance;
    instance.kind = PdeKind::Darcy;
    instance.params.beta = 1.0;
    instance.grid = g;
    instance.input = pde::sample_darcy_coefficient(3, g);
    dataset.instances.push_back(instance);
    Field label = Field::spatial(g);
    Rng rng(8);
    for (double& v : label.values) v = rng.normal();
    dataset.labels.push_back(label);

    FnoConfig config = FnoConfig::for_task(PdeKind::Darcy, g, 2, 3, 2);
    SUBCASE("data") { check_gradient(config, dataset, {0}, LossKind::Data, 13); }
    SUBCASE("physics") { check_gradient(config, dataset, {0}, LossKind::Physics, 14); }
}

TEST_CASE("loss_and_grad: gradient matches finite differences (navier-stokes)") {
    GridSpec g;
    g.spatial_dims = 2;
    g.n_points = 8;
    g.n_time = 3;
    g.t_final = 0.3;
    Dataset dataset;
    PdeInstance instance;
    instance.kind = PdeKind::NavierStokes;
    instance.params.nu = 1e-2;
    instance.grid = g;
    instance.input = pde::sample_ns_vorticity(5, g);
    dataset.instances.push_back(instance);
    dataset.labels.push_back(std::nullopt);

    FnoConfig config = FnoConfig::for_task(PdeKind::NavierStokes, g, 2, 3, 2);
    check_gradient(config, dataset, {0}, LossKind::Physics, 15);
}

TEST_CASE("loss_and_grad: exact prediction gives zero data loss and gradient") {
    Dataset dataset = tiny_dataset(1, 16, 5);
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, dataset.instances[0].grid,
                                           4, 4, 2);
    FnoParams params = fno_init(config, 3);
    // Make the label equal the network output.
    dataset.labels[0] = fno_forward(params, dataset.instances[0]);
    residuals::PiWeights pi;
    LossGrad lg = loss_and_grad(params, dataset, {0}, {1.0}, LossKind::Data, pi);
    CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-18));
    for (double g : lg.grad) CHECK(std::fabs(g) <= 1e-12);
}

TEST_CASE("loss_and_grad: weight normalization and scale invariance") {
    Dataset dataset = tiny_dataset(3, 16, 5);
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, dataset.instances[0].grid,
                                           4, 4, 2);
    FnoParams params = fno_init(config, 21);
    residuals::PiWeights pi;
    std::vector<int> idx = {0, 1, 2};

    LossGrad equal = loss_and_grad(params, dataset, idx, {1.0, 1.0, 1.0}, LossKind::Data, pi);
    LossGrad scaled = loss_and_grad(params, dataset, idx, {5.0, 5.0, 5.0}, LossKind::Data, pi);
    CHECK(equal.loss == doctest::Approx(scaled.loss).epsilon(1e-14));
    for (size_t i = 0; i < equal.grad.size(); ++i)
        CHECK(equal.grad[i] == doctest::Approx(scaled.grad[i]).epsilon(1e-12));

    // Equal weights match the unweighted mean of per-sample losses.
    double mean = 0.0;
    for (int i : idx)
        mean += loss_and_grad(params, dataset, {i}, {1.0}, LossKind::Data, pi).loss;
    CHECK(equal.loss == doctest::Approx(mean / 3.0).epsilon(1e-13));
}

TEST_CASE("loss_and_grad: data mode without labels raises MissingLabels") {
    Dataset dataset = tiny_dataset(1, 16, 5, false);
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, dataset.instances[0].grid,
                                           4, 4, 2);
    FnoParams params = fno_init(config, 4);
    residuals::PiWeights pi;
    CHECK_THROWS_AS(loss_and_grad(params, dataset, {0}, {1.0}, LossKind::Data, pi),
                    MissingLabels);
}

TEST_CASE("adam_step: zero gradient fixed point, first-step magnitude, determinism") {
    std::vector<double> params = {1.0, -2.0, 0.5};
    AdamState state = AdamState::zeros(3);
    adam_step(params, {0.0, 0.0, 0.0}, state, 1e-3);
    CHECK(params == std::vector<double>{1.0, -2.0, 0.5});

    // First step with a constant gradient moves each coordinate by ~lr.
    std::vector<double> p2 = {1.0, -2.0, 0.5};
    AdamState s2 = AdamState::zeros(3);
    adam_step(p2, {0.3, -4.0, 1e5}, s2, 1e-3);
    CHECK(p2[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(p2[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
    CHECK(p2[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));

    // Identical runs, identical trajectories.
    std::vector<double> a = {0.1, 0.2}, b = {0.1, 0.2};
    AdamState sa = AdamState::zeros(2), sb = AdamState::zeros(2);
    Rng rng(17);
    for (int step = 0; step < 25; ++step) {
        std::vector<double> g = {rng.normal(), rng.normal()};
        adam_step(a, g, sa, 3e-3);
        adam_step(b, g, sb, 3e-3);
    }
    CHECK(a == b);
}

TEST_CASE("train: zero epochs is a no-op; full selection reproduces full training") {
    Dataset dataset = tiny_dataset(8, 16, 5);
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, dataset.instances[0].grid,
                                           4, 4, 2);
    TrainOptions opts;
    opts.epochs = 0;
    FnoParams params = fno_init(config, 5);
    std::vector<double> before = params.flatten();
    auto records = train(params, dataset, {0, 1, 2}, {1.0, 1.0, 1.0}, opts);
    CHECK(records.empty());
    CHECK(params.flatten() == before);

    // A permuted full-coverage selection with unit weights trains identically
    // to the natural order under the same shuffle seed.
    opts.epochs = 4;
    opts.shuffle_seed = 77;
    std::vector<int> natural = {0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> permuted = {5, 3, 7, 1, 0, 6, 2, 4};
    FnoParams pa = fno_init(config, 5);
    FnoParams pb = fno_init(config, 5);
    auto ra = train(pa, dataset, natural, std::vector<double>(8, 1.0), opts);
    auto rb = train(pb, dataset, permuted, std::vector<double>(8, 1.0), opts);
    CHECK(pa.flatten() == pb.flatten());
    for (size_t e = 0; e < ra.size(); ++e) CHECK(ra[e].loss == rb[e].loss);
}

TEST_CASE("train: fits a small advection dataset to NRMSE < 0.1") {
    // Desk-scale smoke oracle: 32 labeled samples, 200 epochs.
    GridSpec g = grid_1d(32, 11, 1.0);
    Dataset dataset;
    for (int i = 0; i < 32; ++i) {
        PdeInstance instance;
        instance.kind = PdeKind::Advection;
        instance.params.beta = 1.0;
        instance.grid = g;
        instance.input = pde::sample_sinusoidal_ic(500 + i, g, {1, 3}, {1, 4});
        LabeledSample solved = pde::solve_advection(instance);
        dataset.instances.push_back(std::move(instance));
        dataset.labels.push_back(std::move(solved.solution));
    }
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, g, 12, 16, 4);
    FnoParams params = fno_init(config, 1);
    TrainOptions opts;
    opts.epochs = 200;
    opts.shuffle_seed = 2;
    opts.max_workers = 0;
    std::vector<int> idx(32);
    std::iota(idx.begin(), idx.end(), 0);
    auto records = train(params, dataset, idx, std::vector<double>(32, 1.0), opts);
    CHECK_FALSE(records.empty());

    double train_nrmse = mean_test_nrmse(params, dataset, idx, 0);
    CHECK(train_nrmse < 0.1);
}

TEST_CASE("per_sample_features: duplicates, batch consistency, column mean") {
    Dataset dataset = tiny_dataset(4, 16, 5);
    dataset.instances[3] = dataset.instances[0];  // duplicate
    dataset.labels[3] = dataset.labels[0];
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, dataset.instances[0].grid,
                                           4, 4, 2);
    FnoParams params = fno_init(config, 6);
    residuals::PiWeights pi;
    std::vector<int> idx = {0, 1, 2, 3};
    auto features = per_sample_features(params, dataset, idx, LossKind::Physics, pi);

    CHECK(features.columns.col(0).isApprox(features.columns.col(3), 1e-14));

    // Column i equals the last-layer block of the single-sample gradient.
    LossGrad lg = loss_and_grad(params, dataset, {1}, {1.0}, LossKind::Physics, pi);
    int64_t d = params.last_layer_size();
    int64_t tail = static_cast<int64_t>(lg.grad.size()) - d;
    for (int64_t r = 0; r < d; ++r)
        CHECK(features.columns(r, 1) == doctest::Approx(lg.grad[tail + r]).epsilon(1e-12));
    CHECK(features.per_sample_loss(1) == doctest::Approx(lg.loss).epsilon(1e-13));

    // Mean of columns equals the full-batch last-layer gradient.
    LossGrad full = loss_and_grad(params, dataset, idx, std::vector<double>(4, 1.0),
                                  LossKind::Physics, pi);
    Eigen::VectorXd mean = features.columns.rowwise().mean();
    for (int64_t r = 0; r < d; ++r)
        CHECK(std::fabs(mean(r) - full.grad[tail + r]) <= 1e-10);
}

TEST_CASE("last_layer_hvp: additive in the direction on a quadratic loss") {
    Dataset dataset = tiny_dataset(2, 16, 5);
    FnoConfig config = FnoConfig::for_task(PdeKind::Advection, dataset.instances[0].grid,
                                           4, 4, 2);
    FnoParams params = fno_init(config, 30);
    residuals::PiWeights pi;
    std::vector<int> idx = {0, 1};
    int64_t d = params.last_layer_size();

    Rng rng(31);
    std::vector<double> v1(d), v2(d), sum(d);
    for (int64_t i = 0; i < d; ++i) {
        v1[i] = rng.normal();
        v2[i] = rng.normal();
        sum[i] = v1[i] + v2[i];
    }
    auto h1 = last_layer_hvp(params, dataset, idx, LossKind::Data, pi, v1);
    auto h2 = last_layer_hvp(params, dataset, idx, LossKind::Data, pi, v2);
    auto hs = last_layer_hvp(params, dataset, idx, LossKind::Data, pi, sum);
    double scale = 0.0;
    for (int64_t i = 0; i < d; ++i) scale = std::max(scale, std::fabs(hs[i]));
    for (int64_t i = 0; i < d; ++i)
        CHECK(std::fabs(h1[i] + h2[i] - hs[i]) <= 1e-5 * std::max(scale, 1.0));
}

TEST_CASE("pi_loss gradient w.r.t. prediction matches finite differences at 1e-5") {
    // Also ties the tape evaluation to the plain residuals module: the value
    // must match residuals::pi_loss exactly, the gradient its central FD.
    std::vector<PdeInstance> instances;
    instances.push_back(tiny_advection(16, 5));
    {
        PdeInstance burgers;
        burgers.kind = PdeKind::Burgers;
        burgers.params.nu = 0.05;
        burgers.grid = grid_1d(16, 5);
        burgers.input = pde::sinusoidal_field(burgers.grid, {0.7}, {2}, {0.9});
        instances.push_back(std::move(burgers));
    }
    {
        GridSpec g;
        g.spatial_dims = 2;
        g.n_points = 8;
        g.periodic = false;
        PdeInstance darcy;
        darcy.kind = PdeKind::Darcy;
        darcy.params.beta = 1.0;
        darcy.grid = g;
        darcy.input = pde::sample_darcy_coefficient(2, g);
        instances.push_back(std::move(darcy));
    }
    {
        GridSpec g;
        g.spatial_dims = 2;
        g.n_points = 8;
        g.n_time = 3;
        g.t_final = 0.3;
        PdeInstance ns;
        ns.kind = PdeKind::NavierStokes;
        ns.params.nu = 1e-2;
        ns.grid = g;
        ns.input = pde::sample_ns_vorticity(4, g);
        instances.push_back(std::move(ns));
    }

    residuals::PiWeights pi{0.7, 1.3};
    Rng rng(77);
    for (const PdeInstance& instance : instances) {
        // Smooth band-limited predictions keep the loss at a scale where the
        // central-difference oracle retains ~1e-9 absolute resolution; white
        // noise through the 1/h^2 stencils would drown the FD comparison.
        Field pred;
        pred.grid = instance.grid;
        pred.frames = is_dynamic(instance.kind) ? instance.grid.n_time : 1;
        pred.values.resize(static_cast<int64_t>(pred.frames) * pred.spatial_size());
        double a1 = rng.uniform(0.2, 0.6), a2 = rng.uniform(0.2, 0.6);
        double p1 = rng.uniform(0.0, 2.0 * M_PI), p2 = rng.uniform(0.0, 2.0 * M_PI);
        const GridSpec& g = instance.grid;
        for (int t = 0; t < pred.frames; ++t) {
            double* frame = pred.frame(t);
            for (int i = 0; i < g.n_points; ++i) {
                double x = g.coord(i);
                if (g.spatial_dims == 1) {
                    frame[i] = a1 * std::sin(2.0 * M_PI * x + p1 + 0.3 * t) +
                               a2 * std::sin(4.0 * M_PI * x + p2 - 0.2 * t);
                } else {
                    for (int j = 0; j < g.n_points; ++j) {
                        double y = g.coord(j);
                        frame[static_cast<int64_t>(i) * g.n_points + j] =
                            a1 * std::sin(2.0 * M_PI * x + p1 + 0.3 * t) +
                            a2 * std::cos(2.0 * M_PI * y + p2 - 0.2 * t);
                    }
                }
            }
        }

        auto [value, grad] = pi_loss_with_prediction_grad(instance, pred, pi);
        double plain = residuals::pi_loss(instance, pred, pi);
        CHECK(value == doctest::Approx(plain).epsilon(1e-13));

        double grad_max = 0.0;
        for (double g : grad.values) grad_max = std::max(grad_max, std::fabs(g));
        for (int trial = 0; trial < 20; ++trial) {
            int64_t coord = rng.uniform_int(0, pred.size() - 1);
            // The losses are at most quartic in the prediction, so a larger
            // step trades negligible truncation for much less roundoff.
            double eps = 1e-4 * std::max(1.0, std::fabs(pred.values[coord]));
            Field plus = pred, minus = pred;
            plus.values[coord] += eps;
            minus.values[coord] -= eps;
            double fd = (residuals::pi_loss(instance, plus, pi) -
                         residuals::pi_loss(instance, minus, pi)) /
                        (2.0 * eps);
            double ad = grad.values[coord];
            double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-6 * grad_max, 1e-8});
            CHECK(std::fabs(ad - fd) / denom <= 1e-5);
        }
    }
}

TEST_CASE("feature matrix validation rejects non-finite entries") {
    coreset::FeatureMatrix f;
    f.columns = Eigen::MatrixXd::Ones(2, 3);
    f.per_sample_loss = Eigen::VectorXd::Zero(3);
    f.validate();
    f.columns(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("nrmse: fixed points and scale invariance") {
    GridSpec g = grid_1d(16, 3);
    Field truth = Field::spacetime(g);
    Rng rng(40);
    for (double& v : truth.values) v = rng.normal();

    CHECK(nrmse(truth, truth) == 0.0);

    Field zero = Field::spacetime(g);
    CHECK(nrmse(zero, truth) == doctest::Approx(1.0).epsilon(1e-15));

    Field twice = truth;
    for (double& v : twice.values) v *= 2.0;
    CHECK(nrmse(twice, truth) == doctest::Approx(1.0).epsilon(1e-15));

    // nrmse(alpha u, alpha u_ref) = nrmse(u, u_ref).
    Field pred = truth;
    for (double& v : pred.values) v += 0.1;
    double base = nrmse(pred, truth);
    Field pred_scaled = pred, truth_scaled = truth;
    for (double& v : pred_scaled.values) v *= -3.0;
    for (double& v : truth_scaled.values) v *= -3.0;
    CHECK(nrmse(pred_scaled, truth_scaled) == doctest::Approx(base).epsilon(1e-13));

    CHECK_THROWS_AS(nrmse(zero, zero), ZeroReference);
}
