#include "picore/solvers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <complex>
#include <cstdlib>
#include <future>
#include <thread>

#include "picore/fft.hpp"
#include "picore/sampling.hpp"

namespace picore::pde {

namespace {

using Complex = std::complex<double>;
using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

LabeledSample solve_advection(const PdeInstance& instance) {
    instance.validate();
    if (instance.kind != PdeKind::Advection) throw ConfigError("solve_advection: wrong kind");
    auto start = Clock::now();

    const GridSpec& grid = instance.grid;
    int n = grid.n_points;
    double beta = instance.params.beta;
    double length = grid.domain_length;

    auto spectrum = fft::forward_real_1d(instance.input.values.data(), n);

    Field solution = Field::spacetime(grid);
    std::copy(instance.input.values.begin(), instance.input.values.end(), solution.frame(0));

    std::vector<Complex> shifted(n);
    for (int m = 1; m < grid.n_time; ++m) {
        double t = m * grid.dt_store();
        for (int k = 0; k < n; ++k) {
            double angle = -2.0 * M_PI * fft::freq(k, n) * beta * t / length;
            shifted[k] = spectrum[k] * Complex(std::cos(angle), std::sin(angle));
        }
        auto frame = fft::inverse_to_real_1d(shifted.data(), n);
        std::copy(frame.begin(), frame.end(), solution.frame(m));
    }

    return {instance, std::move(solution), elapsed_seconds(start)};
}

namespace {

/// Burgers nonlinear term in spectral space: -d/dx (u^2 / 2), 2/3 dealiased.
struct BurgersNonlinear {
    int n;
    double length;
    std::vector<double> kappa;      // 2 pi f / L
    std::vector<char> keep;         // 2/3 dealias mask

    explicit BurgersNonlinear(int n_, double length_) : n(n_), length(length_) {
        kappa.resize(n);
        keep.resize(n);
        for (int k = 0; k < n; ++k) {
            int f = fft::freq(k, n);
            kappa[k] = 2.0 * M_PI * f / length;
            keep[k] = std::abs(f) <= n / 3 ? 1 : 0;
        }
    }

    /// Also reports max|u| of the dealiased physical field for the CFL guard.
    void eval(const std::vector<Complex>& u_hat, std::vector<Complex>& out,
              double* max_abs_u) const {
        std::vector<Complex> masked(n);
        for (int k = 0; k < n; ++k) masked[k] = keep[k] ? u_hat[k] : 0.0;
        auto u = fft::inverse_to_real_1d(masked.data(), n);
        double max_abs = 0.0;
        for (double& v : u) {
            max_abs = std::max(max_abs, std::fabs(v));
            v = 0.5 * v * v;
        }
        if (max_abs_u) *max_abs_u = max_abs;
        auto w_hat = fft::forward_real_1d(u.data(), n);
        for (int k = 0; k < n; ++k)
            out[k] = keep[k] ? Complex(0.0, -kappa[k]) * w_hat[k] : 0.0;
    }
};

}  // namespace

LabeledSample solve_burgers(const PdeInstance& instance, int n_substeps) {
    instance.validate();
    if (instance.kind != PdeKind::Burgers) throw ConfigError("solve_burgers: wrong kind");
    auto start = Clock::now();

    const GridSpec& grid = instance.grid;
    int n = grid.n_points;
    double h = grid.spacing();
    double dt_store = grid.dt_store();
    double diffusivity = instance.params.nu / M_PI;

    if (n_substeps <= 0) {
        double max_u0 = 0.0;
        for (double v : instance.input.values) max_u0 = std::max(max_u0, std::fabs(v));
        n_substeps = std::max(4, static_cast<int>(std::ceil(3.0 * max_u0 * dt_store / h)));
    }
    double dt = dt_store / n_substeps;

    BurgersNonlinear nonlinear(n, grid.domain_length);
    std::vector<double> half_decay(n), full_decay(n);
    for (int k = 0; k < n; ++k) {
        double lambda = diffusivity * nonlinear.kappa[k] * nonlinear.kappa[k];
        half_decay[k] = std::exp(-lambda * dt / 2.0);
        full_decay[k] = half_decay[k] * half_decay[k];
    }

    auto u_hat = fft::forward_real_1d(instance.input.values.data(), n);
    Field solution = Field::spacetime(grid);
    std::copy(instance.input.values.begin(), instance.input.values.end(), solution.frame(0));

    std::vector<Complex> k1(n), k2(n), k3(n), k4(n), stage(n);
    for (int m = 1; m < grid.n_time; ++m) {
        for (int step = 0; step < n_substeps; ++step) {
            double max_u = 0.0;
            nonlinear.eval(u_hat, k1, &max_u);
            if (!std::isfinite(max_u)) throw NonFiniteState("solve_burgers: state blew up");
            if (max_u * dt / h > 1.0)
                throw CflViolation("solve_burgers: max|u| dt / h = " +
                                   std::to_string(max_u * dt / h));

            // Integrating-factor RK4: diffusion exact, RK4 on the advection term.
            for (int k = 0; k < n; ++k)
                stage[k] = half_decay[k] * (u_hat[k] + 0.5 * dt * k1[k]);
            nonlinear.eval(stage, k2, nullptr);
            for (int k = 0; k < n; ++k)
                stage[k] = half_decay[k] * u_hat[k] + 0.5 * dt * k2[k];
            nonlinear.eval(stage, k3, nullptr);
            for (int k = 0; k < n; ++k)
                stage[k] = full_decay[k] * u_hat[k] + dt * half_decay[k] * k3[k];
            nonlinear.eval(stage, k4, nullptr);
            for (int k = 0; k < n; ++k) {
                u_hat[k] = full_decay[k] * u_hat[k] +
                           dt / 6.0 *
                               (full_decay[k] * k1[k] +
                                2.0 * half_decay[k] * (k2[k] + k3[k]) + k4[k]);
            }
        }
        auto frame = fft::inverse_to_real_1d(u_hat.data(), n);
        for (double v : frame)
            if (!std::isfinite(v)) throw NonFiniteState("solve_burgers: non-finite frame");
        std::copy(frame.begin(), frame.end(), solution.frame(m));
    }

    return {instance, std::move(solution), elapsed_seconds(start)};
}

namespace {

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

}  // namespace

Field darcy_flux_residual(const PdeInstance& instance, const Field& u) {
    const GridSpec& grid = instance.grid;
    int n = grid.n_points;
    double h = grid.spacing();
    const Field& a = instance.input;
    Field r = Field::spatial(grid);
    for (int i = 1; i < n - 1; ++i) {
        for (int j = 1; j < n - 1; ++j) {
            double aw = harmonic_mean(a.at2(i, j), a.at2(i - 1, j));
            double ae = harmonic_mean(a.at2(i, j), a.at2(i + 1, j));
            double as = harmonic_mean(a.at2(i, j), a.at2(i, j - 1));
            double an = harmonic_mean(a.at2(i, j), a.at2(i, j + 1));
            double flux = aw * (u.at2(i - 1, j) - u.at2(i, j)) +
                          ae * (u.at2(i + 1, j) - u.at2(i, j)) +
                          as * (u.at2(i, j - 1) - u.at2(i, j)) +
                          an * (u.at2(i, j + 1) - u.at2(i, j));
            r.at2(i, j) = flux / (h * h) + instance.params.beta;
        }
    }
    return r;
}

LabeledSample solve_darcy(const PdeInstance& instance, double tol, int64_t max_iters) {
    instance.validate();
    if (instance.kind != PdeKind::Darcy) throw ConfigError("solve_darcy: wrong kind");
    auto start = Clock::now();

    const GridSpec& grid = instance.grid;
    int n = grid.n_points;
    double h = grid.spacing();
    double beta = instance.params.beta;
    const Field& a = instance.input;

    double a_max = *std::max_element(a.values.begin(), a.values.end());
    double dt = 0.9 * h * h / (4.0 * a_max);

    // ||beta|| over the interior; the convergence test divides by it.
    double interior_nodes = static_cast<double>(n - 2) * (n - 2);
    double beta_norm = std::fabs(beta) * std::sqrt(interior_nodes);

    Field u = Field::spatial(grid);
    Field residual = Field::spatial(grid);
    for (int64_t it = 0; it < max_iters; ++it) {
        residual = darcy_flux_residual(instance, u);
        double update_sq = 0.0;
        for (int i = 1; i < n - 1; ++i) {
            for (int j = 1; j < n - 1; ++j) {
                double d = dt * residual.at2(i, j);
                u.at2(i, j) += d;
                update_sq += d * d;
            }
        }
        double rel = std::sqrt(update_sq) / (dt * std::max(beta_norm, 1e-300));
        if (beta == 0.0) rel = std::sqrt(update_sq) / dt;
        if (!std::isfinite(rel)) throw NonFiniteState("solve_darcy: diverged");
        if (rel < tol) {
            return {instance, std::move(u), elapsed_seconds(start)};
        }
    }
    throw NoConvergence("solve_darcy: no convergence after " + std::to_string(max_iters) +
                        " iterations");
}

namespace {

/// Periodic spectral machinery for the vorticity equation.
struct NsSpectral {
    int n;
    std::vector<double> kx, ky, k_sq, inv_k_sq;
    std::vector<char> keep;

    NsSpectral(int n_, double length) : n(n_) {
        size_t total = static_cast<size_t>(n) * n;
        kx.resize(total);
        ky.resize(total);
        k_sq.resize(total);
        inv_k_sq.resize(total);
        keep.resize(total);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                size_t idx = static_cast<size_t>(i) * n + j;
                int f0 = fft::freq(i, n);
                int f1 = fft::freq(j, n);
                kx[idx] = 2.0 * M_PI * f0 / length;
                ky[idx] = 2.0 * M_PI * f1 / length;
                k_sq[idx] = kx[idx] * kx[idx] + ky[idx] * ky[idx];
                inv_k_sq[idx] = (f0 == 0 && f1 == 0) ? 0.0 : 1.0 / k_sq[idx];
                keep[idx] = (std::abs(f0) <= n / 3 && std::abs(f1) <= n / 3) ? 1 : 0;
            }
        }
    }

    std::vector<double> to_physical_masked(const std::vector<Complex>& spec) const {
        std::vector<Complex> masked(spec.size());
        for (size_t i = 0; i < spec.size(); ++i) masked[i] = keep[i] ? spec[i] : 0.0;
        return fft::inverse_to_real_2d(masked.data(), n, n);
    }

    /// Spectral advection term u . grad(omega), dealiased; max_abs_u reported
    /// for stability monitoring.
    void advection(const std::vector<Complex>& w_hat, std::vector<Complex>& out,
                   double* max_abs_u) const {
        size_t total = w_hat.size();
        std::vector<Complex> tmp(total);

        auto physical = [&](auto multiplier) {
            for (size_t i = 0; i < total; ++i) tmp[i] = multiplier(i) * w_hat[i];
            return to_physical_masked(tmp);
        };
        auto ux = physical([&](size_t i) { return Complex(0.0, ky[i] * inv_k_sq[i]); });
        auto uy = physical([&](size_t i) { return Complex(0.0, -kx[i] * inv_k_sq[i]); });
        auto wx = physical([&](size_t i) { return Complex(0.0, kx[i]); });
        auto wy = physical([&](size_t i) { return Complex(0.0, ky[i]); });

        double max_u = 0.0;
        std::vector<double> product(total);
        for (size_t i = 0; i < total; ++i) {
            max_u = std::max(max_u, std::max(std::fabs(ux[i]), std::fabs(uy[i])));
            product[i] = ux[i] * wx[i] + uy[i] * wy[i];
        }
        if (max_abs_u) *max_abs_u = max_u;

        auto prod_hat = fft::forward_real_2d(product.data(), n, n);
        for (size_t i = 0; i < total; ++i) out[i] = keep[i] ? prod_hat[i] : 0.0;
    }
};

}  // namespace

LabeledSample solve_navier_stokes(const PdeInstance& instance, int n_substeps) {
    instance.validate();
    if (instance.kind != PdeKind::NavierStokes)
        throw ConfigError("solve_navier_stokes: wrong kind");
    auto start = Clock::now();

    const GridSpec& grid = instance.grid;
    int n = grid.n_points;
    size_t total = static_cast<size_t>(n) * n;
    double nu = instance.params.nu;
    double dt_store = grid.dt_store();
    double h = grid.spacing();

    NsSpectral spectral(n, grid.domain_length);

    Field forcing = instance.params.forcing ? *instance.params.forcing
                                            : ns_default_forcing(grid);
    if (forcing.spatial_size() != grid.spatial_size())
        throw ShapeMismatch("solve_navier_stokes: forcing shape mismatch");
    auto f_hat = fft::forward_real_2d(forcing.values.data(), n, n);

    auto w_hat = fft::forward_real_2d(instance.input.values.data(), n, n);

    if (n_substeps <= 0) {
        std::vector<Complex> adv(total);
        double max_u = 0.0;
        spectral.advection(w_hat, adv, &max_u);
        n_substeps = std::max(4, static_cast<int>(std::ceil(6.0 * std::max(max_u, 0.5) *
                                                            dt_store / h)));
    }
    double dt = dt_store / n_substeps;

    Field solution = Field::spacetime(grid);
    std::copy(instance.input.values.begin(), instance.input.values.end(), solution.frame(0));

    std::vector<Complex> adv(total), w_mid(total);
    for (int m = 1; m < grid.n_time; ++m) {
        for (int step = 0; step < n_substeps; ++step) {
            double max_u = 0.0;
            spectral.advection(w_hat, adv, &max_u);
            if (!std::isfinite(max_u))
                throw NonFiniteState("solve_navier_stokes: state blew up");

            // Midpoint predictor (CN over dt/2, explicit advection) ...
            for (size_t i = 0; i < total; ++i) {
                double z = 0.25 * dt * nu * spectral.k_sq[i];
                w_mid[i] = ((1.0 - z) * w_hat[i] + 0.5 * dt * (f_hat[i] - adv[i])) / (1.0 + z);
            }
            // ... then the full Crank-Nicolson step with midpoint advection.
            spectral.advection(w_mid, adv, nullptr);
            for (size_t i = 0; i < total; ++i) {
                double z = 0.5 * dt * nu * spectral.k_sq[i];
                w_hat[i] = ((1.0 - z) * w_hat[i] + dt * (f_hat[i] - adv[i])) / (1.0 + z);
            }
        }
        auto frame = fft::inverse_to_real_2d(w_hat.data(), n, n);
        for (double v : frame)
            if (!std::isfinite(v)) throw NonFiniteState("solve_navier_stokes: non-finite frame");
        std::copy(frame.begin(), frame.end(), solution.frame(m));
    }

    return {instance, std::move(solution), elapsed_seconds(start)};
}

LabeledSample solve(const PdeInstance& instance) {
    switch (instance.kind) {
        case PdeKind::Advection: return solve_advection(instance);
        case PdeKind::Burgers: return solve_burgers(instance);
        case PdeKind::Darcy: return solve_darcy(instance);
        case PdeKind::NavierStokes: return solve_navier_stokes(instance);
    }
    throw ConfigError("solve: unknown kind");
}

Field downsample(const Field& field, int factor) {
    if (factor < 1) throw NonDivisibleFactor("downsample: factor must be >= 1");
    if (field.grid.n_points % factor != 0)
        throw NonDivisibleFactor("downsample: factor does not divide n_points");
    if (factor == 1) return field;

    GridSpec coarse = field.grid;
    coarse.n_points = field.grid.n_points / factor;

    Field out;
    out.grid = coarse;
    out.frames = field.frames;
    out.values.reserve(static_cast<int64_t>(field.frames) * coarse.spatial_size());

    int n = field.grid.n_points;
    for (int t = 0; t < field.frames; ++t) {
        const double* src = field.frame(t);
        if (field.grid.spatial_dims == 1) {
            for (int j = 0; j < n; j += factor) out.values.push_back(src[j]);
        } else {
            for (int i = 0; i < n; i += factor)
                for (int j = 0; j < n; j += factor)
                    out.values.push_back(src[static_cast<int64_t>(i) * n + j]);
        }
    }
    return out;
}

std::vector<double> ns_velocity_component(const std::vector<double>& omega, int n,
                                          double domain_length, int component,
                                          bool adjoint) {
    if (static_cast<int64_t>(omega.size()) != static_cast<int64_t>(n) * n)
        throw ShapeMismatch("ns_velocity_component: size mismatch");
    auto spec = fft::forward_real_2d(omega.data(), n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            size_t idx = static_cast<size_t>(i) * n + j;
            int f0 = fft::freq(i, n);
            int f1 = fft::freq(j, n);
            if (f0 == 0 && f1 == 0) {
                spec[idx] = 0.0;
                continue;
            }
            double kx = 2.0 * M_PI * f0 / domain_length;
            double ky = 2.0 * M_PI * f1 / domain_length;
            double inv = 1.0 / (kx * kx + ky * ky);
            Complex mult = (component == 0) ? Complex(0.0, ky * inv)
                                            : Complex(0.0, -kx * inv);
            if (adjoint) mult = std::conj(mult);
            spec[idx] *= mult;
        }
    }
    return fft::inverse_to_real_2d(spec.data(), n, n);
}

int resolve_worker_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("PICORE_NUM_WORKERS")) {
        int parsed = std::atoi(env);
        if (parsed > 0) return parsed;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<LabeledSample> solve_many(const std::vector<PdeInstance>& instances,
                                      int max_workers) {
    int workers = std::min<int64_t>(resolve_worker_count(max_workers),
                                    static_cast<int64_t>(instances.size()));
    std::vector<LabeledSample> results(instances.size());
    if (workers <= 1) {
        for (size_t i = 0; i < instances.size(); ++i) results[i] = solve(instances[i]);
        return results;
    }

    std::atomic<size_t> next{0};
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&]() {
            for (size_t i = next.fetch_add(1); i < instances.size(); i = next.fetch_add(1))
                results[i] = solve(instances[i]);
        }));
    }
    for (auto& f : futures) f.get();
    return results;
}

}  // namespace picore::pde
