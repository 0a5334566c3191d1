#include "picore/sampling.hpp"

#include <algorithm>
#include <complex>

#include "picore/fft.hpp"
#include "picore/rng.hpp"

namespace picore::pde {

Field sinusoidal_field(const GridSpec& grid, const std::vector<double>& amps,
                       const std::vector<int>& modes, const std::vector<double>& phases) {
    if (grid.spatial_dims != 1) throw ConfigError("sinusoidal_field: grid must be 1D");
    if (amps.size() != modes.size() || amps.size() != phases.size())
        throw ConfigError("sinusoidal_field: amps/modes/phases sizes differ");
    Field u = Field::spatial(grid);
    for (int j = 0; j < grid.n_points; ++j) {
        double x = grid.coord(j);
        double s = 0.0;
        for (size_t i = 0; i < amps.size(); ++i)
            s += amps[i] * std::sin(2.0 * M_PI * modes[i] * x + phases[i]);
        u.at(j) = s;
    }
    return u;
}

Field sample_sinusoidal_ic(uint64_t rng_seed, const GridSpec& grid,
                           IntRange n_waves, IntRange mode_range) {
    grid.validate();
    if (grid.spatial_dims != 1) throw ConfigError("sample_sinusoidal_ic: grid must be 1D");
    if (mode_range.lo > mode_range.hi) throw ConfigError("sample_sinusoidal_ic: empty mode range");
    if (grid.n_points < 2 * mode_range.hi)
        throw ConfigError("sample_sinusoidal_ic: grid cannot resolve the largest mode");

    Rng rng(rng_seed);
    int count = static_cast<int>(rng.uniform_int(n_waves.lo, n_waves.hi));
    std::vector<double> amps(count), phases(count);
    std::vector<int> modes(count);
    for (int i = 0; i < count; ++i) {
        modes[i] = static_cast<int>(rng.uniform_int(mode_range.lo, mode_range.hi));
        amps[i] = rng.uniform();
        phases[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
    Field u = sinusoidal_field(grid, amps, modes, phases);

    bool take_abs = rng.uniform() < 0.1;
    bool apply_window = rng.uniform() < 0.1;
    if (take_abs)
        for (double& v : u.values) v = std::fabs(v);
    if (apply_window) {
        for (int j = 0; j < grid.n_points; ++j) {
            double w = std::sin(M_PI * grid.coord(j));
            u.at(j) *= w * w;
        }
    }
    return u;
}

namespace {

/// Stationary 2D GRF with the given spectral amplitude profile, sampled by
/// filtering grid white noise in Fourier space. The overall normalization is
/// arbitrary; callers that threshold at zero do not depend on it.
Field filtered_white_noise(Rng& rng, const GridSpec& grid,
                           double (*amplitude)(double k_sq)) {
    int n = grid.n_points;
    std::vector<double> noise(static_cast<size_t>(n) * n);
    for (double& v : noise) v = rng.normal();
    auto spec = fft::forward_real_2d(noise.data(), n, n);
    for (int k0 = 0; k0 < n; ++k0) {
        for (int k1 = 0; k1 < n; ++k1) {
            int f0 = fft::freq(k0, n);
            int f1 = fft::freq(k1, n);
            double k_sq = static_cast<double>(f0) * f0 + static_cast<double>(f1) * f1;
            double a = (f0 == 0 && f1 == 0) ? 0.0 : amplitude(k_sq);
            spec[static_cast<size_t>(k0) * n + k1] *= a;
        }
    }
    auto vals = fft::inverse_to_real_2d(spec.data(), n, n);
    Field out = Field::spatial(grid);
    out.values = std::move(vals);
    return out;
}

double darcy_amplitude(double k_sq) {
    return 1.0 / (4.0 * M_PI * M_PI * k_sq + 9.0);
}

double ns_amplitude(double k_sq) {
    return std::pow(7.0, 0.75) * std::pow(4.0 * M_PI * M_PI * k_sq + 49.0, -1.25);
}

}  // namespace

Field sample_darcy_coefficient(uint64_t rng_seed, const GridSpec& grid) {
    grid.validate();
    if (grid.spatial_dims != 2) throw ConfigError("sample_darcy_coefficient: grid must be 2D");
    Rng rng(rng_seed);
    Field g = filtered_white_noise(rng, grid, darcy_amplitude);
    for (double& v : g.values) v = (v > 0.0) ? 12.0 : 3.0;
    return g;
}

Field sample_ns_vorticity(uint64_t rng_seed, const GridSpec& grid) {
    grid.validate();
    if (grid.spatial_dims != 2) throw ConfigError("sample_ns_vorticity: grid must be 2D");
    int n = grid.n_points;
    Rng rng(rng_seed);

    // Direct Hermitian synthesis: omega(x) = sum_k sigma_k zeta_k e^{2 pi i k.x}
    // with zeta_{-k} = conj(zeta_k), E|zeta_k|^2 = 1 and zeta_0 = 0, so the
    // pointwise variance equals sum_k sigma_k^2.
    std::vector<std::complex<double>> spec(static_cast<size_t>(n) * n, 0.0);
    for (int k0 = 0; k0 < n; ++k0) {
        for (int k1 = 0; k1 < n; ++k1) {
            int m0 = (n - k0) % n;
            int m1 = (n - k1) % n;
            bool self_conjugate = (m0 == k0 && m1 == k1);
            // Each conjugate pair is drawn once, at its lexicographically
            // smaller member, in row-major order.
            if (!self_conjugate && std::make_pair(m0, m1) < std::make_pair(k0, k1)) continue;
            if (k0 == 0 && k1 == 0) continue;

            int f0 = fft::freq(k0, n);
            int f1 = fft::freq(k1, n);
            double k_sq = static_cast<double>(f0) * f0 + static_cast<double>(f1) * f1;
            double sigma = ns_amplitude(k_sq);
            if (self_conjugate) {
                spec[static_cast<size_t>(k0) * n + k1] = sigma * rng.normal();
            } else {
                double re = rng.normal();
                double im = rng.normal();
                std::complex<double> z(re * M_SQRT1_2, im * M_SQRT1_2);
                spec[static_cast<size_t>(k0) * n + k1] = sigma * z;
                spec[static_cast<size_t>(m0) * n + m1] = sigma * std::conj(z);
            }
        }
    }

    // The synthesis sum has no 1/N factor, so use the raw backward transform.
    std::vector<std::complex<double>> buf(spec.size());
    fft::transform_2d(spec.data(), buf.data(), n, n, fft::kBackward);
    Field out = Field::spatial(grid);
    for (size_t i = 0; i < buf.size(); ++i) out.values[i] = buf[i].real();
    return out;
}

Field ns_default_forcing(const GridSpec& grid) {
    Field f = Field::spatial(grid);
    int n = grid.n_points;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 2.0 * M_PI * (grid.coord(i) + grid.coord(j));
            f.at2(i, j) = 0.1 * (std::sin(s) + std::cos(s));
        }
    }
    return f;
}

double ns_vorticity_point_variance(const GridSpec& grid) {
    int n = grid.n_points;
    double total = 0.0;
    for (int k0 = 0; k0 < n; ++k0) {
        for (int k1 = 0; k1 < n; ++k1) {
            if (k0 == 0 && k1 == 0) continue;
            int f0 = fft::freq(k0, n);
            int f1 = fft::freq(k1, n);
            double k_sq = static_cast<double>(f0) * f0 + static_cast<double>(f1) * f1;
            double sigma = ns_amplitude(k_sq);
            total += sigma * sigma;
        }
    }
    return total;
}

}  // namespace picore::pde
