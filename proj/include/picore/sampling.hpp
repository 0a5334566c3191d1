#pragma once

#include <cstdint>
#include <vector>

#include "picore/grid.hpp"

namespace picore::pde {

/// Inclusive integer range.
struct IntRange {
    int lo = 1;
    int hi = 1;
};

/// Deterministic superposition of sine modes on a 1D periodic grid:
/// u0(x_j) = sum_i amps[i] * sin(2*pi*modes[i]*x_j + phases[i]).
Field sinusoidal_field(const GridSpec& grid, const std::vector<double>& amps,
                       const std::vector<int>& modes, const std::vector<double>& phases);

/// Random superposition of sinusoidal modes for advection/Burgers initial
/// conditions. Amplitudes in [0,1], phases in (0,2pi), integer modes drawn
/// from mode_range. With probability 0.1 the field is replaced by its
/// pointwise absolute value, and independently with probability 0.1 it is
/// multiplied by the window w(x) = sin(pi x)^2.
Field sample_sinusoidal_ic(uint64_t rng_seed, const GridSpec& grid,
                           IntRange n_waves = {1, 4}, IntRange mode_range = {1, 8});

/// Piecewise-constant binary Darcy coefficient: a Gaussian random field with
/// covariance (-Laplacian + 9 I)^{-2} is synthesized spectrally and
/// thresholded at zero; positive values map to 12, the rest to 3.
Field sample_darcy_coefficient(uint64_t rng_seed, const GridSpec& grid);

/// Navier-Stokes initial vorticity, N(0, 7^{3/2} (-Laplacian + 49 I)^{-2.5}):
/// independent standard normal Fourier coefficients scaled by
/// 7^{3/4} (4 pi^2 |k|^2 + 49)^{-1.25}, Hermitian-symmetrized, zero mean.
Field sample_ns_vorticity(uint64_t rng_seed, const GridSpec& grid);

/// Standard forcing 0.1 [sin 2pi(x1+x2) + cos 2pi(x1+x2)] on the grid.
Field ns_default_forcing(const GridSpec& grid);

/// Analytic pointwise variance of sample_ns_vorticity output (sum of squared
/// spectral weights); used as an oracle for the synthesis convention.
double ns_vorticity_point_variance(const GridSpec& grid);

}  // namespace picore::pde
