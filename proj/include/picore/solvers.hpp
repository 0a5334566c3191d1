#pragma once

#include <cstdint>
#include <vector>

#include "picore/grid.hpp"

namespace picore::pde {

/// Exact transport by spectral phase shift; each stored frame is
/// u(t, x) = u0(x - beta * t) on the periodic domain. Frame 0 is a copy
/// of the input.
LabeledSample solve_advection(const PdeInstance& instance);

/// Pseudospectral viscous Burgers solver: 2/3-dealiased nonlinear term in
/// physical space, diffusion (nu/pi) u_xx integrated exactly per substep
/// (integrating factor), RK4 on the nonlinear part. n_substeps = 0 picks a
/// CFL-safe count from the initial condition.
LabeledSample solve_burgers(const PdeInstance& instance, int n_substeps = 0);

/// Steady Darcy flow via damped explicit pseudo-time iteration on the
/// 5-point flux-form stencil with harmonic-mean face coefficients.
/// Stops when ||u_new - u_old|| / (dt ||beta||) < tol, which equals the
/// relative residual of the discrete operator.
LabeledSample solve_darcy(const PdeInstance& instance, double tol = 1e-6,
                          int64_t max_iters = 200000);

/// 2D incompressible Navier-Stokes in vorticity form: spectral Poisson solve
/// for the stream function, 2/3-dealiased advection in physical space,
/// Crank-Nicolson diffusion with an explicit midpoint advection update.
LabeledSample solve_navier_stokes(const PdeInstance& instance, int n_substeps = 0);

/// Dispatch on instance.kind with solver defaults.
LabeledSample solve(const PdeInstance& instance);

/// Keep spatial indices congruent to 0 mod factor on every axis; time frames
/// untouched. Grid metadata is rescaled.
Field downsample(const Field& field, int factor);

/// Velocity component from vorticity on a periodic 2D grid via the spectral
/// Poisson solve (component 0: u_x = i k_y w / |k|^2, component 1:
/// u_y = -i k_x w / |k|^2). With adjoint = true applies the transpose of the
/// same real-linear map (conjugated multiplier).
std::vector<double> ns_velocity_component(const std::vector<double>& omega, int n,
                                          double domain_length, int component,
                                          bool adjoint = false);

/// Discrete flux-form Darcy operator div(a grad u) + beta on interior nodes
/// (zeros on the boundary ring); the operator the pseudo-time solver drives
/// to zero. Exposed so residual checks use the solver's own stencil.
Field darcy_flux_residual(const PdeInstance& instance, const Field& u);

/// Solve every instance; results are ordered by input index regardless of
/// worker completion order. max_workers = 0 reads PICORE_NUM_WORKERS.
std::vector<LabeledSample> solve_many(const std::vector<PdeInstance>& instances,
                                      int max_workers = 0);

/// Worker cap: explicit argument, else PICORE_NUM_WORKERS, else hardware.
int resolve_worker_count(int requested);

}  // namespace picore::pde
