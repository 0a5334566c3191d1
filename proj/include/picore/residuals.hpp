#pragma once

#include <array>
#include <cstdint>

#include "picore/grid.hpp"

namespace picore::residuals {

/// Physics-informed loss weights; lambda scales the boundary penalty and mu
/// the initial-condition penalty.
struct PiWeights {
    double lambda = 1.0;
    double mu = 1.0;
};

enum class FieldAxis { Time, X, Y };
enum class Boundary { Periodic, OneSided };

/// PDE residual evaluated on the prediction's stencil, plus its squared
/// discrete L2 norm (domain-measure weighted).
struct ResidualField {
    Field values;
    double l2sq = 0.0;
};

/// 2nd-order finite difference along one axis. Central stencils in the
/// interior; periodic wraparound or 2nd-order one-sided stencils at the ends.
Field fd_derivative(const Field& field, FieldAxis axis, int order, Boundary boundary);

/// Core stencil kernel on a flattened [d0][d1][d2] view. With transpose the
/// adjoint (scatter) form is applied; out is accumulated into, not assigned.
void fd_stencil_apply(const double* in, double* out, const std::array<int64_t, 3>& dims,
                      int axis, int order, bool periodic, double h, bool transpose);

/// Strong-form PDE residual of a predicted solution field:
///   advection:      u_t + beta u_x
///   burgers:        u_t + (u^2/2)_x - (nu/pi) u_xx
///   darcy:          -(grad a . grad u + a lap u) - beta   (interior nodes only)
///   navier-stokes:  w_t + u . grad w - nu lap w - f       (u spectral from w)
/// Time derivatives are one-sided at the first/last frame, spatial stencils
/// periodic (Darcy: central stencils on the interior, boundary ring zero).
ResidualField pde_residual(const PdeInstance& instance, const Field& prediction);

/// Physics-informed loss: residual l2sq + lambda * boundary penalty
/// + mu * initial-condition penalty. Periodic PDEs have no boundary term;
/// Darcy penalizes the prediction on boundary nodes (h == 0 there).
double pi_loss(const PdeInstance& instance, const Field& prediction, const PiWeights& weights);

/// Discrete L2^2 with the measure convention used throughout: the domain
/// measure times the mean of squares over the evaluated nodes.
inline double measure_l2sq(double sum_sq, int64_t count, double measure) {
    return measure * sum_sq / static_cast<double>(count);
}

/// Space(-time) measure of the residual integral for a kind.
double residual_measure(const PdeInstance& instance);

}  // namespace picore::residuals
