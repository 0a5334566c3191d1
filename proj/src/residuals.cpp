#include "picore/residuals.hpp"

#include <algorithm>

#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

namespace picore::residuals {

namespace {

struct Dims3 {
    std::array<int64_t, 3> extents;
    static Dims3 of(const Field& f) {
        if (f.grid.spatial_dims == 1)
            return {{f.frames, f.grid.n_points, 1}};
        return {{f.frames, f.grid.n_points, f.grid.n_points}};
    }
};

int axis_index(const Field& f, FieldAxis axis) {
    switch (axis) {
        case FieldAxis::Time:
            if (f.frames <= 1) throw ConfigError("fd_derivative: field has no time axis");
            return 0;
        case FieldAxis::X: return 1;
        case FieldAxis::Y:
            if (f.grid.spatial_dims < 2) throw ConfigError("fd_derivative: field has no Y axis");
            return 2;
    }
    throw ConfigError("fd_derivative: bad axis");
}

double axis_spacing(const Field& f, FieldAxis axis) {
    return axis == FieldAxis::Time ? f.grid.dt_store() : f.grid.spacing();
}

}  // namespace

void fd_stencil_apply(const double* in, double* out, const std::array<int64_t, 3>& dims,
                      int axis, int order, bool periodic, double h, bool transpose) {
    int64_t n = dims[axis];
    if (n < 3) throw AxisTooShort("fd_stencil_apply: axis needs >= 3 points");
    if (order == 2 && !periodic && n < 4)
        throw AxisTooShort("fd_stencil_apply: one-sided 2nd derivative needs >= 4 points");
    if (order != 1 && order != 2) throw ConfigError("fd_stencil_apply: order must be 1 or 2");

    int64_t stride = 1;
    for (int d = axis + 1; d < 3; ++d) stride *= dims[d];
    int64_t n_lines = dims[0] * dims[1] * dims[2] / n;

    double inv = (order == 1) ? 1.0 / (2.0 * h) : 1.0 / (h * h);

    // Row i of the stencil matrix: list of (index, coefficient) pairs.
    auto row = [&](int64_t i, auto&& emit) {
        if (periodic) {
            int64_t prev = (i + n - 1) % n;
            int64_t next = (i + 1) % n;
            if (order == 1) {
                emit(next, inv);
                emit(prev, -inv);
            } else {
                emit(next, inv);
                emit(i, -2.0 * inv);
                emit(prev, inv);
            }
            return;
        }
        if (order == 1) {
            if (i == 0) {
                emit(0, -3.0 * inv);
                emit(1, 4.0 * inv);
                emit(2, -inv);
            } else if (i == n - 1) {
                emit(n - 1, 3.0 * inv);
                emit(n - 2, -4.0 * inv);
                emit(n - 3, inv);
            } else {
                emit(i + 1, inv);
                emit(i - 1, -inv);
            }
        } else {
            if (i == 0) {
                emit(0, 2.0 * inv);
                emit(1, -5.0 * inv);
                emit(2, 4.0 * inv);
                emit(3, -inv);
            } else if (i == n - 1) {
                emit(n - 1, 2.0 * inv);
                emit(n - 2, -5.0 * inv);
                emit(n - 3, 4.0 * inv);
                emit(n - 4, -inv);
            } else {
                emit(i + 1, inv);
                emit(i, -2.0 * inv);
                emit(i - 1, inv);
            }
        }
    };

    for (int64_t line = 0; line < n_lines; ++line) {
        // Base offset of this line: decompose line index over the non-axis dims.
        int64_t base = 0;
        int64_t rem = line;
        for (int d = 2; d >= 0; --d) {
            if (d == axis) continue;
            int64_t coord = rem % dims[d];
            rem /= dims[d];
            int64_t dstride = 1;
            for (int dd = d + 1; dd < 3; ++dd) dstride *= dims[dd];
            base += coord * dstride;
        }
        for (int64_t i = 0; i < n; ++i) {
            if (!transpose) {
                double acc = 0.0;
                row(i, [&](int64_t j, double c) { acc += c * in[base + j * stride]; });
                out[base + i * stride] += acc;
            } else {
                double v = in[base + i * stride];
                row(i, [&](int64_t j, double c) { out[base + j * stride] += c * v; });
            }
        }
    }
}

Field fd_derivative(const Field& field, FieldAxis axis, int order, Boundary boundary) {
    int ax = axis_index(field, axis);
    Dims3 dims = Dims3::of(field);
    Field out = field;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    fd_stencil_apply(field.values.data(), out.values.data(), dims.extents, ax, order,
                     boundary == Boundary::Periodic, axis_spacing(field, axis), false);
    return out;
}

double residual_measure(const PdeInstance& instance) {
    double space = instance.grid.domain_length;
    if (instance.grid.spatial_dims == 2) space *= instance.grid.domain_length;
    return is_dynamic(instance.kind) ? space * instance.grid.t_final : space;
}

namespace {

void check_prediction_shape(const PdeInstance& instance, const Field& prediction) {
    int want_frames = is_dynamic(instance.kind) ? instance.grid.n_time : 1;
    if (prediction.frames != want_frames ||
        prediction.spatial_size() != instance.grid.spatial_size())
        throw ShapeMismatch("pde_residual: prediction shape does not match instance grid");
}

ResidualField advection_residual(const PdeInstance& instance, const Field& u) {
    Field ut = fd_derivative(u, FieldAxis::Time, 1, Boundary::OneSided);
    Field ux = fd_derivative(u, FieldAxis::X, 1, Boundary::Periodic);
    ResidualField r;
    r.values = u;
    for (size_t i = 0; i < u.values.size(); ++i)
        r.values.values[i] = ut.values[i] + instance.params.beta * ux.values[i];
    r.l2sq = measure_l2sq(r.values.sum_sq(), r.values.size(), residual_measure(instance));
    return r;
}

ResidualField burgers_residual(const PdeInstance& instance, const Field& u) {
    Field ut = fd_derivative(u, FieldAxis::Time, 1, Boundary::OneSided);
    Field half_sq = u;
    for (double& v : half_sq.values) v = 0.5 * v * v;
    Field flux_x = fd_derivative(half_sq, FieldAxis::X, 1, Boundary::Periodic);
    Field uxx = fd_derivative(u, FieldAxis::X, 2, Boundary::Periodic);
    double diffusivity = instance.params.nu / M_PI;
    ResidualField r;
    r.values = u;
    for (size_t i = 0; i < u.values.size(); ++i)
        r.values.values[i] = ut.values[i] + flux_x.values[i] - diffusivity * uxx.values[i];
    r.l2sq = measure_l2sq(r.values.sum_sq(), r.values.size(), residual_measure(instance));
    return r;
}

ResidualField darcy_residual(const PdeInstance& instance, const Field& u) {
    const Field& a = instance.input;
    Field ax = fd_derivative(a, FieldAxis::X, 1, Boundary::OneSided);
    Field ay = fd_derivative(a, FieldAxis::Y, 1, Boundary::OneSided);
    Field ux = fd_derivative(u, FieldAxis::X, 1, Boundary::OneSided);
    Field uy = fd_derivative(u, FieldAxis::Y, 1, Boundary::OneSided);
    Field uxx = fd_derivative(u, FieldAxis::X, 2, Boundary::OneSided);
    Field uyy = fd_derivative(u, FieldAxis::Y, 2, Boundary::OneSided);

    int n = instance.grid.n_points;
    ResidualField r;
    r.values = Field::spatial(instance.grid);
    double sum_sq = 0.0;
    for (int i = 1; i < n - 1; ++i) {
        for (int j = 1; j < n - 1; ++j) {
            double div = ax.at2(i, j) * ux.at2(i, j) + ay.at2(i, j) * uy.at2(i, j) +
                         a.at2(i, j) * (uxx.at2(i, j) + uyy.at2(i, j));
            double v = -div - instance.params.beta;
            r.values.at2(i, j) = v;
            sum_sq += v * v;
        }
    }
    int64_t interior = static_cast<int64_t>(n - 2) * (n - 2);
    r.l2sq = measure_l2sq(sum_sq, interior, residual_measure(instance));
    return r;
}

ResidualField navier_stokes_residual(const PdeInstance& instance, const Field& w) {
    const GridSpec& grid = instance.grid;
    int n = grid.n_points;
    int64_t plane = grid.spatial_size();
    double nu = instance.params.nu;

    Field wt = fd_derivative(w, FieldAxis::Time, 1, Boundary::OneSided);
    Field wx = fd_derivative(w, FieldAxis::X, 1, Boundary::Periodic);
    Field wy = fd_derivative(w, FieldAxis::Y, 1, Boundary::Periodic);
    Field wxx = fd_derivative(w, FieldAxis::X, 2, Boundary::Periodic);
    Field wyy = fd_derivative(w, FieldAxis::Y, 2, Boundary::Periodic);

    Field forcing = instance.params.forcing ? *instance.params.forcing
                                            : pde::ns_default_forcing(grid);

    ResidualField r;
    r.values = w;
    for (int t = 0; t < w.frames; ++t) {
        std::vector<double> frame(w.frame(t), w.frame(t) + plane);
        auto ux = pde::ns_velocity_component(frame, n, grid.domain_length, 0);
        auto uy = pde::ns_velocity_component(frame, n, grid.domain_length, 1);
        int64_t off = static_cast<int64_t>(t) * plane;
        for (int64_t i = 0; i < plane; ++i) {
            double advect = ux[i] * wx.values[off + i] + uy[i] * wy.values[off + i];
            double lap = wxx.values[off + i] + wyy.values[off + i];
            r.values.values[off + i] =
                wt.values[off + i] + advect - nu * lap - forcing.values[i];
        }
    }
    r.l2sq = measure_l2sq(r.values.sum_sq(), r.values.size(), residual_measure(instance));
    return r;
}

}  // namespace

ResidualField pde_residual(const PdeInstance& instance, const Field& prediction) {
    check_prediction_shape(instance, prediction);
    switch (instance.kind) {
        case PdeKind::Advection: return advection_residual(instance, prediction);
        case PdeKind::Burgers: return burgers_residual(instance, prediction);
        case PdeKind::Darcy: return darcy_residual(instance, prediction);
        case PdeKind::NavierStokes: return navier_stokes_residual(instance, prediction);
    }
    throw ConfigError("pde_residual: unknown kind");
}

double pi_loss(const PdeInstance& instance, const Field& prediction, const PiWeights& weights) {
    if (weights.lambda < 0.0 || weights.mu < 0.0 || !std::isfinite(weights.lambda) ||
        !std::isfinite(weights.mu))
        throw ConfigError("pi_loss: weights must be finite and non-negative");
    ResidualField r = pde_residual(instance, prediction);
    double loss = r.l2sq;

    if (instance.kind == PdeKind::Darcy) {
        // Dirichlet data h == 0, so the boundary penalty is the squared L2 of
        // the prediction on the boundary ring, measured over the perimeter.
        int n = instance.grid.n_points;
        double sum_sq = 0.0;
        int64_t count = 0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == 0 || j == 0 || i == n - 1 || j == n - 1) {
                    sum_sq += prediction.at2(i, j) * prediction.at2(i, j);
                    ++count;
                }
            }
        }
        double perimeter = 4.0 * instance.grid.domain_length;
        loss += weights.lambda * measure_l2sq(sum_sq, count, perimeter);
    }
    // Periodic dynamic PDEs: periodicity is built into the stencils, so the
    // boundary term is identically zero.

    if (is_dynamic(instance.kind)) {
        double sum_sq = 0.0;
        const double* frame0 = prediction.frame(0);
        for (int64_t i = 0; i < prediction.spatial_size(); ++i) {
            double d = frame0[i] - instance.input.values[i];
            sum_sq += d * d;
        }
        double space = instance.grid.domain_length;
        if (instance.grid.spatial_dims == 2) space *= instance.grid.domain_length;
        loss += weights.mu * measure_l2sq(sum_sq, prediction.spatial_size(), space);
    }
    return loss;
}

}  // namespace picore::residuals
