#include "picore/grid.hpp"

#include <algorithm>

namespace picore {

std::string to_string(PdeKind kind) {
    switch (kind) {
        case PdeKind::Advection: return "advection";
        case PdeKind::Burgers: return "burgers";
        case PdeKind::Darcy: return "darcy";
        case PdeKind::NavierStokes: return "navier_stokes";
    }
    return "unknown";
}

PdeKind pde_kind_from_string(const std::string& name) {
    if (name == "advection") return PdeKind::Advection;
    if (name == "burgers") return PdeKind::Burgers;
    if (name == "darcy") return PdeKind::Darcy;
    if (name == "navier_stokes" || name == "ns") return PdeKind::NavierStokes;
    throw ConfigError("unknown PDE kind: " + name);
}

void GridSpec::validate() const {
    if (spatial_dims != 1 && spatial_dims != 2)
        throw ConfigError("GridSpec: spatial_dims must be 1 or 2");
    if (n_points < 4) throw ConfigError("GridSpec: n_points must be >= 4");
    if (domain_length <= 0.0) throw ConfigError("GridSpec: domain_length must be positive");
    if (n_time != 0) {
        if (n_time < 2) throw ConfigError("GridSpec: dynamic grids need n_time >= 2");
        if (t_final <= 0.0) throw ConfigError("GridSpec: dynamic grids need t_final > 0");
    }
}

Field Field::spatial(const GridSpec& grid) {
    Field f;
    f.grid = grid;
    f.frames = 1;
    f.values.assign(grid.spatial_size(), 0.0);
    return f;
}

Field Field::spacetime(const GridSpec& grid) {
    Field f;
    f.grid = grid;
    f.frames = std::max(grid.n_time, 1);
    f.values.assign(static_cast<int64_t>(f.frames) * grid.spatial_size(), 0.0);
    return f;
}

Field Field::frame_copy(int t) const {
    Field f = Field::spatial(grid);
    const double* src = frame(t);
    std::copy(src, src + spatial_size(), f.values.begin());
    return f;
}

bool Field::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double Field::sum_sq() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
}

void PdeInstance::validate() const {
    grid.validate();
    if (input.spatial_size() != grid.spatial_size() || input.frames != 1)
        throw ShapeMismatch("PdeInstance: input shape does not match grid");
    switch (kind) {
        case PdeKind::Advection:
            if (grid.spatial_dims != 1) throw ConfigError("advection is 1D");
            if (params.beta <= 0.0) throw ConfigError("advection speed must be positive");
            if (grid.n_time < 2) throw ConfigError("advection needs n_time >= 2");
            break;
        case PdeKind::Burgers:
            if (grid.spatial_dims != 1) throw ConfigError("burgers is 1D");
            if (params.nu <= 0.0) throw ConfigError("burgers viscosity must be positive");
            if (grid.n_time < 2) throw ConfigError("burgers needs n_time >= 2");
            break;
        case PdeKind::Darcy: {
            if (grid.spatial_dims != 2) throw ConfigError("darcy is 2D");
            if (grid.n_time != 0) throw ConfigError("darcy is stationary (n_time = 0)");
            if (grid.periodic) throw ConfigError("darcy grid must be non-periodic");
            double lo = *std::min_element(input.values.begin(), input.values.end());
            if (lo <= 0.0) throw ConfigError("darcy coefficient must be strictly positive");
            break;
        }
        case PdeKind::NavierStokes:
            if (grid.spatial_dims != 2) throw ConfigError("navier_stokes is 2D");
            if (params.nu <= 0.0) throw ConfigError("navier_stokes viscosity must be positive");
            if (grid.n_time < 2) throw ConfigError("navier_stokes needs n_time >= 2");
            break;
    }
}

double sum_sq_diff(const Field& a, const Field& b) {
    if (a.values.size() != b.values.size())
        throw ShapeMismatch("sum_sq_diff: field sizes differ");
    double s = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return s;
}

}  // namespace picore
