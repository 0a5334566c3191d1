#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "picore/errors.hpp"

namespace picore {

enum class PdeKind { Advection, Burgers, Darcy, NavierStokes };

std::string to_string(PdeKind kind);
PdeKind pde_kind_from_string(const std::string& name);

/// True for PDEs with a time axis (everything except Darcy).
inline bool is_dynamic(PdeKind kind) { return kind != PdeKind::Darcy; }

/// Uniform grid metadata for space (1D or 2D) and optionally time.
///
/// Periodic grids place nodes at x_j = j*h with h = L/n (no duplicate
/// endpoint). Non-periodic grids (Darcy) include both boundaries, so
/// h = L/(n-1).
struct GridSpec {
    int spatial_dims = 1;
    int n_points = 64;
    double domain_length = 1.0;
    int n_time = 0;        ///< stored frames including t=0; 0 for stationary PDEs
    double t_final = 0.0;
    bool periodic = true;

    double spacing() const {
        return periodic ? domain_length / n_points
                        : domain_length / (n_points - 1);
    }
    /// Time between stored frames.
    double dt_store() const { return t_final / (n_time - 1); }
    /// Coordinate of spatial node j.
    double coord(int j) const { return j * spacing(); }

    int64_t spatial_size() const {
        int64_t s = n_points;
        for (int d = 1; d < spatial_dims; ++d) s *= n_points;
        return s;
    }

    void validate() const;
    bool operator==(const GridSpec&) const = default;
};

/// Dense real field on a GridSpec, optionally with a leading time axis.
/// values are row-major [frames][n]([n]).
struct Field {
    GridSpec grid;
    int frames = 1;  ///< 1 for a purely spatial field
    std::vector<double> values;

    static Field spatial(const GridSpec& grid);
    static Field spacetime(const GridSpec& grid);

    int64_t spatial_size() const { return grid.spatial_size(); }
    int64_t size() const { return static_cast<int64_t>(values.size()); }

    double& at(int i) { return values[i]; }
    double at(int i) const { return values[i]; }
    double& at2(int i, int j) { return values[static_cast<int64_t>(i) * grid.n_points + j]; }
    double at2(int i, int j) const { return values[static_cast<int64_t>(i) * grid.n_points + j]; }

    /// Pointer to the start of time frame t.
    double* frame(int t) { return values.data() + static_cast<int64_t>(t) * spatial_size(); }
    const double* frame(int t) const { return values.data() + static_cast<int64_t>(t) * spatial_size(); }

    /// Copy of one time frame as a spatial field.
    Field frame_copy(int t) const;

    bool all_finite() const;
    /// Plain sum of squared values.
    double sum_sq() const;
};

/// Physical parameters; which members are meaningful depends on the kind.
struct PdeParams {
    double beta = 1.0;            ///< advection speed / Darcy forcing constant
    double nu = 0.01;             ///< Burgers / Navier-Stokes viscosity
    std::optional<Field> forcing; ///< Navier-Stokes forcing field (default built on demand)
};

/// One PDE problem: kind, parameters and the input function a.
struct PdeInstance {
    PdeKind kind = PdeKind::Advection;
    PdeParams params;
    Field input;   ///< u0 (advection/Burgers), coefficient a (Darcy), omega0 (NS)
    GridSpec grid;

    void validate() const;
};

/// A solved instance: ground-truth solution plus the wall time spent solving.
struct LabeledSample {
    PdeInstance instance;
    Field solution;
    double sim_seconds = 0.0;
};

/// Discrete L2^2 of the difference, plain sums.
double sum_sq_diff(const Field& a, const Field& b);

/// Training data: instances always present, labels only where simulated.
struct Dataset {
    std::vector<PdeInstance> instances;
    std::vector<std::optional<Field>> labels;

    int64_t size() const { return static_cast<int64_t>(instances.size()); }
    bool has_label(int64_t i) const { return labels[i].has_value(); }
};

}  // namespace picore
