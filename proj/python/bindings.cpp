#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "picore/coreset.hpp"
#include "picore/dataset_io.hpp"
#include "picore/fno.hpp"
#include "picore/pipeline.hpp"
#include "picore/report.hpp"
#include "picore/residuals.hpp"
#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

namespace py = pybind11;
using namespace picore;

namespace {

py::array_t<double> field_to_array(const Field& field) {
    std::vector<py::ssize_t> shape;
    if (field.frames > 1) shape.push_back(field.frames);
    shape.push_back(field.grid.n_points);
    if (field.grid.spatial_dims == 2) shape.push_back(field.grid.n_points);
    py::array_t<double> out(shape);
    std::copy(field.values.begin(), field.values.end(), out.mutable_data());
    return out;
}

Field field_from_array(const GridSpec& grid, py::array_t<double, py::array::c_style |
                                                              py::array::forcecast> values) {
    Field f;
    f.grid = grid;
    py::ssize_t expect_spatial = grid.spatial_size();
    py::ssize_t total = values.size();
    if (total % expect_spatial != 0)
        throw ShapeMismatch("array size does not match the grid");
    f.frames = static_cast<int>(total / expect_spatial);
    f.values.assign(values.data(), values.data() + total);
    return f;
}

PdeInstance make_instance(PdeKind kind, const GridSpec& grid, py::array_t<double> input,
                          double beta, double nu) {
    PdeInstance instance;
    instance.kind = kind;
    instance.grid = grid;
    instance.params.beta = beta;
    instance.params.nu = nu;
    instance.input = field_from_array(grid, std::move(input));
    instance.input.frames = 1;
    return instance;
}

Eigen::MatrixXd matrix_from_array(
    py::array_t<double, py::array::c_style | py::array::forcecast> columns) {
    if (columns.ndim() != 2) throw ShapeMismatch("expected a 2D array [d, n]");
    Eigen::MatrixXd m(columns.shape(0), columns.shape(1));
    for (py::ssize_t i = 0; i < columns.shape(0); ++i)
        for (py::ssize_t j = 0; j < columns.shape(1); ++j) m(i, j) = columns.at(i, j);
    return m;
}

py::dict selection_to_dict(const coreset::CoresetSelection& s) {
    py::dict out;
    out["indices"] = s.indices;
    out["weights"] = s.weights;
    out["algorithm"] = s.algorithm;
    out["beta"] = s.budget_fraction;
    out["seed"] = s.seed;
    return out;
}

}  // namespace

PYBIND11_MODULE(_picore, m) {
    m.doc() = "Physics-informed coreset selection for neural operator training";
    m.attr("__version__") = io::kToolVersion;

    py::register_exception<NumericalError>(m, "NumericalError");
    py::register_exception<ConfigError>(m, "PicoreConfigError");

    py::enum_<PdeKind>(m, "PdeKind")
        .value("advection", PdeKind::Advection)
        .value("burgers", PdeKind::Burgers)
        .value("darcy", PdeKind::Darcy)
        .value("navier_stokes", PdeKind::NavierStokes);

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init([](int spatial_dims, int n_points, double domain_length, int n_time,
                         double t_final, bool periodic) {
                 GridSpec g;
                 g.spatial_dims = spatial_dims;
                 g.n_points = n_points;
                 g.domain_length = domain_length;
                 g.n_time = n_time;
                 g.t_final = t_final;
                 g.periodic = periodic;
                 g.validate();
                 return g;
             }),
             py::arg("spatial_dims"), py::arg("n_points"), py::arg("domain_length") = 1.0,
             py::arg("n_time") = 0, py::arg("t_final") = 0.0, py::arg("periodic") = true)
        .def_readonly("spatial_dims", &GridSpec::spatial_dims)
        .def_readonly("n_points", &GridSpec::n_points)
        .def_readonly("n_time", &GridSpec::n_time)
        .def_readonly("t_final", &GridSpec::t_final)
        .def_readonly("periodic", &GridSpec::periodic)
        .def("spacing", &GridSpec::spacing);

    // Samplers.
    m.def("sample_sinusoidal_ic",
          [](uint64_t seed, const GridSpec& grid) {
              return field_to_array(pde::sample_sinusoidal_ic(seed, grid));
          },
          py::arg("seed"), py::arg("grid"));
    m.def("sample_darcy_coefficient",
          [](uint64_t seed, const GridSpec& grid) {
              return field_to_array(pde::sample_darcy_coefficient(seed, grid));
          },
          py::arg("seed"), py::arg("grid"));
    m.def("sample_ns_vorticity",
          [](uint64_t seed, const GridSpec& grid) {
              return field_to_array(pde::sample_ns_vorticity(seed, grid));
          },
          py::arg("seed"), py::arg("grid"));

    // Solvers; each returns (solution, sim_seconds).
    m.def("solve_advection",
          [](const GridSpec& grid, py::array_t<double> u0, double beta) {
              auto sample = pde::solve_advection(
                  make_instance(PdeKind::Advection, grid, std::move(u0), beta, 0.01));
              return py::make_tuple(field_to_array(sample.solution), sample.sim_seconds);
          },
          py::arg("grid"), py::arg("u0"), py::arg("beta") = 1.0);
    m.def("solve_burgers",
          [](const GridSpec& grid, py::array_t<double> u0, double nu, int substeps) {
              auto sample = pde::solve_burgers(
                  make_instance(PdeKind::Burgers, grid, std::move(u0), 1.0, nu), substeps);
              return py::make_tuple(field_to_array(sample.solution), sample.sim_seconds);
          },
          py::arg("grid"), py::arg("u0"), py::arg("nu") = 0.01, py::arg("substeps") = 0);
    m.def("solve_darcy",
          [](const GridSpec& grid, py::array_t<double> coefficient, double beta, double tol) {
              auto sample = pde::solve_darcy(
                  make_instance(PdeKind::Darcy, grid, std::move(coefficient), beta, 0.01),
                  tol);
              return py::make_tuple(field_to_array(sample.solution), sample.sim_seconds);
          },
          py::arg("grid"), py::arg("coefficient"), py::arg("beta") = 1.0,
          py::arg("tol") = 1e-6);
    m.def("solve_navier_stokes",
          [](const GridSpec& grid, py::array_t<double> omega0, double nu, int substeps) {
              auto sample = pde::solve_navier_stokes(
                  make_instance(PdeKind::NavierStokes, grid, std::move(omega0), 1.0, nu),
                  substeps);
              return py::make_tuple(field_to_array(sample.solution), sample.sim_seconds);
          },
          py::arg("grid"), py::arg("omega0"), py::arg("nu") = 1e-3, py::arg("substeps") = 0);
    m.def("downsample",
          [](const GridSpec& grid, py::array_t<double> values, int factor) {
              return field_to_array(
                  pde::downsample(field_from_array(grid, std::move(values)), factor));
          },
          py::arg("grid"), py::arg("values"), py::arg("factor"));

    // Residuals and metrics.
    m.def("pi_loss",
          [](PdeKind kind, const GridSpec& grid, py::array_t<double> input,
             py::array_t<double> prediction, double beta, double nu, double lam, double mu) {
              PdeInstance instance = make_instance(kind, grid, std::move(input), beta, nu);
              Field pred = field_from_array(grid, std::move(prediction));
              return residuals::pi_loss(instance, pred, {lam, mu});
          },
          py::arg("kind"), py::arg("grid"), py::arg("input"), py::arg("prediction"),
          py::arg("beta") = 1.0, py::arg("nu") = 0.01, py::arg("lam") = 1.0,
          py::arg("mu") = 1.0);
    m.def("pde_residual_l2sq",
          [](PdeKind kind, const GridSpec& grid, py::array_t<double> input,
             py::array_t<double> prediction, double beta, double nu) {
              PdeInstance instance = make_instance(kind, grid, std::move(input), beta, nu);
              Field pred = field_from_array(grid, std::move(prediction));
              return residuals::pde_residual(instance, pred).l2sq;
          },
          py::arg("kind"), py::arg("grid"), py::arg("input"), py::arg("prediction"),
          py::arg("beta") = 1.0, py::arg("nu") = 0.01);
    m.def("nrmse",
          [](const GridSpec& grid, py::array_t<double> prediction, py::array_t<double> truth) {
              return fno::nrmse(field_from_array(grid, std::move(prediction)),
                                field_from_array(grid, std::move(truth)));
          },
          py::arg("grid"), py::arg("prediction"), py::arg("truth"));

    // Selectors over feature/input matrices (column i = sample i).
    m.def("select_el2n",
          [](const std::vector<double>& losses, int k) {
              return selection_to_dict(coreset::select_el2n(losses, k));
          },
          py::arg("per_sample_loss"), py::arg("k"));
    m.def("select_grand",
          [](py::array_t<double> columns, int k) {
              coreset::FeatureMatrix f;
              f.columns = matrix_from_array(std::move(columns));
              f.per_sample_loss = Eigen::VectorXd::Zero(f.columns.cols());
              return selection_to_dict(coreset::select_grand(f, k));
          },
          py::arg("columns"), py::arg("k"));
    m.def("select_craig",
          [](py::array_t<double> columns, int k, int subsample, uint64_t seed) {
              coreset::FeatureMatrix f;
              f.columns = matrix_from_array(std::move(columns));
              f.per_sample_loss = Eigen::VectorXd::Zero(f.columns.cols());
              return selection_to_dict(coreset::select_craig(f, k, subsample, seed));
          },
          py::arg("columns"), py::arg("k"), py::arg("subsample") = 0, py::arg("seed") = 0);
    m.def("select_gradmatch",
          [](py::array_t<double> columns, int k, double ridge) {
              coreset::FeatureMatrix f;
              f.columns = matrix_from_array(std::move(columns));
              f.per_sample_loss = Eigen::VectorXd::Zero(f.columns.cols());
              return selection_to_dict(coreset::select_gradmatch(f, k, ridge));
          },
          py::arg("columns"), py::arg("k"), py::arg("ridge") = 1e-4);
    m.def("select_kmeans",
          [](py::array_t<double> columns, int k, int iters, uint64_t seed) {
              return selection_to_dict(coreset::select_kmeans(
                  matrix_from_array(std::move(columns)), k, iters, seed));
          },
          py::arg("columns"), py::arg("k"), py::arg("iters") = 100, py::arg("seed") = 0);
    m.def("select_cosine",
          [](py::array_t<double> columns, int k) {
              return selection_to_dict(
                  coreset::select_cosine(matrix_from_array(std::move(columns)), k));
          },
          py::arg("columns"), py::arg("k"));
    m.def("select_herding",
          [](py::array_t<double> columns, int k) {
              return selection_to_dict(
                  coreset::select_herding(matrix_from_array(std::move(columns)), k));
          },
          py::arg("columns"), py::arg("k"));

    m.def("centroid_spread", [](py::array_t<double> columns) {
        return report::centroid_spread(matrix_from_array(std::move(columns)));
    });

    // Full experiments from a config JSON string; the report comes back as JSON.
    m.def("run_experiment",
          [](const std::string& config_json) {
              auto config = pipeline::ExperimentConfig::from_json_text(config_json);
              return pipeline::run_experiment(config).to_json_text();
          },
          py::arg("config_json"));
    m.def("config_hash", [](const std::string& config_json) {
        return pipeline::ExperimentConfig::from_json_text(config_json).config_hash();
    });
}
