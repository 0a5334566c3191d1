#pragma once

#include <string>
#include <vector>

#include "picore/pipeline.hpp"

namespace picore::report {

/// Zero-shot super-resolution: evaluate a trained operator on a dataset at a
/// higher resolution than it was trained on. Ground truth must be present at
/// that resolution (generated at the fine grid, not upsampled).
double evaluate_super_resolution(const fno::FnoParams& params, const Dataset& fine_dataset,
                                 int max_workers = 0);

/// Build the fine-resolution labeled test set for a config (fresh simulation
/// at super_resolution, downsampled from the generation grid when needed).
Dataset build_super_resolution_testset(const pipeline::ExperimentConfig& config,
                                       int super_resolution);

/// Mean Euclidean distance of the columns to their arithmetic centroid.
double centroid_spread(const Eigen::MatrixXd& selected_inputs);

/// Rendered comparison tables: rows = algorithm, columns = ascending beta,
/// cells = mean test NRMSE; per-mode acceleration rows appended when ledgers
/// carry a synthetic cost model.
struct RenderedTables {
    std::string csv;
    std::string markdown;
};
RenderedTables render_report(const std::vector<pipeline::ExperimentReport>& reports);

/// Flat CSV, one row per config x seed, with metrics, the ledger and the
/// config hash.
std::string runs_csv(const std::vector<pipeline::ExperimentReport>& reports);

}  // namespace picore::report
