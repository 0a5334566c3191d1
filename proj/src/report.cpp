#include "picore/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "picore/rng.hpp"
#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

namespace picore::report {

double evaluate_super_resolution(const fno::FnoParams& params, const Dataset& fine_dataset,
                                 int max_workers) {
    std::vector<int> idx(fine_dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    return fno::mean_test_nrmse(params, fine_dataset, idx, max_workers);
}

Dataset build_super_resolution_testset(const pipeline::ExperimentConfig& base,
                                       int super_resolution) {
    pipeline::ExperimentConfig config = base;
    config.apply_defaults();
    if (super_resolution < config.resolution)
        throw ConfigError("super resolution must be >= the training resolution");
    config.resolution = super_resolution;
    if (config.gen_resolution % super_resolution != 0)
        config.gen_resolution =
            std::max(config.gen_resolution, super_resolution);
    if (config.gen_resolution % super_resolution != 0)
        throw ConfigError("generation resolution incompatible with super resolution");
    pipeline::ExperimentData data = pipeline::build_experiment_data(config);
    return std::move(data.test);
}

double centroid_spread(const Eigen::MatrixXd& selected_inputs) {
    if (selected_inputs.cols() < 1) throw ConfigError("centroid_spread: no vectors");
    Eigen::VectorXd centroid = selected_inputs.rowwise().mean();
    double total = 0.0;
    for (int64_t i = 0; i < selected_inputs.cols(); ++i)
        total += (selected_inputs.col(i) - centroid).norm();
    return total / static_cast<double>(selected_inputs.cols());
}

namespace {

std::string format_double(double v) {
    // Shortest representation that round-trips exactly.
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

}  // namespace

std::string runs_csv(const std::vector<pipeline::ExperimentReport>& reports) {
    std::ostringstream out;
    out << "kind,mode,algorithm,beta,seed_index,test_nrmse,n_labeled,sim_calls,"
           "sim_seconds,warmup_seconds,scoring_seconds,selection_seconds,"
           "training_seconds,total_seconds,selection_centroid_spread,config_hash\n";
    for (const auto& report : reports) {
        const auto& c = report.config;
        for (const auto& run : report.runs) {
            const auto& l = run.ledger;
            out << picore::to_string(c.kind) << ',' << to_string(c.mode) << ','
                << (c.mode == pipeline::Mode::Full ? "full" : to_string(c.algorithm)) << ','
                << format_double(c.mode == pipeline::Mode::Full ? 1.0 : c.beta) << ','
                << run.seed_index << ',' << format_double(run.test_nrmse) << ','
                << l.n_labeled << ',' << l.sim_calls << ','
                << format_double(l.sim_seconds_total) << ','
                << format_double(l.warmup_seconds) << ','
                << format_double(l.scoring_seconds) << ','
                << format_double(l.selection_seconds) << ','
                << format_double(l.training_seconds) << ','
                << format_double(l.total_seconds()) << ','
                << format_double(run.selection_centroid_spread) << ','
                << report.config_hash << '\n';
        }
    }
    return out.str();
}

RenderedTables render_report(const std::vector<pipeline::ExperimentReport>& reports) {
    if (reports.empty()) throw ConfigError("render_report: no reports");

    const auto& first = reports.front().config;
    for (const auto& r : reports) {
        if (r.config.kind != first.kind || r.config.resolution != first.resolution ||
            r.config.width != first.width || r.config.modes != first.modes)
            throw MixedDatasets("render_report: reports span different datasets/operators");
    }

    // Rows keyed by (mode, algorithm); columns are ascending beta fractions.
    std::set<double> beta_set;
    for (const auto& r : reports)
        beta_set.insert(r.config.mode == pipeline::Mode::Full ? 1.0 : r.config.beta);
    std::vector<double> betas(beta_set.begin(), beta_set.end());

    struct RowKey {
        std::string mode, algorithm;
        bool operator<(const RowKey& o) const {
            return std::tie(mode, algorithm) < std::tie(o.mode, o.algorithm);
        }
    };
    std::map<RowKey, std::map<double, double>> cells;
    std::map<RowKey, std::map<double, double>> accel;
    for (const auto& r : reports) {
        RowKey key{to_string(r.config.mode),
                   r.config.mode == pipeline::Mode::Full ? "full"
                                                         : to_string(r.config.algorithm)};
        double beta = r.config.mode == pipeline::Mode::Full ? 1.0 : r.config.beta;
        cells[key][beta] = r.test_nrmse_mean;
        if (r.acceleration > 0.0) accel[key][beta] = r.acceleration;
    }

    std::ostringstream csv;
    csv << "mode,algorithm";
    for (double b : betas) csv << "," << format_double(b);
    csv << "\n";
    for (const auto& [key, row] : cells) {
        csv << key.mode << "," << key.algorithm;
        for (double b : betas) {
            csv << ",";
            auto it = row.find(b);
            if (it != row.end()) csv << format_double(it->second);
        }
        csv << "\n";
    }
    for (const auto& [key, row] : accel) {
        csv << key.mode << "," << key.algorithm << "_acceleration";
        for (double b : betas) {
            csv << ",";
            auto it = row.find(b);
            if (it != row.end()) csv << format_double(it->second);
        }
        csv << "\n";
    }

    std::ostringstream md;
    md << "| Mode | Algorithm |";
    for (double b : betas) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), " %.0f%% |", b * 100.0);
        md << buf;
    }
    md << "\n|---|---|";
    for (size_t i = 0; i < betas.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& [key, row] : cells) {
        md << "| " << key.mode << " | " << key.algorithm << " |";
        for (double b : betas) {
            auto it = row.find(b);
            md << " " << (it != row.end() ? format_cell(it->second) : "-") << " |";
        }
        md << "\n";
        auto ait = accel.find(key);
        if (ait != accel.end()) {
            md << "| " << key.mode << " | " << key.algorithm << " (accel) |";
            for (double b : betas) {
                auto it = ait->second.find(b);
                if (it != ait->second.end()) {
                    char buf[24];
                    std::snprintf(buf, sizeof(buf), " %.2fx |", it->second);
                    md << buf;
                } else {
                    md << " - |";
                }
            }
            md << "\n";
        }
    }

    return {csv.str(), md.str()};
}

}  // namespace picore::report
