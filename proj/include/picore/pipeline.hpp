#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "picore/coreset.hpp"
#include "picore/fno.hpp"
#include "picore/grid.hpp"

namespace picore::pipeline {

enum class Mode { Picore, Supervised, Unsupervised, Full };
enum class Selector { Craig, GradMatch, AdaCore, El2n, Grand, Kmeans, Cosine, Herding };

std::string to_string(Mode mode);
std::string to_string(Selector selector);
Mode mode_from_string(const std::string& name);
Selector selector_from_string(const std::string& name);

/// Whether the selector consumes network features (Appendix-style) or raw
/// flattened inputs (the unsupervised baselines).
bool selector_uses_features(Selector s);

/// Hardware-independent per-event cost rates; when enabled, the report also
/// carries a modeled ledger built from counted events.
struct SyntheticCostModel {
    bool enabled = false;
    double sim_seconds_per_sample = 0.0;
    double train_seconds_per_sample_epoch = 0.0;
    double warmup_seconds_per_sample_epoch = 0.0;
    double scoring_seconds_per_sample = 0.0;
    double selection_seconds = 0.0;
};

struct ExperimentConfig {
    PdeKind kind = PdeKind::Advection;
    int n_train = 256;
    int n_test = 64;  ///< held-out, always labeled, excluded from ledgers
    int resolution = 64;
    int gen_resolution = 0;  ///< 0: kind default (256 for periodic kinds, resolution for Darcy)
    int n_time = 0;          ///< 0: kind default (41 advection/burgers, 21 NS)
    double t_final = 0.0;    ///< 0: kind default (2.0 advection/burgers, 1.0 NS)

    int modes = 0;  ///< 0: 16 (1D) or 12 (2D)
    int width = 32;
    int n_layers = 4;

    Mode mode = Mode::Picore;
    Selector algorithm = Selector::El2n;
    double beta = 0.2;
    int warmup_epochs = 25;  ///< T_w
    int epochs = 500;        ///< T
    residuals::PiWeights pi;
    double lr = 1e-3;
    int batch_size = 16;
    std::optional<fno::LossKind> scoring_loss;  ///< default: physics (picore), data (supervised)

    int n_seeds = 1;
    uint64_t init_seed = 1;
    uint64_t shuffle_seed = 2;
    uint64_t selection_seed = 3;
    uint64_t data_seed = 4;

    double advection_speed = 1.0;
    double burgers_nu = 0.01;
    double ns_nu = 1e-3;
    double darcy_beta = 1.0;

    int max_workers = 0;
    SyntheticCostModel cost_model;
    bool keep_final_params = false;  ///< retain trained parameters in each SeedRun

    void apply_defaults();
    void validate() const;
    std::string canonical_json() const;
    static ExperimentConfig from_json_text(const std::string& text);
    std::string config_hash() const;
};

struct CostLedger {
    double sim_seconds_total = 0.0;
    double warmup_seconds = 0.0;
    double scoring_seconds = 0.0;
    double selection_seconds = 0.0;
    double training_seconds = 0.0;
    int64_t n_labeled = 0;

    // Event counts behind the synthetic cost model.
    int64_t sim_calls = 0;
    int64_t warmup_sample_epochs = 0;
    int64_t train_sample_epochs = 0;
    int64_t scored_samples = 0;

    double total_seconds() const {
        return sim_seconds_total + warmup_seconds + scoring_seconds + selection_seconds +
               training_seconds;
    }
    /// Ledger with seconds replaced by modeled event costs.
    CostLedger modeled(const SyntheticCostModel& model) const;
};

/// acceleration = baseline total / candidate total (sim + warmup + scoring +
/// selection + training on both sides).
double account_costs(const CostLedger& baseline, const CostLedger& candidate);

struct SeedRun {
    int seed_index = 0;
    double test_nrmse = 0.0;
    coreset::CoresetSelection selection;
    CostLedger ledger;
    CostLedger modeled_ledger;
    double final_train_loss = 0.0;
    double final_warmup_loss = 0.0;
    /// Mean distance of the selected inputs to their centroid (coverage proxy).
    double selection_centroid_spread = 0.0;
    std::optional<fno::FnoParams> final_params;  ///< kept on request, never serialized
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string config_hash;
    std::string tool_version;
    std::vector<SeedRun> runs;
    double test_nrmse_mean = 0.0;
    double test_nrmse_stderr = 0.0;
    double acceleration = 0.0;  ///< filled when a baseline ledger is supplied

    CostLedger mean_ledger() const;
    CostLedger mean_modeled_ledger() const;
    std::string to_json_text() const;
    static ExperimentReport from_json_text(const std::string& text);
};

/// The experiment dataset: train inputs (unlabeled), test inputs (labeled).
struct ExperimentData {
    Dataset train;
    Dataset test;
    std::vector<uint64_t> train_seeds;
};

/// Deterministic dataset construction from config.data_seed: sample inputs at
/// the generation resolution, solve where needed, downsample to the target
/// resolution. Test labels are always simulated (outside any ledger).
ExperimentData build_experiment_data(const ExperimentConfig& config);

/// Algorithm-1 run: physics warm-start on all inputs, label-free scoring and
/// selection, lazy labeling of the selection only, reset to the initial
/// parameters, weighted supervised training, evaluation.
ExperimentReport run_picore(const ExperimentConfig& config);

/// Same flow but all samples are simulated up front and warm-start/scoring
/// use the data loss.
ExperimentReport run_supervised(const ExperimentConfig& config);

/// Input-space selectors (kmeans/cosine/herding): no warm-start, selection on
/// raw flattened inputs, lazy labeling, then train/evaluate.
ExperimentReport run_unsupervised_baseline(const ExperimentConfig& config);

/// Non-coreset baseline: all samples labeled and trained on.
ExperimentReport run_full(const ExperimentConfig& config);

/// Dispatch on config.mode.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace picore::pipeline
