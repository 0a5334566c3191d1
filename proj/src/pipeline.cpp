#include "picore/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "picore/dataset_io.hpp"
#include "picore/report.hpp"
#include "picore/rng.hpp"
#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

namespace picore::pipeline {

using nlohmann::json;

namespace {
using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}
}  // namespace

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::Picore: return "picore";
        case Mode::Supervised: return "supervised";
        case Mode::Unsupervised: return "unsupervised";
        case Mode::Full: return "full";
    }
    return "unknown";
}

std::string to_string(Selector selector) {
    switch (selector) {
        case Selector::Craig: return "craig";
        case Selector::GradMatch: return "gradmatch";
        case Selector::AdaCore: return "adacore";
        case Selector::El2n: return "el2n";
        case Selector::Grand: return "grand";
        case Selector::Kmeans: return "kmeans";
        case Selector::Cosine: return "cosine";
        case Selector::Herding: return "herding";
    }
    return "unknown";
}

Mode mode_from_string(const std::string& name) {
    for (Mode m : {Mode::Picore, Mode::Supervised, Mode::Unsupervised, Mode::Full})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown mode: " + name);
}

Selector selector_from_string(const std::string& name) {
    for (Selector s : {Selector::Craig, Selector::GradMatch, Selector::AdaCore,
                       Selector::El2n, Selector::Grand, Selector::Kmeans, Selector::Cosine,
                       Selector::Herding})
        if (to_string(s) == name) return s;
    throw ConfigError("unknown selector: " + name);
}

bool selector_uses_features(Selector s) {
    return s == Selector::Craig || s == Selector::GradMatch || s == Selector::AdaCore ||
           s == Selector::El2n || s == Selector::Grand;
}

void ExperimentConfig::apply_defaults() {
    if (gen_resolution == 0)
        gen_resolution = (kind == PdeKind::Darcy) ? resolution
                         : std::max(resolution, 256);
    if (n_time == 0) n_time = (kind == PdeKind::NavierStokes) ? 21
                              : (kind == PdeKind::Darcy ? 0 : 41);
    if (t_final == 0.0) t_final = (kind == PdeKind::NavierStokes) ? 1.0
                                  : (kind == PdeKind::Darcy ? 0.0 : 2.0);
    if (modes == 0) modes = (kind == PdeKind::Advection || kind == PdeKind::Burgers) ? 16 : 12;
}

void ExperimentConfig::validate() const {
    if (n_train < 1 || n_test < 1) throw ConfigError("config: need n_train, n_test >= 1");
    if (beta <= 0.0 || beta > 1.0) throw ConfigError("config: beta must be in (0, 1]");
    if (warmup_epochs < 0 || epochs < 1) throw ConfigError("config: bad epoch counts");
    if (warmup_epochs >= epochs)
        throw ConfigError("config: warmup epochs T_w must be < training epochs T");
    if (resolution < 4) throw ConfigError("config: resolution too small");
    if (gen_resolution % resolution != 0)
        throw ConfigError("config: gen_resolution must be a multiple of resolution");
    if (mode == Mode::Unsupervised && selector_uses_features(algorithm))
        throw ConfigError("config: unsupervised mode needs kmeans/cosine/herding");
    if (mode != Mode::Unsupervised && mode != Mode::Full && !selector_uses_features(algorithm))
        throw ConfigError("config: " + to_string(algorithm) +
                          " is an input-space baseline; use mode=unsupervised");
    if (mode == Mode::Picore && scoring_loss && *scoring_loss == fno::LossKind::Data)
        throw SelectorLabelRequired(
            "config: data-loss scoring needs labels; picore mode is label-free");
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["kind"] = picore::to_string(kind);
    j["n_train"] = n_train;
    j["n_test"] = n_test;
    j["resolution"] = resolution;
    j["gen_resolution"] = gen_resolution;
    j["n_time"] = n_time;
    j["t_final"] = t_final;
    j["modes"] = modes;
    j["width"] = width;
    j["n_layers"] = n_layers;
    j["mode"] = to_string(mode);
    j["algorithm"] = to_string(algorithm);
    j["beta"] = beta;
    j["warmup_epochs"] = warmup_epochs;
    j["epochs"] = epochs;
    j["pi"] = {{"lambda", pi.lambda}, {"mu", pi.mu}};
    j["lr"] = lr;
    j["batch_size"] = batch_size;
    if (scoring_loss) j["scoring_loss"] = fno::to_string(*scoring_loss);
    j["n_seeds"] = n_seeds;
    j["init_seed"] = init_seed;
    j["shuffle_seed"] = shuffle_seed;
    j["selection_seed"] = selection_seed;
    j["data_seed"] = data_seed;
    j["advection_speed"] = advection_speed;
    j["burgers_nu"] = burgers_nu;
    j["ns_nu"] = ns_nu;
    j["darcy_beta"] = darcy_beta;
    if (cost_model.enabled) {
        j["cost_model"] = {{"sim_seconds_per_sample", cost_model.sim_seconds_per_sample},
                           {"train_seconds_per_sample_epoch",
                            cost_model.train_seconds_per_sample_epoch},
                           {"warmup_seconds_per_sample_epoch",
                            cost_model.warmup_seconds_per_sample_epoch},
                           {"scoring_seconds_per_sample",
                            cost_model.scoring_seconds_per_sample},
                           {"selection_seconds", cost_model.selection_seconds}};
    }
    return j.dump();
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig c;
    static const std::vector<std::string> known = {
        "kind", "n_train", "n_test", "resolution", "gen_resolution", "n_time", "t_final",
        "modes", "width", "n_layers", "mode", "algorithm", "beta", "warmup_epochs",
        "epochs", "pi", "lr", "batch_size", "scoring_loss", "n_seeds", "init_seed",
        "shuffle_seed", "selection_seed", "data_seed", "advection_speed", "burgers_nu",
        "ns_nu", "darcy_beta", "cost_model", "max_workers"};
    for (auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("config: unknown field '" + key + "'");
    }
    if (j.contains("kind")) c.kind = pde_kind_from_string(j["kind"].get<std::string>());
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.resolution = j.value("resolution", c.resolution);
    c.gen_resolution = j.value("gen_resolution", c.gen_resolution);
    c.n_time = j.value("n_time", c.n_time);
    c.t_final = j.value("t_final", c.t_final);
    c.modes = j.value("modes", c.modes);
    c.width = j.value("width", c.width);
    c.n_layers = j.value("n_layers", c.n_layers);
    if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
    if (j.contains("algorithm"))
        c.algorithm = selector_from_string(j["algorithm"].get<std::string>());
    c.beta = j.value("beta", c.beta);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("pi")) {
        c.pi.lambda = j["pi"].value("lambda", 1.0);
        c.pi.mu = j["pi"].value("mu", 1.0);
    }
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("scoring_loss"))
        c.scoring_loss = j["scoring_loss"].get<std::string>() == "data"
                             ? fno::LossKind::Data
                             : fno::LossKind::Physics;
    c.n_seeds = j.value("n_seeds", c.n_seeds);
    c.init_seed = j.value("init_seed", c.init_seed);
    c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
    c.selection_seed = j.value("selection_seed", c.selection_seed);
    c.data_seed = j.value("data_seed", c.data_seed);
    c.advection_speed = j.value("advection_speed", c.advection_speed);
    c.burgers_nu = j.value("burgers_nu", c.burgers_nu);
    c.ns_nu = j.value("ns_nu", c.ns_nu);
    c.darcy_beta = j.value("darcy_beta", c.darcy_beta);
    c.max_workers = j.value("max_workers", c.max_workers);
    if (j.contains("cost_model")) {
        const json& m = j["cost_model"];
        c.cost_model.enabled = true;
        c.cost_model.sim_seconds_per_sample = m.value("sim_seconds_per_sample", 0.0);
        c.cost_model.train_seconds_per_sample_epoch =
            m.value("train_seconds_per_sample_epoch", 0.0);
        c.cost_model.warmup_seconds_per_sample_epoch =
            m.value("warmup_seconds_per_sample_epoch", 0.0);
        c.cost_model.scoring_seconds_per_sample = m.value("scoring_seconds_per_sample", 0.0);
        c.cost_model.selection_seconds = m.value("selection_seconds", 0.0);
    }
    return c;
}

std::string ExperimentConfig::config_hash() const {
    // Hash the fully resolved config so defaults cannot silently drift.
    ExperimentConfig resolved = *this;
    resolved.apply_defaults();
    return io::hash_hex(resolved.canonical_json());
}

CostLedger CostLedger::modeled(const SyntheticCostModel& model) const {
    CostLedger m = *this;
    m.sim_seconds_total = model.sim_seconds_per_sample * static_cast<double>(sim_calls);
    m.warmup_seconds =
        model.warmup_seconds_per_sample_epoch * static_cast<double>(warmup_sample_epochs);
    m.scoring_seconds =
        model.scoring_seconds_per_sample * static_cast<double>(scored_samples);
    m.selection_seconds = selection_seconds > 0.0 ? model.selection_seconds : 0.0;
    m.training_seconds =
        model.train_seconds_per_sample_epoch * static_cast<double>(train_sample_epochs);
    return m;
}

double account_costs(const CostLedger& baseline, const CostLedger& candidate) {
    double denom = candidate.total_seconds();
    if (denom <= 0.0) throw ZeroDenominator("account_costs: candidate total is zero");
    return baseline.total_seconds() / denom;
}

namespace {

GridSpec make_grid(const ExperimentConfig& c, int n_points) {
    GridSpec grid;
    grid.spatial_dims = (c.kind == PdeKind::Advection || c.kind == PdeKind::Burgers) ? 1 : 2;
    grid.n_points = n_points;
    grid.domain_length = 1.0;
    grid.n_time = c.n_time;
    grid.t_final = c.t_final;
    grid.periodic = c.kind != PdeKind::Darcy;
    return grid;
}

PdeInstance make_instance(const ExperimentConfig& c, const GridSpec& grid, uint64_t seed) {
    PdeInstance instance;
    instance.kind = c.kind;
    instance.grid = grid;
    switch (c.kind) {
        case PdeKind::Advection:
            instance.params.beta = c.advection_speed;
            instance.input = pde::sample_sinusoidal_ic(seed, grid);
            break;
        case PdeKind::Burgers:
            instance.params.nu = c.burgers_nu;
            instance.input = pde::sample_sinusoidal_ic(seed, grid);
            break;
        case PdeKind::Darcy:
            instance.params.beta = c.darcy_beta;
            instance.input = pde::sample_darcy_coefficient(seed, grid);
            break;
        case PdeKind::NavierStokes:
            instance.params.nu = c.ns_nu;
            instance.input = pde::sample_ns_vorticity(seed, grid);
            break;
    }
    return instance;
}

PdeInstance downsample_instance(const PdeInstance& fine, int factor) {
    if (factor == 1) return fine;
    PdeInstance coarse = fine;
    coarse.input = pde::downsample(fine.input, factor);
    coarse.grid = coarse.input.grid;
    return coarse;
}

/// Counts solver invocations and accumulates simulated seconds; the lazy
/// labeling contract is verified against these counters.
struct LabelingService {
    const ExperimentConfig& config;
    int factor;

    int64_t calls = 0;
    double seconds = 0.0;

    Field label(const PdeInstance& fine_instance) {
        LabeledSample solved = pde::solve(fine_instance);
        ++calls;
        seconds += solved.sim_seconds;
        return factor == 1 ? std::move(solved.solution)
                           : pde::downsample(solved.solution, factor);
    }

    /// Parallel labeling of selected train indices, deterministic order.
    void label_many(Dataset& coarse, const std::vector<PdeInstance>& fine,
                    const std::vector<int>& indices) {
        std::vector<PdeInstance> batch;
        batch.reserve(indices.size());
        for (int i : indices) batch.push_back(fine[i]);
        auto solved = pde::solve_many(batch, config.max_workers);
        for (size_t p = 0; p < indices.size(); ++p) {
            ++calls;
            seconds += solved[p].sim_seconds;
            coarse.labels[indices[p]] =
                factor == 1 ? std::move(solved[p].solution)
                            : pde::downsample(solved[p].solution, factor);
        }
    }
};

}  // namespace

ExperimentData build_experiment_data(const ExperimentConfig& config) {
    GridSpec fine_grid = make_grid(config, config.gen_resolution);
    int factor = config.gen_resolution / config.resolution;

    ExperimentData data;
    data.train_seeds.reserve(config.n_train);
    for (int i = 0; i < config.n_train; ++i) {
        uint64_t seed = mix_seed(config.data_seed, static_cast<uint64_t>(i));
        data.train_seeds.push_back(seed);
        PdeInstance fine = make_instance(config, fine_grid, seed);
        data.train.instances.push_back(downsample_instance(fine, factor));
    }
    data.train.labels.resize(config.n_train);

    for (int i = 0; i < config.n_test; ++i) {
        uint64_t seed = mix_seed(config.data_seed, 1000000ULL + static_cast<uint64_t>(i));
        PdeInstance fine = make_instance(config, fine_grid, seed);
        LabeledSample solved = pde::solve(fine);
        data.test.instances.push_back(downsample_instance(fine, factor));
        data.test.labels.push_back(factor == 1
                                       ? std::move(solved.solution)
                                       : pde::downsample(solved.solution, factor));
    }
    return data;
}

namespace {

struct FineInstances {
    std::vector<PdeInstance> fine;  ///< generation-resolution instances for labeling
};

FineInstances rebuild_fine(const ExperimentConfig& config,
                           const std::vector<uint64_t>& seeds) {
    GridSpec fine_grid = make_grid(config, config.gen_resolution);
    FineInstances out;
    out.fine.reserve(seeds.size());
    for (uint64_t seed : seeds) out.fine.push_back(make_instance(config, fine_grid, seed));
    return out;
}

std::vector<int> all_indices(int n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

Eigen::MatrixXd flattened_inputs(const Dataset& dataset) {
    int64_t n = dataset.size();
    int64_t d = dataset.instances[0].input.size();
    Eigen::MatrixXd m(d, n);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t r = 0; r < d; ++r) m(r, i) = dataset.instances[i].input.values[r];
    return m;
}

coreset::CoresetSelection run_selector(const ExperimentConfig& config,
                                       const coreset::FeatureMatrix& features, int k,
                                       uint64_t seed, const fno::FnoParams& params,
                                       const Dataset& train, fno::LossKind scoring) {
    switch (config.algorithm) {
        case Selector::Craig: return coreset::select_craig(features, k, 0, seed);
        case Selector::GradMatch: return coreset::select_gradmatch(features, k);
        case Selector::AdaCore: {
            auto hvp = [&](const std::vector<double>& v) {
                return fno::last_layer_hvp(params, train, all_indices(train.size()), scoring,
                                           config.pi, v, config.max_workers);
            };
            auto diag = coreset::hutchinson_diag(hvp, static_cast<int>(features.dim()), 10,
                                                 mix_seed(seed, 77));
            return coreset::select_adacore(features, k, diag, 1e-6, 0, seed);
        }
        case Selector::El2n: {
            std::vector<double> losses(features.per_sample_loss.data(),
                                       features.per_sample_loss.data() + features.n());
            return coreset::select_el2n(losses, k);
        }
        case Selector::Grand: return coreset::select_grand(features, k);
        default:
            throw ConfigError("run_selector: " + to_string(config.algorithm) +
                              " is not a feature-based selector");
    }
}

/// Shared run skeleton; the mode knobs are label_all_upfront / warm_start /
/// feature-vs-input selection.
ExperimentReport run_impl(const ExperimentConfig& base) {
    ExperimentConfig config = base;
    config.apply_defaults();
    config.validate();

    ExperimentReport report;
    report.config = config;
    report.config_hash = config.config_hash();
    report.tool_version = io::kToolVersion;

    ExperimentData data = build_experiment_data(config);
    FineInstances fine = rebuild_fine(config, data.train_seeds);
    std::vector<int> test_idx = all_indices(config.n_test);

    fno::LossKind scoring = config.scoring_loss.value_or(
        config.mode == Mode::Supervised ? fno::LossKind::Data : fno::LossKind::Physics);

    for (int seed_index = 0; seed_index < config.n_seeds; ++seed_index) {
        SeedRun run;
        run.seed_index = seed_index;
        CostLedger& ledger = run.ledger;

        uint64_t init_seed = mix_seed(config.init_seed, seed_index);
        uint64_t shuffle_seed = mix_seed(config.shuffle_seed, seed_index);
        uint64_t selection_seed = mix_seed(config.selection_seed, seed_index);

        Dataset train = data.train;  // labels reset per seed run
        LabelingService labeler{config, config.gen_resolution / config.resolution};

        int n = config.n_train;
        int k = config.mode == Mode::Full ? n
                                          : static_cast<int>(std::ceil(config.beta * n));

        fno::FnoConfig net_config = fno::FnoConfig::for_task(
            config.kind, train.instances[0].grid, config.modes, config.width,
            config.n_layers);
        fno::FnoParams params = fno::fno_init(net_config, init_seed);
        const std::vector<double> initial_flat = params.flatten();

        if (config.mode == Mode::Supervised || config.mode == Mode::Full) {
            labeler.label_many(train, fine.fine, all_indices(n));
            ledger.sim_seconds_total = labeler.seconds;
        }

        coreset::CoresetSelection selection;
        if (config.mode == Mode::Full) {
            selection.indices = all_indices(n);
            selection.weights.assign(n, 1.0);
            selection.algorithm = "full";
            selection.budget_fraction = 1.0;
        } else if (config.mode == Mode::Unsupervised) {
            auto sel_start = Clock::now();
            Eigen::MatrixXd inputs = flattened_inputs(train);
            switch (config.algorithm) {
                case Selector::Kmeans:
                    selection = coreset::select_kmeans(inputs, k, 100, selection_seed);
                    break;
                case Selector::Cosine: selection = coreset::select_cosine(inputs, k); break;
                case Selector::Herding: selection = coreset::select_herding(inputs, k); break;
                default: throw ConfigError("unsupervised mode needs an input-space selector");
            }
            ledger.selection_seconds = elapsed_seconds(sel_start);
        } else {
            // Warm-start.
            fno::TrainOptions warm;
            warm.epochs = config.warmup_epochs;
            warm.loss_kind = scoring;
            warm.lr = config.lr;
            warm.cosine_decay = false;
            warm.batch_size = config.batch_size;
            warm.shuffle_seed = mix_seed(shuffle_seed, 99);
            warm.pi = config.pi;
            warm.max_workers = config.max_workers;
            auto warm_start = Clock::now();
            auto warm_records = fno::train(params, train, all_indices(n),
                                           std::vector<double>(n, 1.0), warm);
            ledger.warmup_seconds = elapsed_seconds(warm_start);
            ledger.warmup_sample_epochs =
                static_cast<int64_t>(config.warmup_epochs) * n;
            if (!warm_records.empty()) run.final_warmup_loss = warm_records.back().loss;

            // Score + select.
            auto score_start = Clock::now();
            coreset::FeatureMatrix features = fno::per_sample_features(
                params, train, all_indices(n), scoring, config.pi, config.max_workers);
            ledger.scoring_seconds = elapsed_seconds(score_start);
            ledger.scored_samples = n;

            auto sel_start = Clock::now();
            selection = run_selector(config, features, k, selection_seed, params, train,
                                     scoring);
            // GradMatch may prune zero weights; top up with the
            // highest-scoring unselected samples at unit weight.
            if (static_cast<int>(selection.indices.size()) < k) {
                std::vector<char> chosen(n, 0);
                for (int i : selection.indices) chosen[i] = 1;
                std::vector<int> order = all_indices(n);
                std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                    if (features.per_sample_loss(a) != features.per_sample_loss(b))
                        return features.per_sample_loss(a) > features.per_sample_loss(b);
                    return a < b;
                });
                for (int cand : order) {
                    if (static_cast<int>(selection.indices.size()) >= k) break;
                    if (!chosen[cand]) {
                        selection.indices.push_back(cand);
                        selection.weights.push_back(1.0);
                        chosen[cand] = 1;
                    }
                }
            }
            ledger.selection_seconds = elapsed_seconds(sel_start);
        }
        selection.seed = selection_seed;
        selection.budget_fraction = config.mode == Mode::Full ? 1.0 : config.beta;

        // Lazy labeling: only the selection (supervised/full already labeled all).
        if (config.mode == Mode::Picore || config.mode == Mode::Unsupervised) {
            std::vector<int> to_label;
            for (int i : selection.indices)
                if (!train.has_label(i)) to_label.push_back(i);
            labeler.label_many(train, fine.fine, to_label);
            ledger.sim_seconds_total = labeler.seconds;
        }
        ledger.sim_calls = labeler.calls;
        ledger.n_labeled = (config.mode == Mode::Supervised || config.mode == Mode::Full)
                               ? n
                               : static_cast<int64_t>(selection.indices.size());

        // Reset to the recorded initialization, then train on the selection.
        params.assign_flat(initial_flat);
        fno::TrainOptions opts;
        opts.epochs = config.epochs;
        opts.loss_kind = fno::LossKind::Data;
        opts.lr = config.lr;
        opts.cosine_decay = true;
        opts.batch_size = config.batch_size;
        opts.shuffle_seed = shuffle_seed;
        opts.pi = config.pi;
        opts.max_workers = config.max_workers;
        auto train_start = Clock::now();
        auto records = fno::train(params, train, selection.indices, selection.weights, opts);
        ledger.training_seconds = elapsed_seconds(train_start);
        ledger.train_sample_epochs =
            static_cast<int64_t>(config.epochs) * selection.indices.size();
        if (!records.empty()) run.final_train_loss = records.back().loss;

        run.test_nrmse = fno::mean_test_nrmse(params, data.test, test_idx,
                                              config.max_workers);
        if (config.keep_final_params) run.final_params = params;

        // Coverage proxy of the selected inputs (centroid-distance analysis).
        {
            int64_t d = train.instances[0].input.size();
            Eigen::MatrixXd selected(d, selection.indices.size());
            for (size_t c = 0; c < selection.indices.size(); ++c)
                for (int64_t r = 0; r < d; ++r)
                    selected(r, c) = train.instances[selection.indices[c]].input.values[r];
            run.selection_centroid_spread = report::centroid_spread(selected);
        }
        run.selection = std::move(selection);
        run.modeled_ledger = config.cost_model.enabled ? ledger.modeled(config.cost_model)
                                                       : ledger;
        report.runs.push_back(std::move(run));
    }

    double mean = 0.0;
    for (const SeedRun& r : report.runs) mean += r.test_nrmse;
    mean /= report.runs.size();
    report.test_nrmse_mean = mean;
    if (report.runs.size() > 1) {
        double var = 0.0;
        for (const SeedRun& r : report.runs) {
            double d = r.test_nrmse - mean;
            var += d * d;
        }
        var /= (report.runs.size() - 1);
        report.test_nrmse_stderr = std::sqrt(var / report.runs.size());
    }
    return report;
}

}  // namespace

ExperimentReport run_picore(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.mode = Mode::Picore;
    return run_impl(c);
}

ExperimentReport run_supervised(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.mode = Mode::Supervised;
    return run_impl(c);
}

ExperimentReport run_unsupervised_baseline(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.mode = Mode::Unsupervised;
    return run_impl(c);
}

ExperimentReport run_full(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.mode = Mode::Full;
    return run_impl(c);
}

ExperimentReport run_experiment(const ExperimentConfig& config) { return run_impl(config); }

CostLedger ExperimentReport::mean_ledger() const {
    CostLedger mean;
    for (const SeedRun& r : runs) {
        mean.sim_seconds_total += r.ledger.sim_seconds_total;
        mean.warmup_seconds += r.ledger.warmup_seconds;
        mean.scoring_seconds += r.ledger.scoring_seconds;
        mean.selection_seconds += r.ledger.selection_seconds;
        mean.training_seconds += r.ledger.training_seconds;
        mean.n_labeled += r.ledger.n_labeled;
        mean.sim_calls += r.ledger.sim_calls;
        mean.warmup_sample_epochs += r.ledger.warmup_sample_epochs;
        mean.train_sample_epochs += r.ledger.train_sample_epochs;
        mean.scored_samples += r.ledger.scored_samples;
    }
    double n = static_cast<double>(runs.size());
    mean.sim_seconds_total /= n;
    mean.warmup_seconds /= n;
    mean.scoring_seconds /= n;
    mean.selection_seconds /= n;
    mean.training_seconds /= n;
    mean.n_labeled = static_cast<int64_t>(mean.n_labeled / runs.size());
    mean.sim_calls = static_cast<int64_t>(mean.sim_calls / runs.size());
    mean.warmup_sample_epochs = static_cast<int64_t>(mean.warmup_sample_epochs / runs.size());
    mean.train_sample_epochs = static_cast<int64_t>(mean.train_sample_epochs / runs.size());
    mean.scored_samples = static_cast<int64_t>(mean.scored_samples / runs.size());
    return mean;
}

CostLedger ExperimentReport::mean_modeled_ledger() const {
    return config.cost_model.enabled ? mean_ledger().modeled(config.cost_model)
                                     : mean_ledger();
}

namespace {

json ledger_to_json(const CostLedger& l) {
    return json{{"sim_seconds_total", l.sim_seconds_total},
                {"warmup_seconds", l.warmup_seconds},
                {"scoring_seconds", l.scoring_seconds},
                {"selection_seconds", l.selection_seconds},
                {"training_seconds", l.training_seconds},
                {"n_labeled", l.n_labeled},
                {"sim_calls", l.sim_calls},
                {"warmup_sample_epochs", l.warmup_sample_epochs},
                {"train_sample_epochs", l.train_sample_epochs},
                {"scored_samples", l.scored_samples}};
}

CostLedger ledger_from_json(const json& j) {
    CostLedger l;
    l.sim_seconds_total = j.at("sim_seconds_total").get<double>();
    l.warmup_seconds = j.at("warmup_seconds").get<double>();
    l.scoring_seconds = j.at("scoring_seconds").get<double>();
    l.selection_seconds = j.at("selection_seconds").get<double>();
    l.training_seconds = j.at("training_seconds").get<double>();
    l.n_labeled = j.at("n_labeled").get<int64_t>();
    l.sim_calls = j.at("sim_calls").get<int64_t>();
    l.warmup_sample_epochs = j.at("warmup_sample_epochs").get<int64_t>();
    l.train_sample_epochs = j.at("train_sample_epochs").get<int64_t>();
    l.scored_samples = j.at("scored_samples").get<int64_t>();
    return l;
}

}  // namespace

std::string ExperimentReport::to_json_text() const {
    json j;
    j["config"] = json::parse(config.canonical_json());
    j["config_hash"] = config_hash;
    j["tool_version"] = tool_version;
    j["test_nrmse_mean"] = test_nrmse_mean;
    j["test_nrmse_stderr"] = test_nrmse_stderr;
    if (acceleration > 0.0) j["acceleration"] = acceleration;
    json runs_json = json::array();
    for (const SeedRun& r : runs) {
        json rj;
        rj["seed_index"] = r.seed_index;
        rj["test_nrmse"] = r.test_nrmse;
        rj["final_train_loss"] = r.final_train_loss;
        rj["final_warmup_loss"] = r.final_warmup_loss;
        rj["selection_centroid_spread"] = r.selection_centroid_spread;
        rj["selection"] = {{"algorithm", r.selection.algorithm},
                           {"beta", r.selection.budget_fraction},
                           {"seed", r.selection.seed},
                           {"indices", r.selection.indices},
                           {"weights", r.selection.weights}};
        rj["ledger"] = ledger_to_json(r.ledger);
        rj["modeled_ledger"] = ledger_to_json(r.modeled_ledger);
        runs_json.push_back(std::move(rj));
    }
    j["runs"] = std::move(runs_json);
    return j.dump(2);
}

ExperimentReport ExperimentReport::from_json_text(const std::string& text) {
    json j = json::parse(text);
    ExperimentReport report;
    report.config = ExperimentConfig::from_json_text(j.at("config").dump());
    report.config_hash = j.at("config_hash").get<std::string>();
    report.tool_version = j.at("tool_version").get<std::string>();
    report.test_nrmse_mean = j.at("test_nrmse_mean").get<double>();
    report.test_nrmse_stderr = j.at("test_nrmse_stderr").get<double>();
    report.acceleration = j.value("acceleration", 0.0);
    for (const json& rj : j.at("runs")) {
        SeedRun r;
        r.seed_index = rj.at("seed_index").get<int>();
        r.test_nrmse = rj.at("test_nrmse").get<double>();
        r.final_train_loss = rj.value("final_train_loss", 0.0);
        r.final_warmup_loss = rj.value("final_warmup_loss", 0.0);
        r.selection_centroid_spread = rj.value("selection_centroid_spread", 0.0);
        const json& sj = rj.at("selection");
        r.selection.algorithm = sj.at("algorithm").get<std::string>();
        r.selection.budget_fraction = sj.at("beta").get<double>();
        r.selection.seed = sj.at("seed").get<uint64_t>();
        r.selection.indices = sj.at("indices").get<std::vector<int>>();
        r.selection.weights = sj.at("weights").get<std::vector<double>>();
        r.ledger = ledger_from_json(rj.at("ledger"));
        r.modeled_ledger = ledger_from_json(rj.at("modeled_ledger"));
        report.runs.push_back(std::move(r));
    }
    return report;
}

}  // namespace picore::pipeline
