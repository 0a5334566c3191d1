#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "picore/dataset_io.hpp"
#include "picore/pipeline.hpp"
#include "picore/report.hpp"
#include "picore/rng.hpp"
#include "picore/sampling.hpp"
#include "picore/solvers.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace picore;

namespace {

pipeline::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return pipeline::ExperimentConfig::from_json_text(text);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

struct CommonFlags {
    std::string config_path;
    std::string mode;
    std::string algorithm;
    double beta = 0.0;
    uint64_t seed = 0;
    int resolution = 0;

    pipeline::ExperimentConfig resolve() const {
        pipeline::ExperimentConfig config;
        if (!config_path.empty()) config = load_config(config_path);
        if (!mode.empty()) config.mode = pipeline::mode_from_string(mode);
        if (!algorithm.empty()) config.algorithm = pipeline::selector_from_string(algorithm);
        if (beta > 0.0) config.beta = beta;
        if (seed > 0) {
            config.init_seed = seed;
            config.shuffle_seed = mix_seed(seed, 1);
            config.selection_seed = mix_seed(seed, 2);
        }
        if (resolution > 0) config.resolution = resolution;
        return config;
    }
};

int cmd_generate(const std::string& kind_name, int n, int resolution, int gen_resolution,
                 uint64_t seed, bool with_labels, int substeps, const std::string& out_dir) {
    pipeline::ExperimentConfig config;
    config.kind = pde_kind_from_string(kind_name);
    config.n_train = n;
    config.n_test = 1;  // build_experiment_data wants >= 1; the test split is discarded
    config.resolution = resolution;
    if (gen_resolution > 0) config.gen_resolution = gen_resolution;
    config.data_seed = seed;
    config.apply_defaults();

    pipeline::ExperimentData data = pipeline::build_experiment_data(config);
    Dataset& dataset = data.train;
    if (with_labels) {
        // Solve at the generation resolution, then downsample, matching the
        // dataset construction the pipeline uses.
        pipeline::ExperimentConfig fine_config = config;
        fine_config.resolution = config.gen_resolution;
        pipeline::ExperimentData fine = pipeline::build_experiment_data(fine_config);
        int factor = config.gen_resolution / config.resolution;
        for (int64_t i = 0; i < dataset.size(); ++i) {
            const PdeInstance& instance = fine.train.instances[i];
            LabeledSample solved;
            if (substeps > 0 && instance.kind == PdeKind::Burgers)
                solved = pde::solve_burgers(instance, substeps);
            else if (substeps > 0 && instance.kind == PdeKind::NavierStokes)
                solved = pde::solve_navier_stokes(instance, substeps);
            else
                solved = pde::solve(instance);
            dataset.labels[i] = factor == 1 ? std::move(solved.solution)
                                            : pde::downsample(solved.solution, factor);
        }
    }
    io::write_dataset(out_dir, dataset, data.train_seeds, config.config_hash());
    std::cout << "wrote " << dataset.size() << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_select(const std::string& dataset_dir, const std::string& algorithm, double beta,
               const std::string& checkpoint, const std::string& loss_name, uint64_t seed,
               const std::string& out_path) {
    Dataset dataset = io::read_dataset(dataset_dir);
    int n = static_cast<int>(dataset.size());
    int k = static_cast<int>(std::ceil(beta * n));
    pipeline::Selector selector = pipeline::selector_from_string(algorithm);

    coreset::CoresetSelection selection;
    if (!pipeline::selector_uses_features(selector)) {
        int64_t d = dataset.instances[0].input.size();
        Eigen::MatrixXd inputs(d, n);
        for (int i = 0; i < n; ++i)
            for (int64_t r = 0; r < d; ++r) inputs(r, i) = dataset.instances[i].input.values[r];
        switch (selector) {
            case pipeline::Selector::Kmeans:
                selection = coreset::select_kmeans(inputs, k, 100, seed);
                break;
            case pipeline::Selector::Cosine: selection = coreset::select_cosine(inputs, k); break;
            default: selection = coreset::select_herding(inputs, k); break;
        }
    } else {
        if (checkpoint.empty())
            throw ConfigError("selector " + algorithm + " needs --checkpoint for features");
        fno::FnoParams params = io::load_checkpoint(checkpoint);
        fno::LossKind loss = loss_name == "data" ? fno::LossKind::Data : fno::LossKind::Physics;
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        residuals::PiWeights pi;
        auto features = fno::per_sample_features(params, dataset, idx, loss, pi, 0);
        switch (selector) {
            case pipeline::Selector::Craig:
                selection = coreset::select_craig(features, k, 0, seed);
                break;
            case pipeline::Selector::GradMatch:
                selection = coreset::select_gradmatch(features, k);
                break;
            case pipeline::Selector::AdaCore: {
                auto hvp = [&](const std::vector<double>& v) {
                    return fno::last_layer_hvp(params, dataset, idx, loss, pi, v, 0);
                };
                auto diag = coreset::hutchinson_diag(hvp, static_cast<int>(features.dim()),
                                                     10, mix_seed(seed, 77));
                selection = coreset::select_adacore(features, k, diag, 1e-6, 0, seed);
                break;
            }
            case pipeline::Selector::El2n: {
                std::vector<double> losses(features.per_sample_loss.data(),
                                           features.per_sample_loss.data() + n);
                selection = coreset::select_el2n(losses, k);
                break;
            }
            default: selection = coreset::select_grand(features, k); break;
        }
    }
    selection.seed = seed;
    selection.budget_fraction = beta;
    io::write_selection(out_path, selection);
    std::cout << "selected " << selection.indices.size() << " of " << n << " -> " << out_path
              << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_dir, const std::string& selection_path, int epochs,
              double lr, int modes, int width, int layers, uint64_t seed,
              const std::string& out_path) {
    Dataset dataset = io::read_dataset(dataset_dir);
    int n = static_cast<int>(dataset.size());

    std::vector<int> indices;
    std::vector<double> weights;
    if (!selection_path.empty()) {
        auto selection = io::read_selection(selection_path);
        indices = selection.indices;
        weights = selection.weights;
    } else {
        indices.resize(n);
        std::iota(indices.begin(), indices.end(), 0);
        weights.assign(n, 1.0);
    }
    for (int i : indices)
        if (!dataset.has_label(i))
            throw ConfigError("train: sample " + std::to_string(i) +
                              " has no label; generate with labels first");

    const PdeInstance& first = dataset.instances[0];
    fno::FnoConfig net_config = fno::FnoConfig::for_task(first.kind, first.grid, modes, width,
                                                         layers);
    fno::FnoParams params = fno::fno_init(net_config, seed);
    fno::TrainOptions opts;
    opts.epochs = epochs;
    opts.lr = lr;
    opts.shuffle_seed = mix_seed(seed, 1);
    opts.max_workers = 0;
    auto records = fno::train(params, dataset, indices, weights, opts);
    io::save_checkpoint(out_path, params);
    std::cout << "trained " << epochs << " epochs, final loss "
              << (records.empty() ? 0.0 : records.back().loss) << " -> " << out_path << "\n";
    return 0;
}

int cmd_run(const CommonFlags& flags, bool with_baseline, const std::string& out_dir) {
    pipeline::ExperimentConfig config = flags.resolve();
    fs::create_directories(out_dir);

    pipeline::ExperimentReport report = pipeline::run_experiment(config);
    if (with_baseline && config.mode != pipeline::Mode::Full) {
        pipeline::ExperimentConfig base_config = config;
        base_config.mode = pipeline::Mode::Full;
        pipeline::ExperimentReport baseline = pipeline::run_full(base_config);
        report.acceleration = pipeline::account_costs(baseline.mean_modeled_ledger(),
                                                      report.mean_modeled_ledger());
        write_text(fs::path(out_dir) / "baseline.json", baseline.to_json_text());
    }
    write_text(fs::path(out_dir) / "report.json", report.to_json_text());

    auto tables = report::render_report({report});
    write_text(fs::path(out_dir) / "report.csv", tables.csv);
    write_text(fs::path(out_dir) / "runs.csv", report::runs_csv({report}));
    std::cout << "test NRMSE " << report.test_nrmse_mean << " (hash " << report.config_hash
              << ") -> " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const CommonFlags& flags, int super_res) {
    fno::FnoParams params = io::load_checkpoint(checkpoint);
    pipeline::ExperimentConfig config = flags.resolve();
    config.apply_defaults();

    pipeline::ExperimentData data = pipeline::build_experiment_data(config);
    std::vector<int> idx(data.test.size());
    std::iota(idx.begin(), idx.end(), 0);
    double base_nrmse = fno::mean_test_nrmse(params, data.test, idx, 0);

    json out;
    out["test_nrmse"] = base_nrmse;
    out["resolution"] = config.resolution;
    if (super_res > 0) {
        Dataset fine = report::build_super_resolution_testset(config, super_res);
        out["super_resolution"] = super_res;
        out["super_resolution_nrmse"] = report::evaluate_super_resolution(params, fine, 0);
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
    std::vector<pipeline::ExperimentReport> reports;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open report: " + path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        reports.push_back(pipeline::ExperimentReport::from_json_text(text));
    }
    auto tables = report::render_report(reports);
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "tables.csv", tables.csv);
    write_text(fs::path(out_dir) / "tables.md", tables.markdown);
    write_text(fs::path(out_dir) / "runs.csv", report::runs_csv(reports));
    std::cout << tables.markdown;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PICore: physics-informed coreset selection for neural operators"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "Sample inputs (and optionally labels)");
    std::string gen_kind = "advection", gen_out = "dataset";
    int gen_n = 64, gen_res = 64, gen_genres = 0, gen_substeps = 0;
    uint64_t gen_seed = 4;
    bool gen_labels = false;
    generate->add_option("--dataset", gen_kind, "PDE kind");
    generate->add_option("--n", gen_n, "number of samples");
    generate->add_option("--resolution", gen_res, "stored resolution");
    generate->add_option("--gen-resolution", gen_genres, "generation resolution");
    generate->add_option("--seed", gen_seed, "data seed");
    generate->add_flag("--with-labels", gen_labels, "also run the solver for every sample");
    generate->add_option("--substeps", gen_substeps,
                         "solver substeps per stored frame (0 = automatic)");
    generate->add_option("--out", gen_out, "output directory")->required();

    // select
    auto* select = app.add_subcommand("select", "Run a coreset selector on a dataset");
    std::string sel_dataset, sel_algorithm = "el2n", sel_ckpt, sel_loss = "physics",
                sel_out = "selection.json";
    double sel_beta = 0.2;
    uint64_t sel_seed = 3;
    select->add_option("--dataset", sel_dataset, "dataset directory")->required();
    select->add_option("--algorithm", sel_algorithm, "selector");
    select->add_option("--beta", sel_beta, "budget fraction");
    select->add_option("--checkpoint", sel_ckpt, "warm-started model for features");
    select->add_option("--loss", sel_loss, "scoring loss: physics|data");
    select->add_option("--seed", sel_seed, "selection seed");
    select->add_option("--out", sel_out, "output selection JSON");

    // train
    auto* train = app.add_subcommand("train", "Train an FNO on a labeled dataset");
    std::string tr_dataset, tr_selection, tr_out = "model.picf";
    int tr_epochs = 100, tr_modes = 0, tr_width = 32, tr_layers = 4;
    double tr_lr = 1e-3;
    uint64_t tr_seed = 1;
    train->add_option("--dataset", tr_dataset, "dataset directory")->required();
    train->add_option("--selection", tr_selection, "selection JSON (default all)");
    train->add_option("--epochs", tr_epochs, "training epochs");
    train->add_option("--lr", tr_lr, "learning rate");
    train->add_option("--modes", tr_modes, "Fourier modes (0 = default)");
    train->add_option("--width", tr_width, "channel width");
    train->add_option("--layers", tr_layers, "spectral blocks");
    train->add_option("--seed", tr_seed, "init seed");
    train->add_option("--out", tr_out, "output checkpoint");

    // run
    auto* run = app.add_subcommand("run", "Run a full experiment from a config");
    CommonFlags run_flags;
    std::string run_out = "out";
    bool run_baseline = false;
    run->add_option("--config", run_flags.config_path, "experiment config JSON");
    run->add_option("--mode", run_flags.mode, "picore|supervised|unsupervised|full");
    run->add_option("--algorithm", run_flags.algorithm, "selector");
    run->add_option("--beta", run_flags.beta, "budget fraction");
    run->add_option("--seed", run_flags.seed, "base seed override");
    run->add_option("--resolution", run_flags.resolution, "training resolution");
    run->add_flag("--with-baseline", run_baseline, "also run the full baseline");
    run->add_option("--out", run_out, "output directory");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    CommonFlags eval_flags;
    std::string eval_ckpt;
    int eval_super = 0;
    evaluate->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    evaluate->add_option("--config", eval_flags.config_path, "experiment config JSON");
    evaluate->add_option("--resolution", eval_flags.resolution, "test resolution");
    evaluate->add_option("--super-res", eval_super, "super-resolution grid size");

    // report
    auto* rep = app.add_subcommand("report", "Render comparison tables from report JSONs");
    std::vector<std::string> rep_inputs;
    std::string rep_out = "tables";
    rep->add_option("--inputs", rep_inputs, "report JSON files")->required();
    rep->add_option("--out", rep_out, "output directory");

    try {
        app.parse(argc, argv);
        if (*generate)
            return cmd_generate(gen_kind, gen_n, gen_res, gen_genres, gen_seed, gen_labels,
                                gen_substeps, gen_out);
        if (*select)
            return cmd_select(sel_dataset, sel_algorithm, sel_beta, sel_ckpt, sel_loss,
                              sel_seed, sel_out);
        if (*train)
            return cmd_train(tr_dataset, tr_selection, tr_epochs, tr_lr, tr_modes, tr_width,
                             tr_layers, tr_seed, tr_out);
        if (*run) return cmd_run(run_flags, run_baseline, run_out);
        if (*evaluate) return cmd_evaluate(eval_ckpt, eval_flags, eval_super);
        if (*rep) return cmd_report(rep_inputs, rep_out);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
