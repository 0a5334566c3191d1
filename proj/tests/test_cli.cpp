#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "picore/dataset_io.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(PICORE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path work_dir() {
    fs::path dir = fs::temp_directory_path() / "picore_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("cli: generate/select/train/evaluate round trip exits 0") {
    fs::path dir = work_dir();
    std::string dataset = (dir / "data").string();

    CHECK(run_cli("generate --dataset advection --n 6 --resolution 32 --gen-resolution 32 "
                  "--seed 5 --with-labels --out " + dataset) == 0);
    CHECK(fs::exists(dir / "data" / "manifest.json"));

    // Input-space selector needs no checkpoint.
    std::string selection = (dir / "selection.json").string();
    CHECK(run_cli("select --dataset " + dataset + " --algorithm kmeans --beta 0.5 --seed 2 "
                  "--out " + selection) == 0);
    auto sel = picore::io::read_selection(selection);
    CHECK(sel.indices.size() == 3);

    std::string model = (dir / "model.picf").string();
    CHECK(run_cli("train --dataset " + dataset + " --selection " + selection +
                  " --epochs 2 --modes 8 --width 6 --layers 2 --out " + model) == 0);
    CHECK(fs::exists(model));

    // Feature-based selection off the trained checkpoint.
    std::string sel2 = (dir / "selection2.json").string();
    CHECK(run_cli("select --dataset " + dataset + " --algorithm el2n --beta 0.5 "
                  "--checkpoint " + model + " --loss physics --out " + sel2) == 0);
}

TEST_CASE("cli: run writes a report with config hash") {
    fs::path dir = work_dir();
    std::ofstream config(dir / "config.json");
    config << R"({"kind": "advection", "n_train": 8, "n_test": 3, "resolution": 32,
                  "gen_resolution": 32, "n_time": 5, "modes": 8, "width": 6,
                  "n_layers": 2, "algorithm": "el2n", "mode": "picore", "beta": 0.5,
                  "warmup_epochs": 1, "epochs": 3, "batch_size": 4})";
    config.close();

    CHECK(run_cli("run --config " + (dir / "config.json").string() + " --out " +
                  (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out" / "report.json"));
    CHECK(fs::exists(dir / "out" / "report.csv"));

    std::ifstream report(dir / "out" / "report.json");
    std::string text((std::istreambuf_iterator<char>(report)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("config_hash") != std::string::npos);
    CHECK(text.find("tool_version") != std::string::npos);
}

TEST_CASE("cli: config errors exit 2") {
    fs::path dir = work_dir();
    // Unknown flag.
    CHECK(run_cli("run --definitely-not-a-flag 3") == 2);
    // Unknown subcommand.
    CHECK(run_cli("frobnicate") == 2);
    // Config file with an unknown field.
    std::ofstream config(dir / "bad.json");
    config << R"({"betaa": 0.2})";
    config.close();
    CHECK(run_cli("run --config " + (dir / "bad.json").string()) == 2);
    // Missing checkpoint for a feature-based selector.
    CHECK(run_cli("select --dataset /nonexistent --algorithm el2n --out x.json") == 2);
}

TEST_CASE("cli: numerical failures exit 3") {
    fs::path dir = work_dir();
    // One substep per frame at this amplitude and resolution violates the
    // Burgers CFL guard.
    CHECK(run_cli("generate --dataset burgers --n 2 --resolution 64 --gen-resolution 64 "
                  "--seed 11 --with-labels --substeps 1 --out " +
                  (dir / "blowup").string()) == 3);
}
