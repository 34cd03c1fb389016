#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "latdyn/config.hpp"

using namespace latdyn;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(LATDYN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
#ifdef _WIN32
    return status;
#else
    return WEXITSTATUS(status);
#endif
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), {});
}

fs::path temp_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("presets pin the experiment tables") {
    const ExperimentConfig intensity = preset("intensity");
    CHECK(intensity.has_generator);
    CHECK(intensity.scene.n_samples == 500);
    CHECK(intensity.scene.frames_per_sample == 20);
    CHECK(intensity.scene.width == 50);
    CHECK(intensity.train.encoder_lr == doctest::Approx(1e-2));

    const ExperimentConfig pend = preset("pendulum");
    CHECK_FALSE(pend.has_generator);
    CHECK(pend.train.batch_size == 64);
    CHECK(pend.train.frames_per_sample == 20);
    CHECK(pend.train.dt == doctest::Approx(0.1));
    CHECK(pend.train.epochs == 500);

    const ExperimentConfig slide = preset("sliding");
    CHECK(slide.train.batch_size == 32);
    CHECK(slide.train.frames_per_sample == 10);
    CHECK(slide.train.dt == doctest::Approx(1.0 / 30.0));

    const ExperimentConfig led = preset("led");
    CHECK(led.train.batch_size == 32);
    CHECK(led.train.dt == doctest::Approx(1.0 / 60.0));

    const ExperimentConfig ff = preset("freefall");
    CHECK(ff.train.batch_size == 0);  // full batch
    CHECK(ff.train.frames_per_sample == 4);

    const ExperimentConfig torri = preset("torricelli");
    CHECK(torri.train.prior_mean == doctest::Approx(1.0));
    CHECK(torri.train.prior_std == doctest::Approx(0.2));

    CHECK_THROWS_AS(preset("bogus"), std::invalid_argument);
}

TEST_CASE("config overlay: strict keys, prior std-or-var, system override") {
    ExperimentConfig cfg = preset("intensity");
    apply_config_text(cfg, R"({
      "out_dir": "xyz",
      "scene": {"n_samples": 7, "dt": 0.4},
      "train": {"epochs": 3, "gamma_init": [1.0, 2.0], "loss_mode": "mse-only"},
      "prior": {"mean": 1.0, "var": 0.04}
    })");
    CHECK(cfg.out_dir == "xyz");
    CHECK(cfg.scene.n_samples == 7);
    CHECK(cfg.scene.dt == 0.4);
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.train.loss_mode == LossMode::MseOnly);
    CHECK(cfg.train.prior_std == doctest::Approx(0.2));

    CHECK_THROWS_AS(apply_config_text(cfg, R"({"scene": {"bogus_key": 1}})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(apply_config_text(cfg, R"({"wat": 1})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        apply_config_text(cfg, R"({"prior": {"std": 1.0, "var": 1.0}})"),
        std::invalid_argument);

    apply_config_text(cfg, R"({"system": {"kind": "linear", "order": 2,
                               "params": [9.0, 0.5]}})");
    CHECK(cfg.system.param(0) == 9.0);
    CHECK(cfg.scene.dynamics.param(0) == 9.0);  // generator follows
}

TEST_CASE("load_experiment: flag beats file scenario") {
    const fs::path dir = temp_dir("latdyn_cfg");
    const fs::path cfgfile = dir / "exp.json";
    std::ofstream(cfgfile) << R"({"scenario": "scale", "train": {"epochs": 9}})";

    const ExperimentConfig from_file = load_experiment(cfgfile.string(), "");
    CHECK(from_file.scenario == "scale");
    CHECK(from_file.train.epochs == 9);

    const ExperimentConfig flag_wins = load_experiment(cfgfile.string(), "motion");
    CHECK(flag_wins.scenario == "motion");
    CHECK(flag_wins.train.epochs == 9);  // file still overlays
    fs::remove_all(dir);
}

TEST_CASE("cli: help and usage errors") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("generate --help") == 0);
    CHECK(run_cli("train --help") == 0);
    CHECK(run_cli("totally-not-a-command") == 1);
    CHECK(run_cli("train --scenario bogus") == 1);
    CHECK(run_cli("eval") == 1);  // missing required --checkpoint
}

TEST_CASE("cli: generate is deterministic and loadable") {
    const fs::path dir = temp_dir("latdyn_cli_gen");
    const std::string a = (dir / "a").string(), b = (dir / "b").string();
    CHECK(run_cli("generate --scenario intensity --n-samples 2 --frames 3 "
                  "--seed 9 --out " + a) == 0);
    CHECK(run_cli("generate --scenario intensity --n-samples 2 --frames 3 "
                  "--seed 9 --out " + b) == 0);
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), a);
        CHECK(slurp(e.path()) == slurp(b / rel));
    }
    fs::remove_all(dir);
}

TEST_CASE("cli: train then eval end to end on a small config") {
    const fs::path dir = temp_dir("latdyn_cli_train");
    const fs::path data = dir / "data";
    const fs::path run = dir / "run";
    const fs::path cfgfile = dir / "exp.json";
    std::ofstream(cfgfile) << R"({
      "scenario": "intensity",
      "scene": {"n_samples": 6, "frames_per_sample": 6, "seed": 4},
      "train": {"epochs": 2, "batch_size": 3, "hidden1": 8, "hidden2": 8,
                "seed": 1, "gamma_init": [2.0, 0.5]}
    })";

    CHECK(run_cli("generate --config " + cfgfile.string() + " --out " +
                  data.string()) == 0);
    CHECK(run_cli("train --config " + cfgfile.string() + " --data " +
                  data.string() + " --out " + run.string()) == 0);
    CHECK(fs::exists(run / "report.json"));
    CHECK(fs::exists(run / "epochs.csv"));
    CHECK(fs::exists(run / "checkpoint.bin"));

    CHECK(run_cli("eval --config " + cfgfile.string() + " --data " +
                  data.string() + " --checkpoint " +
                  (run / "checkpoint.bin").string() + " --horizon 5 --out " +
                  (dir / "eval").string()) == 0);
    CHECK(fs::exists(dir / "eval" / "aligned_latent.csv"));
    CHECK(fs::exists(dir / "eval" / "rollout.csv"));
    CHECK(fs::exists(dir / "eval" / "summary.csv"));

    CHECK(run_cli("rollout --config " + cfgfile.string() + " --data " +
                  data.string() + " --checkpoint " +
                  (run / "checkpoint.bin").string() + " --horizon 4 --out " +
                  (dir / "roll").string()) == 0);
    CHECK(fs::exists(dir / "roll" / "rollout.csv"));

    // epochs=0 reports immediately
    CHECK(run_cli("train --config " + cfgfile.string() + " --data " +
                  data.string() + " --epochs 0 --out " +
                  (dir / "run0").string()) == 0);
    fs::remove_all(dir);
}

TEST_CASE("cli: sweep and dt-ablation tables") {
    const fs::path dir = temp_dir("latdyn_cli_sweep");
    const fs::path cfgfile = dir / "exp.json";
    std::ofstream(cfgfile) << R"({
      "scenario": "intensity",
      "scene": {"n_samples": 4, "frames_per_sample": 4, "seed": 2},
      "train": {"epochs": 1, "batch_size": 2, "hidden1": 6, "hidden2": 4,
                "seed": 3}
    })";
    CHECK(run_cli("sweep --config " + cfgfile.string() + " --runs 2 "
                  "--init-range -1,1 --out " + (dir / "sw").string()) == 0);
    CHECK(fs::exists(dir / "sw" / "sweep.csv"));

    CHECK(run_cli("dt-ablation --config " + cfgfile.string() +
                  " --dts 0.2,0.4 --out " + (dir / "dt").string()) == 0);
    const std::string table = slurp(dir / "dt" / "dt_ablation.csv");
    CHECK(table.find("0.2") != std::string::npos);
    CHECK(table.find("0.4") != std::string::npos);
    fs::remove_all(dir);
}

}  // TEST_SUITE
