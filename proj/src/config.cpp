#include "latdyn/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace latdyn {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw std::invalid_argument("unknown config key '" + it.key() +
                                        "' in " + where);
}

TrainConfig synthetic_train(const std::string& scenario) {
    TrainConfig t;
    t.scenario = scenario;
    t.epochs = 150;
    t.batch_size = 50;
    return t;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"intensity", "motion",  "scale", "spring",  "pendulum",
            "torricelli", "sliding", "led",   "freefall"};
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.scenario = name;
    if (name == "intensity" || name == "motion" || name == "scale" ||
        name == "spring") {
        c.has_generator = true;
        c.scene = default_scenario(scenario_from_name(name));
        c.system = c.scene.dynamics;
        c.train = synthetic_train(name);
        return c;
    }
    // frame-folder presets: batch size / frames per sample / dt per the
    // recording tables; 500 epochs
    c.has_generator = false;
    c.train.scenario = name;
    c.train.epochs = 500;
    if (name == "pendulum") {
        c.system = OdeSystem::pendulum(1.0, 1.0, 9.81);
        c.train.batch_size = 64;
        c.train.frames_per_sample = 20;
        c.train.dt = 1.0 / 10.0;
        c.train.gamma_init = {1.0, 1.0};
    } else if (name == "torricelli") {
        c.system = OdeSystem::torricelli(0.1);
        c.train.batch_size = 64;
        c.train.frames_per_sample = 20;
        c.train.dt = 1.0 / 10.0;
        c.train.gamma_init = {0.1};
        c.train.prior_mean = 1.0;
        c.train.prior_std = 0.2;
    } else if (name == "sliding") {
        c.system = OdeSystem::sliding_block(1.0);
        c.train.batch_size = 32;
        c.train.frames_per_sample = 10;
        c.train.dt = 1.0 / 30.0;
        c.train.gamma_init = {1.0};
    } else if (name == "led") {
        c.system = OdeSystem::exponential_decay(1.0);
        c.train.batch_size = 32;
        c.train.frames_per_sample = 20;
        c.train.dt = 1.0 / 60.0;
        c.train.gamma_init = {1.0};
    } else if (name == "freefall") {
        c.system = OdeSystem::free_fall_scale(1.0, 0.0335, 1451.0, 0.20);
        c.train.batch_size = 0;  // full batch
        c.train.frames_per_sample = 4;
        c.train.dt = 1.0 / 30.0;
        c.train.gamma_init = {1.0};
    } else {
        throw std::invalid_argument("unknown scenario preset: " + name);
    }
    // folder presets still need a target encoder resolution
    c.scene.width = 50;
    c.scene.height = 50;
    return c;
}

namespace {

void apply_scene(ScenarioConfig& s, const json& j) {
    reject_unknown(j,
                   {"n_samples", "frames_per_sample", "width", "height",
                    "channels", "dt", "seed", "amplitude", "phase_lo",
                    "phase_hi", "sep_lo", "sep_hi"},
                   "scene");
    if (j.contains("n_samples")) s.n_samples = j["n_samples"].get<int>();
    if (j.contains("frames_per_sample"))
        s.frames_per_sample = j["frames_per_sample"].get<int>();
    if (j.contains("width")) s.width = j["width"].get<int>();
    if (j.contains("height")) s.height = j["height"].get<int>();
    if (j.contains("channels")) s.channels = j["channels"].get<int>();
    if (j.contains("dt")) s.dt = j["dt"].get<double>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("amplitude")) s.amplitude = j["amplitude"].get<double>();
    if (j.contains("phase_lo")) s.phase_lo = j["phase_lo"].get<double>();
    if (j.contains("phase_hi")) s.phase_hi = j["phase_hi"].get<double>();
    if (j.contains("sep_lo")) s.sep_lo = j["sep_lo"].get<double>();
    if (j.contains("sep_hi")) s.sep_hi = j["sep_hi"].get<double>();
}

void apply_train(TrainConfig& t, const json& j) {
    reject_unknown(j,
                   {"epochs", "batch_size", "frames_per_sample", "window_stride",
                    "dt", "encoder_lr", "hidden1", "hidden2", "gamma_init",
                    "init_range", "loss_mode", "seed"},
                   "train");
    if (j.contains("epochs")) t.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<int>();
    if (j.contains("frames_per_sample"))
        t.frames_per_sample = j["frames_per_sample"].get<int>();
    if (j.contains("window_stride")) t.window_stride = j["window_stride"].get<int>();
    if (j.contains("dt")) t.dt = j["dt"].get<double>();
    if (j.contains("encoder_lr")) t.encoder_lr = j["encoder_lr"].get<double>();
    if (j.contains("hidden1")) t.hidden1 = j["hidden1"].get<int>();
    if (j.contains("hidden2")) t.hidden2 = j["hidden2"].get<int>();
    if (j.contains("gamma_init"))
        t.gamma_init = j["gamma_init"].get<std::vector<double>>();
    if (j.contains("init_range")) {
        const auto r = j["init_range"].get<std::vector<double>>();
        if (r.size() != 2) throw std::invalid_argument("init_range wants [lo, hi]");
        t.gamma_init_lo = r[0];
        t.gamma_init_hi = r[1];
    }
    if (j.contains("loss_mode")) {
        const std::string m = j["loss_mode"].get<std::string>();
        if (m == "full")
            t.loss_mode = LossMode::Full;
        else if (m == "mse-only")
            t.loss_mode = LossMode::MseOnly;
        else
            throw std::invalid_argument("loss_mode must be 'full' or 'mse-only'");
    }
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
}

void apply_prior(TrainConfig& t, const json& j) {
    reject_unknown(j, {"mean", "std", "var"}, "prior");
    if (j.contains("std") && j.contains("var"))
        throw std::invalid_argument("prior takes either 'std' or 'var', not both");
    if (j.contains("mean")) t.prior_mean = j["mean"].get<double>();
    if (j.contains("std")) t.prior_std = j["std"].get<double>();
    if (j.contains("var")) t.prior_std = std::sqrt(j["var"].get<double>());
}

}  // namespace

void apply_config_text(ExperimentConfig& cfg, const std::string& json_text) {
    const json j = json::parse(json_text);
    reject_unknown(j, {"scenario", "out_dir", "scene", "system", "train", "prior"},
                   "config root");
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("scene")) apply_scene(cfg.scene, j["scene"]);
    if (j.contains("system")) {
        const json& s = j["system"];
        reject_unknown(s, {"kind", "order", "params"}, "system");
        cfg.system = make_system(s.at("kind").get<std::string>(),
                                 s.value("order", 2),
                                 s.at("params").get<std::vector<double>>());
    }
    if (j.contains("train")) apply_train(cfg.train, j["train"]);
    if (j.contains("prior")) apply_prior(cfg.train, j["prior"]);
    if (cfg.has_generator) cfg.scene.dynamics = cfg.system;
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    apply_config_text(cfg, text);
}

ExperimentConfig load_experiment(const std::string& config_path,
                                 const std::string& scenario_flag) {
    std::string text;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw std::runtime_error("cannot open config file " + config_path);
        text.assign(std::istreambuf_iterator<char>(f),
                    std::istreambuf_iterator<char>());
    }
    std::string scenario = scenario_flag;
    if (scenario.empty() && !text.empty()) {
        const json j = json::parse(text);
        if (j.contains("scenario")) scenario = j["scenario"].get<std::string>();
    }
    if (scenario.empty()) scenario = "intensity";
    ExperimentConfig cfg = preset(scenario);
    if (!text.empty()) apply_config_text(cfg, text);
    return cfg;
}

}  // namespace latdyn
