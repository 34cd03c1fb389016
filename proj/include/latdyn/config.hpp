#pragma once

#include <string>

#include "latdyn/loss.hpp"
#include "latdyn/ode.hpp"
#include "latdyn/scenes.hpp"
#include "latdyn/trainer.hpp"

// Experiment presets and the JSON config file. Presets pin the synthetic
// experiment defaults and the per-scenario training tables; a config file
// overrides presets, and CLI flags override the file. Unknown keys are
// rejected.

namespace latdyn {

struct ExperimentConfig {
    std::string scenario;
    bool has_generator = false;  // synthetic scenarios only
    ScenarioConfig scene = default_scenario(Scenario::Intensity);
    OdeSystem system = OdeSystem::linear(2, {4.0016, 0.08});
    TrainConfig train;
    std::string out_dir = "runs/out";
};

/// Known presets: intensity, motion, scale, spring (synthetic, with
/// generators) and pendulum, torricelli, sliding, led, freefall
/// (frame-folder training presets following the recording tables).
ExperimentConfig preset(const std::string& name);

std::vector<std::string> preset_names();

/// Strict JSON overlay: every key must be known. The "scenario" key is
/// only consulted for preset selection (see load_experiment), not here.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
void apply_config_text(ExperimentConfig& cfg, const std::string& json_text);

/// Resolves the preset (flag wins over the file's "scenario" key, which
/// wins over the intensity default), then overlays the file.
ExperimentConfig load_experiment(const std::string& config_path,
                                 const std::string& scenario_flag);

}  // namespace latdyn
