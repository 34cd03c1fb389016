#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "latdyn/ode.hpp"

// Synthetic scene generation: reference trajectories integrated from the
// ground-truth system, rendered to 50x50 grayscale frames, quantized to
// 8 bits. Also the disk format (PGM frames + JSON manifest) and ingestion
// of external frame folders.

namespace latdyn {

enum class Scenario { PendulumMotion, Intensity, Scale, TwoBodySpring };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct ScenarioConfig {
    Scenario scenario = Scenario::Intensity;
    int n_samples = 500;
    int frames_per_sample = 20;
    int width = 50, height = 50, channels = 1;
    double dt = 0.2;
    OdeSystem dynamics = OdeSystem::linear(2, {4.0016, 0.08});
    // oscillation amplitude in rendered units (degrees / intensity span /
    // pixels); the per-sample initial phase is uniform in [phase_lo,
    // phase_hi)
    double amplitude = 1.0;
    double phase_lo = 0.0;
    double phase_hi = 6.283185307179586;
    // two-body only: initial separation range (pixels)
    double sep_lo = 12.0, sep_hi = 20.0;
    std::uint64_t seed = 1234;
};

// Defaults reproducing the synthetic experiment dimensions for a scenario.
ScenarioConfig default_scenario(Scenario s);

struct FrameSequence {
    int t = 0, c = 1, h = 0, w = 0;
    double dt = 0.0;
    std::vector<float> frames;                    // t*c*h*w, values in [0,1]
    std::vector<std::vector<std::uint8_t>> masks; // per object, t*h*w, 0/1
    std::vector<double> gt_trajectory;            // t*d, empty when unknown
    int gt_dim = 0;
    std::vector<std::vector<double>> init;        // state + derivatives

    std::size_t frame_size() const { return std::size_t(c) * h * w; }
    const float* frame(int i) const { return frames.data() + std::size_t(i) * frame_size(); }
    float* frame(int i) { return frames.data() + std::size_t(i) * frame_size(); }
    int n_objects() const { return static_cast<int>(masks.size()); }
};

struct Dataset {
    ScenarioConfig cfg = default_scenario(Scenario::Intensity);
    std::vector<FrameSequence> samples;
};

/// Reference trajectory of `system` sampled every dt for T steps, computed
/// with RK4 substeps at dt/100. init holds the state and its derivatives,
/// one vector per order. Returns T x d row-major (t=0 is the initial state).
std::vector<double> simulate_trajectory(const OdeSystem& system,
                                        const std::vector<std::vector<double>>& init,
                                        double dt, int T);

struct RenderDiag {
    long clip_events = 0;
};

std::vector<float> render_pendulum(double theta_deg, const ScenarioConfig& cfg);
std::vector<float> render_intensity(double z, const ScenarioConfig& cfg,
                                    RenderDiag* diag = nullptr);
std::vector<float> render_scale(double r, const ScenarioConfig& cfg);

struct TwoBodyRender {
    std::vector<float> frame;
    std::vector<std::uint8_t> mask1, mask2;
};
TwoBodyRender render_two_body(const std::array<double, 2>& p1,
                              const std::array<double, 2>& p2,
                              const ScenarioConfig& cfg);

// Pendulum geometry shared with the tests.
constexpr double kPendulumArmPx = 18.0;
constexpr double kPendulumBobRadiusPx = 5.0;
constexpr double kScaleBaseRadiusPx = 12.0;

Dataset generate_dataset(const ScenarioConfig& cfg);
void write_dataset(const Dataset& ds, const std::string& root);

/// One frame folder: `frame_####.pgm` (+ optional `mask<k>_####.pgm`) with a
/// manifest.json holding at least "dt", either in the folder itself or in
/// its parent (generated sample directories). target_w/target_h != 0
/// requests area-averaged resizing.
FrameSequence load_frames(const std::string& dir, int target_w = 0,
                          int target_h = 0);

Dataset load_dataset(const std::string& root);

// 8-bit grayscale PGM (binary P5).
void write_pgm(const std::string& path, const std::uint8_t* data, int w, int h);
std::vector<std::uint8_t> read_pgm(const std::string& path, int& w, int& h);

}  // namespace latdyn
