#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "latdyn/encoder.hpp"
#include "latdyn/scenes.hpp"
#include "latdyn/trainer.hpp"

// Evaluation: affine alignment of the learned latent against the reference
// state (the model fixes its own metric, so comparisons are made up to
// scale/offset), extrapolation rollouts, multi-run sweeps, and the
// closed-form ground-truth estimators used for real recordings.

namespace latdyn {

struct AlignedLatent {
    double scale = 0.0, offset = 0.0;
    std::vector<double> aligned;
    double rmse = 0.0;
};

/// Least-squares fit of a*z + b to z_real, then the aligned RMSE.
/// Throws on constant z (degenerate fit).
AlignedLatent align_affine(const std::vector<double>& z,
                           const std::vector<double>& z_real);

/// Encodes the last `order` training frames of every sample, rolls the
/// physics block `horizon` steps, affine-aligns (fit on the training
/// window) against the reference trajectory continued by the simulator,
/// and returns the mean RMSE over samples. horizon == 0 returns 0.
double extrapolation_error(const EncoderParams& enc, const OdeSystem& system,
                           const Dataset& ds, int horizon);

/// Per-sample detail used by the CLI eval command.
struct SampleEval {
    double align_scale = 0.0, align_offset = 0.0;
    double align_rmse = 0.0;
    std::vector<double> latent;        // encoded training window (T)
    std::vector<double> aligned;       // a*latent + b
    std::vector<double> rollout;       // aligned extrapolation (horizon)
    std::vector<double> z_real_train;  // reference over the window
    std::vector<double> z_real_extra;  // reference over the horizon
    double extrap_rmse = 0.0;
};

SampleEval evaluate_sample(const EncoderParams& enc, const OdeSystem& system,
                           const Dataset& ds, int sample, int horizon);

struct SweepRow {
    int run = 0;
    std::uint64_t seed = 0;
    std::vector<double> init_gamma, final_gamma;
    bool failed = false;
    std::string error;
};

struct SweepReport {
    std::vector<std::string> gamma_names;
    std::vector<SweepRow> rows;
    std::vector<double> mean, stddev;  // over successful runs
    std::vector<RunReport> runs;
};

/// Trains n_runs models with independent gamma initializations drawn from
/// init_range; run failures are recorded and the sweep continues.
SweepReport robustness_sweep(const Dataset& ds, const TrainConfig& cfg,
                             int n_runs, std::pair<double, double> init_range);

struct DtAblationRow {
    double dt = 0.0;
    std::vector<double> final_gamma;
};

/// Regenerates the dataset and trains once per dt.
std::vector<DtAblationRow> dt_ablation(const ScenarioConfig& scene,
                                       const std::vector<double>& dts,
                                       const TrainConfig& cfg);

void write_sweep_csv(const SweepReport& r, const std::string& path);
void write_dt_ablation_csv(const std::vector<std::string>& gamma_names,
                           const std::vector<DtAblationRow>& rows,
                           const std::string& path);

// Ground-truth estimators from manual measurements.

/// Linear regression of ln(x_peak) on t; the envelope decays as
/// exp(-zeta t / 2), so zeta = -2 * slope.
double gt_pendulum_damping(const std::vector<std::pair<double, double>>& peaks);

/// k = 2 (sqrt(h0) - sqrt(ht)) / t
double gt_torricelli_k(double h0, double ht, double t);

/// mu = tan(alpha) - 2 s / (g t^2), alpha in degrees
double gt_sliding_mu(double alpha_deg, double s, double t, double g);

/// f = (r_pix0 / r0) * h0 in pixels per meter
double gt_freefall_focal(double r_pix0, double r0, double h0);

}  // namespace latdyn
