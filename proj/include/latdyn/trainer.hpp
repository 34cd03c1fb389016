#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "latdyn/encoder.hpp"
#include "latdyn/loss.hpp"
#include "latdyn/ode.hpp"
#include "latdyn/scenes.hpp"

// Joint optimization of the encoder and the physics parameters on a frame
// dataset. Forward: encode every frame of the batch windows, predict each
// target latent from its predecessors through the physics block, evaluate
// the two-term loss. Backward: exact chain rule through loss, physics
// Jacobians and the MLP. Adam everywhere; each physics parameter gets a
// step size set by the order of magnitude of its initial value.

namespace latdyn {

struct TrainConfig {
    int epochs = 220;
    int batch_size = 50;        // 0 = full batch
    int frames_per_sample = 0;  // 0 = use the dataset's length
    int window_stride = 0;      // 0 = frames_per_sample (non-overlapping)
    double dt = 0.0;            // 0 = dataset dt; else integer multiple of it
    double encoder_lr = 1e-2;
    int hidden1 = 256, hidden2 = 128;
    std::vector<double> gamma_init;  // empty = draw uniformly from the range
    double gamma_init_lo = -10.0, gamma_init_hi = 10.0;
    double prior_mean = 0.0, prior_std = 1.0;
    LossMode loss_mode = LossMode::Full;
    std::uint64_t seed = 0;
    std::string scenario;
};

struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<std::string> gamma_names;
    std::vector<double> l1, l2, total, z_var;       // one entry per epoch
    std::vector<std::vector<double>> gamma_epochs;  // epoch -> learnable values
    std::vector<double> init_gamma;
    std::vector<double> final_gamma;  // |k| for Torricelli, raw otherwise
    double wall_seconds = 0.0;
    std::string kernel_name;
    std::string config_echo;  // JSON dump of the effective TrainConfig
};

struct TrainDivergence : std::runtime_error {
    TrainDivergence(int epoch_, const LossTerms& terms_,
                    std::vector<double> gamma_);
    int epoch;
    LossTerms terms;
    std::vector<double> gamma;
};

/// 10^floor(log10 |gamma0|); falls back to the encoder default 1e-2 when
/// the initial value is exactly 0.
double lr_for_gamma(double gamma_init);

struct WindowRef {
    int sample = 0;
    int start = 0;
};

struct ForwardResult {
    LatentBatch batch;
    LossTerms terms;
};

struct BatchGrads {
    EncoderGrads enc;
    std::vector<double> gamma;
};

ForwardResult forward_batch(const Dataset& ds,
                            const std::vector<WindowRef>& windows,
                            int frames_per_window, int frame_step,
                            const EncoderParams& enc, const OdeSystem& system,
                            const Prior& prior,
                            LossMode mode = LossMode::Full);

/// Forward + full backward; returns gradients for the encoder and the
/// learnable physics parameters. forward_out may be null.
BatchGrads backward_batch(const Dataset& ds,
                          const std::vector<WindowRef>& windows,
                          int frames_per_window, int frame_step,
                          const EncoderParams& enc, const OdeSystem& system,
                          const Prior& prior, LossMode mode = LossMode::Full,
                          ForwardResult* forward_out = nullptr);

// Everything needed to continue a run bit-identically.
struct TrainerState {
    EncoderParams encoder;
    OdeSystem system = OdeSystem::linear(2, {0.0, 0.0});
    std::vector<std::vector<double>> enc_adam_m, enc_adam_v;  // 6 tensors
    std::vector<double> gamma_adam_m, gamma_adam_v;
    std::vector<double> gamma_init;  // values the lr rule was derived from
    std::int64_t step = 0;
    int epoch = 0;
    std::string rng_state;
};

void save_checkpoint(const TrainerState& st, const std::string& path);
TrainerState load_checkpoint(const std::string& path);

struct TrainOutputs {
    std::string checkpoint_path;  // empty = do not write
    std::string csv_path;         // empty = do not write
};

RunReport train(const Dataset& ds, const TrainConfig& cfg,
                const TrainOutputs& out = {},
                const std::string& resume_from = "");

void write_epoch_csv(const RunReport& r, const std::string& path);
std::string run_report_json(const RunReport& r);
RunReport run_report_from_json(const std::string& text);

/// Worker threads for batch fan-out; LATDYN_THREADS overrides, result is
/// thread-count independent (fixed chunking, ordered reduction).
int worker_threads();

}  // namespace latdyn
