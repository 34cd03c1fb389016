// latdyn command line: dataset generation, training, evaluation, sweeps.
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.
// LATDYN_THREADS caps the worker threads used for batch fan-out;
// LATDYN_SIMD=scalar forces the reference kernels.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "latdyn/config.hpp"
#include "latdyn/eval.hpp"
#include "latdyn/kernels.hpp"
#include "latdyn/scenes.hpp"
#include "latdyn/trainer.hpp"

namespace fs = std::filesystem;
using namespace latdyn;

namespace {

struct CommonFlags {
    std::string config_path, scenario, data, out;
    std::int64_t seed = -1;
    int epochs = -1;
    double dt = 0.0;
    std::string loss_mode, prior;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_train_flags) {
    cmd->add_option("--config", f.config_path, "JSON experiment config");
    cmd->add_option("--scenario", f.scenario,
                    "preset name (intensity, motion, scale, spring, pendulum, "
                    "torricelli, sliding, led, freefall)");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--seed", f.seed, "run seed");
    cmd->add_option("--dt", f.dt, "sampling period override (seconds)");
    if (with_train_flags) {
        cmd->add_option("--epochs", f.epochs, "training epochs");
        cmd->add_option("--loss-mode", f.loss_mode, "full | mse-only");
        cmd->add_option("--prior", f.prior, "MU,STD of the latent prior");
    }
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig cfg = load_experiment(f.config_path, f.scenario);
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.seed >= 0) {
        cfg.train.seed = static_cast<std::uint64_t>(f.seed);
        cfg.scene.seed = static_cast<std::uint64_t>(f.seed);
    }
    if (f.epochs >= 0) cfg.train.epochs = f.epochs;
    if (f.dt > 0.0) {
        cfg.train.dt = f.dt;
        cfg.scene.dt = f.dt;
    }
    if (!f.loss_mode.empty()) {
        if (f.loss_mode == "full")
            cfg.train.loss_mode = LossMode::Full;
        else if (f.loss_mode == "mse-only")
            cfg.train.loss_mode = LossMode::MseOnly;
        else
            throw std::invalid_argument("loss-mode must be full or mse-only");
    }
    if (!f.prior.empty()) {
        const auto comma = f.prior.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("--prior wants MU,STD");
        cfg.train.prior_mean = std::stod(f.prior.substr(0, comma));
        cfg.train.prior_std = std::stod(f.prior.substr(comma + 1));
    }
    return cfg;
}

bool is_dataset_root(const std::string& path) {
    const fs::path man = fs::path(path) / "manifest.json";
    if (!fs::exists(man)) return false;
    std::ifstream f(man);
    const auto j = nlohmann::json::parse(f);
    return j.contains("n_samples");
}

Dataset load_training_data(const ExperimentConfig& cfg, const std::string& data) {
    if (data.empty()) {
        if (!cfg.has_generator)
            throw std::invalid_argument(
                "--data is required for scenario '" + cfg.scenario + "'");
        std::cout << "generating " << cfg.scenario << " dataset in memory (seed "
                  << cfg.scene.seed << ")\n";
        return generate_dataset(cfg.scene);
    }
    if (is_dataset_root(data)) return load_dataset(data);
    FrameSequence seq = load_frames(data, cfg.scene.width, cfg.scene.height);
    Dataset ds;
    ds.cfg = cfg.scene;
    ds.cfg.dt = seq.dt;
    ds.cfg.dynamics = cfg.system;
    ds.samples.push_back(std::move(seq));
    return ds;
}

void print_final_gamma(const OdeSystem& sys, const std::vector<double>& values) {
    const auto names = sys.learnable_names();
    const auto idx = sys.learnable_indices();
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto& unit = sys.params()[idx[i]].unit;
        std::cout << "  " << names[i] << " = " << values[i];
        if (!unit.empty()) std::cout << " [" << unit << "]";
        std::cout << "\n";
    }
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

int cmd_generate(const CommonFlags& f, int n_samples, int frames) {
    ExperimentConfig cfg = resolve(f);
    if (!cfg.has_generator)
        throw std::invalid_argument("scenario '" + cfg.scenario +
                                    "' has no synthetic generator");
    if (n_samples > 0) cfg.scene.n_samples = n_samples;
    if (frames > 0) cfg.scene.frames_per_sample = frames;
    if (cfg.out_dir.empty()) throw std::invalid_argument("--out is required");
    const Dataset ds = generate_dataset(cfg.scene);
    write_dataset(ds, cfg.out_dir);
    std::cout << "wrote " << ds.samples.size() << " samples x "
              << cfg.scene.frames_per_sample << " frames ("
              << cfg.scene.channels << "x" << cfg.scene.height << "x"
              << cfg.scene.width << ", dt=" << cfg.scene.dt << ") to "
              << cfg.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonFlags& f) {
    ExperimentConfig cfg = resolve(f);
    const Dataset ds = load_training_data(cfg, f.data);
    fs::create_directories(cfg.out_dir);
    TrainOutputs outs;
    outs.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    outs.csv_path = (fs::path(cfg.out_dir) / "epochs.csv").string();
    const RunReport rep = train(ds, cfg.train, outs);
    std::ofstream rf(fs::path(cfg.out_dir) / "report.json");
    rf << run_report_json(rep) << "\n";
    std::cout << "trained " << cfg.scenario << " for " << rep.total.size()
              << " epochs (" << rep.kernel_name << " kernels, "
              << rep.wall_seconds << " s)\nfinal parameters:\n";
    OdeSystem sys = ds.cfg.dynamics;
    print_final_gamma(sys, rep.final_gamma);
    if (cfg.train.loss_mode == LossMode::MseOnly && !rep.z_var.empty())
        std::cout << "collapse diagnostics: final batch variance of z = "
                  << rep.z_var.back() << "\n";
    return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, int horizon,
             int sample) {
    ExperimentConfig cfg = resolve(f);
    const TrainerState st = load_checkpoint(checkpoint);
    const Dataset ds = load_training_data(cfg, f.data);
    if (st.encoder.in_dim != static_cast<int>(ds.samples[0].frame_size()))
        throw std::runtime_error("checkpoint encoder dims are incompatible with the dataset");
    fs::create_directories(cfg.out_dir);

    const SampleEval ev =
        evaluate_sample(st.encoder, st.system, ds, sample, horizon);
    const int d = st.system.dim();
    {
        std::ofstream fcsv(fs::path(cfg.out_dir) / "aligned_latent.csv");
        fcsv << "t,time";
        for (int j = 0; j < d; ++j)
            fcsv << ",latent_" << j << ",aligned_" << j << ",z_real_" << j;
        fcsv << "\n";
        const int T = static_cast<int>(ev.z_real_train.size()) / d;
        for (int t = 0; t < T; ++t) {
            fcsv << t << "," << t * ds.cfg.dt;
            for (int j = 0; j < d; ++j)
                fcsv << "," << ev.latent[t * d + j] << "," << ev.aligned[t * d + j]
                     << "," << ev.z_real_train[t * d + j];
            fcsv << "\n";
        }
    }
    if (horizon > 0) {
        std::ofstream fcsv(fs::path(cfg.out_dir) / "rollout.csv");
        fcsv << "step,time";
        for (int j = 0; j < d; ++j) fcsv << ",rollout_" << j << ",z_real_" << j;
        fcsv << "\n";
        const int T = static_cast<int>(ev.z_real_train.size()) / d;
        for (int s = 0; s < horizon; ++s) {
            fcsv << s << "," << (T + s) * ds.cfg.dt;
            for (int j = 0; j < d; ++j)
                fcsv << "," << ev.rollout[s * d + j] << ","
                     << ev.z_real_extra[s * d + j];
            fcsv << "\n";
        }
    }
    const double extrap =
        horizon > 0 ? extrapolation_error(st.encoder, st.system, ds, horizon) : 0.0;
    {
        std::ofstream fcsv(fs::path(cfg.out_dir) / "summary.csv");
        fcsv << "sample,align_rmse,extrap_rmse\n";
        fcsv << sample << "," << ev.align_rmse << "," << ev.extrap_rmse << "\n";
        fcsv << "mean,," << extrap << "\n";
    }
    std::cout << "sample " << sample << ": aligned rmse " << ev.align_rmse
              << ", extrapolation rmse " << ev.extrap_rmse
              << "\nmean extrapolation rmse over dataset: " << extrap << "\n";
    return 0;
}

int cmd_sweep(const CommonFlags& f, int runs, const std::string& init_range) {
    ExperimentConfig cfg = resolve(f);
    const Dataset ds = load_training_data(cfg, f.data);
    double lo = cfg.train.gamma_init_lo, hi = cfg.train.gamma_init_hi;
    if (!init_range.empty()) {
        const auto v = parse_double_list(init_range);
        if (v.size() != 2) throw std::invalid_argument("--init-range wants LO,HI");
        lo = v[0];
        hi = v[1];
    }
    const SweepReport rep = robustness_sweep(ds, cfg.train, runs, {lo, hi});
    fs::create_directories(cfg.out_dir);
    write_sweep_csv(rep, (fs::path(cfg.out_dir) / "sweep.csv").string());
    std::cout << "sweep over " << runs << " runs, init range [" << lo << ", "
              << hi << "]\n";
    for (std::size_t i = 0; i < rep.gamma_names.size(); ++i)
        std::cout << "  " << rep.gamma_names[i] << " = " << rep.mean[i]
                  << " +/- " << rep.stddev[i] << "\n";
    return 0;
}

int cmd_dt_ablation(const CommonFlags& f, const std::string& dts_text) {
    ExperimentConfig cfg = resolve(f);
    if (!cfg.has_generator)
        throw std::invalid_argument("dt-ablation needs a synthetic scenario");
    const std::vector<double> dts = parse_double_list(dts_text);
    if (dts.empty()) throw std::invalid_argument("--dts wants a comma list");
    const auto rows = dt_ablation(cfg.scene, dts, cfg.train);
    fs::create_directories(cfg.out_dir);
    write_dt_ablation_csv(cfg.system.learnable_names(), rows,
                          (fs::path(cfg.out_dir) / "dt_ablation.csv").string());
    for (const auto& row : rows) {
        std::cout << "dt=" << row.dt << ":";
        for (double g : row.final_gamma) std::cout << " " << g;
        std::cout << "\n";
    }
    return 0;
}

int cmd_rollout(const CommonFlags& f, const std::string& checkpoint, int horizon,
                int sample) {
    ExperimentConfig cfg = resolve(f);
    const TrainerState st = load_checkpoint(checkpoint);
    const Dataset ds = load_training_data(cfg, f.data);
    const SampleEval ev =
        evaluate_sample(st.encoder, st.system, ds, sample, horizon);
    fs::create_directories(cfg.out_dir);
    const int d = st.system.dim();
    std::ofstream fcsv(fs::path(cfg.out_dir) / "rollout.csv");
    fcsv << "step,time";
    for (int j = 0; j < d; ++j) fcsv << ",rollout_" << j << ",z_real_" << j;
    fcsv << "\n";
    const int T = static_cast<int>(ev.z_real_train.size()) / d;
    for (int s = 0; s < horizon; ++s) {
        fcsv << s << "," << (T + s) * ds.cfg.dt;
        for (int j = 0; j < d; ++j)
            fcsv << "," << ev.rollout[s * d + j] << "," << ev.z_real_extra[s * d + j];
        fcsv << "\n";
    }
    std::cout << "rollout rmse over " << horizon
              << " steps: " << ev.extrap_rmse << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "latdyn: physical-parameter estimation from video via latent "
        "dynamics.\nEnvironment: LATDYN_THREADS (worker threads), "
        "LATDYN_SIMD=scalar (force reference kernels)."};
    app.require_subcommand(1);

    CommonFlags fgen, ftrain, feval, fsweep, fdt, froll;
    int n_samples = 0, frames = 0;
    auto* generate = app.add_subcommand("generate", "render a synthetic dataset");
    add_common(generate, fgen, false);
    generate->add_option("--n-samples", n_samples, "number of samples");
    generate->add_option("--frames", frames, "frames per sample");

    auto* traincmd = app.add_subcommand("train", "train encoder + physics block");
    add_common(traincmd, ftrain, true);
    traincmd->add_option("--data", ftrain.data, "dataset root or frame folder");

    std::string ckpt_eval, ckpt_roll;
    int horizon = 20, sample = 0, horizon_roll = 20, sample_roll = 0;
    auto* evalcmd = app.add_subcommand("eval", "latent alignment + extrapolation");
    add_common(evalcmd, feval, false);
    evalcmd->add_option("--data", feval.data, "dataset root or frame folder");
    evalcmd->add_option("--checkpoint", ckpt_eval, "trained checkpoint")->required();
    evalcmd->add_option("--horizon", horizon, "extrapolation steps");
    evalcmd->add_option("--sample", sample, "sample index for the series CSVs");

    int runs = 7;
    std::string init_range;
    auto* sweepcmd = app.add_subcommand("sweep", "multi-run robustness sweep");
    add_common(sweepcmd, fsweep, true);
    sweepcmd->add_option("--data", fsweep.data, "dataset root or frame folder");
    sweepcmd->add_option("--runs", runs, "number of runs");
    sweepcmd->add_option("--init-range", init_range, "LO,HI for gamma inits");

    std::string dts = "0.2,0.4,0.8";
    auto* dtcmd = app.add_subcommand("dt-ablation",
                                     "re-generate and train per sampling period");
    add_common(dtcmd, fdt, true);
    dtcmd->add_option("--dts", dts, "comma-separated dt list");

    auto* rollcmd = app.add_subcommand("rollout", "roll the learned block forward");
    add_common(rollcmd, froll, false);
    rollcmd->add_option("--data", froll.data, "dataset root or frame folder");
    rollcmd->add_option("--checkpoint", ckpt_roll, "trained checkpoint")->required();
    rollcmd->add_option("--horizon", horizon_roll, "steps to roll");
    rollcmd->add_option("--sample", sample_roll, "sample index");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (generate->parsed()) return cmd_generate(fgen, n_samples, frames);
        if (traincmd->parsed()) return cmd_train(ftrain);
        if (evalcmd->parsed()) return cmd_eval(feval, ckpt_eval, horizon, sample);
        if (sweepcmd->parsed()) return cmd_sweep(fsweep, runs, init_range);
        if (dtcmd->parsed()) return cmd_dt_ablation(fdt, dts);
        if (rollcmd->parsed()) return cmd_rollout(froll, ckpt_roll, horizon_roll, sample_roll);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const TrainDivergence& e) {
        std::cerr << "training diverged: " << e.what() << "\ngamma at abort:";
        for (double g : e.gamma) std::cerr << " " << g;
        std::cerr << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
