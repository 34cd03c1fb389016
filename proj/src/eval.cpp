#include "latdyn/eval.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace latdyn {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
}

// Rendered observable for a raw simulator state (the intensity scenario is
// an affine map into [0.2, 1.0]; the others render the state directly).
double rendered_state(const ScenarioConfig& cfg, double raw) {
    if (cfg.scenario == Scenario::Intensity)
        return 0.6 + 0.4 * (cfg.amplitude != 0.0 ? raw / cfg.amplitude : raw);
    return raw;
}

// Latent for one frame; applies the per-object mask wiring for
// multi-object systems.
std::vector<double> encode_frame_latent(const EncoderParams& enc,
                                        const FrameSequence& seq, int t,
                                        const OdeSystem& system) {
    const int objects = system.kind() == OdeKind::TwoBodySpring ? 2 : 1;
    const std::size_t n = seq.frame_size();
    std::vector<double> latent;
    std::vector<double> input(n);
    const float* frame = seq.frame(t);
    for (int o = 0; o < objects; ++o) {
        if (objects == 1) {
            for (std::size_t i = 0; i < n; ++i) input[i] = frame[i];
        } else {
            const std::uint8_t* mask = seq.masks[o].data() + std::size_t(t) * n;
            for (std::size_t i = 0; i < n; ++i)
                input[i] = mask[i] ? frame[i] : 0.0;
        }
        const std::vector<double> z = encode(enc, input);
        latent.insert(latent.end(), z.begin(), z.end());
    }
    return latent;
}

}  // namespace

AlignedLatent align_affine(const std::vector<double>& z,
                           const std::vector<double>& z_real) {
    require(z.size() == z_real.size(), "series length mismatch");
    require(z.size() >= 2, "need at least two points to align");
    const double mz = mean_of(z);
    const double mr = mean_of(z_real);
    double cov = 0.0, var = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        cov += (z[i] - mz) * (z_real[i] - mr);
        var += (z[i] - mz) * (z[i] - mz);
    }
    if (var <= 1e-30)
        throw std::invalid_argument("constant latent: affine fit is degenerate");
    AlignedLatent out;
    out.scale = cov / var;
    out.offset = mr - out.scale * mz;
    out.aligned.resize(z.size());
    double se = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.aligned[i] = out.scale * z[i] + out.offset;
        const double e = out.aligned[i] - z_real[i];
        se += e * e;
    }
    out.rmse = std::sqrt(se / z.size());
    return out;
}

SampleEval evaluate_sample(const EncoderParams& enc, const OdeSystem& system,
                           const Dataset& ds, int sample, int horizon) {
    require(sample >= 0 && sample < static_cast<int>(ds.samples.size()),
            "sample index out of range");
    require(horizon >= 0, "horizon must be >= 0");
    const FrameSequence& seq = ds.samples[sample];
    require(!seq.gt_trajectory.empty(), "sample has no reference trajectory");
    const int d = system.dim();
    require(seq.gt_dim == d, "reference dimension does not match the system");
    const int T = seq.t;
    const int n = system.order();

    SampleEval ev;
    ev.latent.resize(static_cast<std::size_t>(T) * d);
    for (int t = 0; t < T; ++t) {
        const auto z = encode_frame_latent(enc, seq, t, system);
        std::copy(z.begin(), z.end(), ev.latent.begin() + std::size_t(t) * d);
    }
    ev.z_real_train = seq.gt_trajectory;

    // per-dimension affine fits on the training window
    std::vector<double> scales(d), offsets(d);
    double rmse_acc = 0.0;
    ev.aligned.resize(ev.latent.size());
    for (int j = 0; j < d; ++j) {
        std::vector<double> zc(T), rc(T);
        for (int t = 0; t < T; ++t) {
            zc[t] = ev.latent[std::size_t(t) * d + j];
            rc[t] = seq.gt_trajectory[std::size_t(t) * d + j];
        }
        const AlignedLatent a = align_affine(zc, rc);
        scales[j] = a.scale;
        offsets[j] = a.offset;
        for (int t = 0; t < T; ++t) ev.aligned[std::size_t(t) * d + j] = a.aligned[t];
        rmse_acc += a.rmse * a.rmse;
    }
    ev.align_rmse = std::sqrt(rmse_acc / d);
    ev.align_scale = scales[0];
    ev.align_offset = offsets[0];

    if (horizon == 0) return ev;

    // roll the learned block from the last n encoded frames
    LatentHistory hist;
    hist.dt = seq.dt;
    for (int k = 0; k < n; ++k)
        hist.states.push_back(std::vector<double>(
            ev.latent.begin() + std::size_t(T - 1 - k) * d,
            ev.latent.begin() + std::size_t(T - k) * d));
    const std::vector<double> ro = rollout(hist, system, horizon);

    // reference continued by the simulator from the stored initial state
    require(!seq.init.empty(), "sample lacks the initial state for extrapolation");
    const std::vector<double> raw =
        simulate_trajectory(ds.cfg.dynamics, seq.init, seq.dt, T + horizon);
    ev.z_real_extra.resize(static_cast<std::size_t>(horizon) * d);
    for (int h = 0; h < horizon; ++h)
        for (int j = 0; j < d; ++j)
            ev.z_real_extra[std::size_t(h) * d + j] =
                rendered_state(ds.cfg, raw[std::size_t(T + h) * d + j]);

    ev.rollout.resize(ro.size());
    double se = 0.0;
    for (int h = 0; h < horizon; ++h)
        for (int j = 0; j < d; ++j) {
            const double v = scales[j] * ro[std::size_t(h) * d + j] + offsets[j];
            ev.rollout[std::size_t(h) * d + j] = v;
            const double e = v - ev.z_real_extra[std::size_t(h) * d + j];
            se += e * e;
        }
    ev.extrap_rmse = std::sqrt(se / (static_cast<double>(horizon) * d));
    return ev;
}

double extrapolation_error(const EncoderParams& enc, const OdeSystem& system,
                           const Dataset& ds, int horizon) {
    require(horizon >= 0, "horizon must be >= 0");
    if (horizon == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t s = 0; s < ds.samples.size(); ++s)
        acc += evaluate_sample(enc, system, ds, static_cast<int>(s), horizon)
                   .extrap_rmse;
    return acc / ds.samples.size();
}

SweepReport robustness_sweep(const Dataset& ds, const TrainConfig& cfg,
                             int n_runs, std::pair<double, double> init_range) {
    require(n_runs >= 2, "sweep needs at least 2 runs");
    SweepReport rep;
    std::mt19937_64 rng(cfg.seed ^ 0x5157EEDULL);
    std::uniform_real_distribution<double> u(init_range.first, init_range.second);

    const auto learn = ds.cfg.dynamics.learnable_names();
    rep.gamma_names = learn;
    for (int r = 0; r < n_runs; ++r) {
        TrainConfig rc = cfg;
        rc.gamma_init.clear();
        for (std::size_t i = 0; i < learn.size(); ++i) rc.gamma_init.push_back(u(rng));
        SweepRow row;
        row.run = r;
        row.seed = rc.seed;
        row.init_gamma = rc.gamma_init;
        try {
            RunReport rr = train(ds, rc);
            row.final_gamma = rr.final_gamma;
            rep.runs.push_back(std::move(rr));
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rep.rows.push_back(std::move(row));
    }

    const std::size_t np = learn.size();
    rep.mean.assign(np, 0.0);
    rep.stddev.assign(np, 0.0);
    int ok = 0;
    for (const auto& row : rep.rows)
        if (!row.failed) {
            ++ok;
            for (std::size_t i = 0; i < np; ++i) rep.mean[i] += row.final_gamma[i];
        }
    if (ok > 0)
        for (auto& m : rep.mean) m /= ok;
    if (ok > 1) {
        for (const auto& row : rep.rows)
            if (!row.failed)
                for (std::size_t i = 0; i < np; ++i) {
                    const double d = row.final_gamma[i] - rep.mean[i];
                    rep.stddev[i] += d * d;
                }
        for (auto& s : rep.stddev) s = std::sqrt(s / (ok - 1));
    }
    return rep;
}

std::vector<DtAblationRow> dt_ablation(const ScenarioConfig& scene,
                                       const std::vector<double>& dts,
                                       const TrainConfig& cfg) {
    require(!dts.empty(), "dt list must be non-empty");
    std::vector<DtAblationRow> rows;
    for (double dt : dts) {
        ScenarioConfig sc = scene;
        sc.dt = dt;
        const Dataset ds = generate_dataset(sc);
        TrainConfig tc = cfg;
        tc.dt = 0.0;  // use the regenerated dataset's dt directly
        const RunReport rr = train(ds, tc);
        rows.push_back({dt, rr.final_gamma});
    }
    return rows;
}

void write_sweep_csv(const SweepReport& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "run,seed,failed";
    for (const auto& n : r.gamma_names) f << ",init_" << n;
    for (const auto& n : r.gamma_names) f << ",final_" << n;
    f << "\n";
    for (const auto& row : r.rows) {
        f << row.run << "," << row.seed << "," << (row.failed ? 1 : 0);
        for (double g : row.init_gamma) f << "," << fmt_double(g);
        if (row.failed)
            for (std::size_t i = 0; i < r.gamma_names.size(); ++i) f << ",";
        else
            for (double g : row.final_gamma) f << "," << fmt_double(g);
        f << "\n";
    }
    f << "mean,,";
    for (std::size_t i = 0; i < r.gamma_names.size(); ++i) f << ",";
    for (double m : r.mean) f << "," << fmt_double(m);
    f << "\n";
    f << "std,,";
    for (std::size_t i = 0; i < r.gamma_names.size(); ++i) f << ",";
    for (double s : r.stddev) f << "," << fmt_double(s);
    f << "\n";
}

void write_dt_ablation_csv(const std::vector<std::string>& gamma_names,
                           const std::vector<DtAblationRow>& rows,
                           const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "dt";
    for (const auto& n : gamma_names) f << ",final_" << n;
    f << "\n";
    for (const auto& row : rows) {
        f << fmt_double(row.dt);
        for (double g : row.final_gamma) f << "," << fmt_double(g);
        f << "\n";
    }
}

// ---------------------------------------------------------------------------
// Manual ground-truth estimators
// ---------------------------------------------------------------------------

double gt_pendulum_damping(const std::vector<std::pair<double, double>>& peaks) {
    require(peaks.size() >= 2, "need at least two peaks");
    double mt = 0.0, ml = 0.0;
    for (const auto& [t, x] : peaks) {
        require(x > 0.0, "peak offsets must be positive");
        mt += t;
        ml += std::log(x);
    }
    mt /= peaks.size();
    ml /= peaks.size();
    double cov = 0.0, var = 0.0;
    for (const auto& [t, x] : peaks) {
        cov += (t - mt) * (std::log(x) - ml);
        var += (t - mt) * (t - mt);
    }
    require(var > 0.0, "peak times must not be identical");
    return -2.0 * (cov / var);
}

double gt_torricelli_k(double h0, double ht, double t) {
    require(t > 0.0, "duration must be > 0");
    require(h0 >= ht && ht >= 0.0, "heights must satisfy h0 >= ht >= 0");
    return 2.0 * (std::sqrt(h0) - std::sqrt(ht)) / t;
}

double gt_sliding_mu(double alpha_deg, double s, double t, double g) {
    require(t > 0.0, "duration must be > 0");
    require(alpha_deg > 0.0 && alpha_deg < 90.0, "angle must be in (0, 90)");
    const double a = alpha_deg * 3.14159265358979323846 / 180.0;
    return std::tan(a) - 2.0 * s / (g * t * t);
}

double gt_freefall_focal(double r_pix0, double r0, double h0) {
    require(r_pix0 > 0.0 && r0 > 0.0 && h0 > 0.0, "all inputs must be positive");
    return (r_pix0 / r0) * h0;
}

}  // namespace latdyn
