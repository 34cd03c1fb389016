#include "latdyn/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

using nlohmann::json;

namespace latdyn {

namespace {

constexpr int kGradChunks = 4;  // fixed so results do not depend on threads
constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

int worker_threads() {
    if (const char* env = std::getenv("LATDYN_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(hw == 0 ? 1u : hw, 4u));
}

namespace {

void parallel_over_chunks(int n_chunks, const std::function<void(int)>& fn) {
    int nt = std::min(worker_threads(), n_chunks);
    if (nt <= 1) {
        for (int c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt - 1);
    for (int t = 1; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (int c = t; c < n_chunks; c += nt) fn(c);
        });
    for (int c = 0; c < n_chunks; c += nt) fn(c);
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Batch engine: buffers and the forward/backward passes over one batch of
// frame windows.
// ---------------------------------------------------------------------------

class BatchEngine {
  public:
    BatchEngine(const Dataset& ds, int frames_per_window, int frame_step,
                const OdeSystem& system, const Prior& prior, LossMode mode)
        : ds_(ds),
          F_(frames_per_window),
          step_(frame_step),
          prior_(prior),
          mode_(mode),
          kernels_(simd::active_kernels()) {
        order_ = system.order();
        d_ = system.dim();
        objects_ = system.kind() == OdeKind::TwoBodySpring ? 2 : 1;
        require(d_ % objects_ == 0, "latent dim must split across objects");
        d_enc_ = d_ / objects_;
        require(!ds.samples.empty(), "dataset is empty");
        in_dim_ = static_cast<int>(ds.samples[0].frame_size());
        if (objects_ > 1)
            require(ds.samples[0].n_objects() >= objects_,
                    "multi-object training needs per-object masks");
        n_learn_ = system.learnable_indices().size();
        dt_ = frame_step > 0 ? ds.cfg.dt * frame_step : ds.cfg.dt;
    }

    void set_dt(double dt) { dt_ = dt; }
    int rows_for(const std::vector<WindowRef>& windows) const {
        return static_cast<int>(windows.size()) * F_ * objects_;
    }

    const LatentBatch& batch() const { return batch_; }

    LossTerms forward(const std::vector<WindowRef>& windows,
                      const EncoderParams& enc, const OdeSystem& system) {
        require(F_ >= order_ + 1, "too few frames per window for the order");
        windows_ = &windows;
        const std::size_t B = windows.size();
        rows_ = B * F_ * objects_;
        x_.resize(rows_ * in_dim_);
        acts_.rows = rows_;
        acts_.h1.resize(rows_ * enc.h1);
        acts_.h2.resize(rows_ * enc.h2);
        acts_.z.resize(rows_ * d_enc_);

        parallel_over_chunks(kGradChunks, [&](int c) {
            const std::size_t r0 = rows_ * c / kGradChunks;
            const std::size_t r1 = rows_ * (c + 1) / kGradChunks;
            assemble_rows(windows, r0, r1);
            forward_rows(enc, r0, r1);
        });

        // latent rows per (window, frame): concatenated per-object encodings
        const std::size_t lat_rows = B * F_;
        zfull_.resize(lat_rows * d_);
        for (std::size_t r = 0; r < lat_rows; ++r)
            for (int o = 0; o < objects_; ++o)
                std::memcpy(&zfull_[r * d_ + o * d_enc_],
                            &acts_.z[(r * objects_ + o) * d_enc_],
                            sizeof(double) * d_enc_);

        const std::size_t M = B * (F_ - order_);
        batch_.rows = M;
        batch_.dim = d_;
        batch_.z.resize(M * d_);
        batch_.zhat.resize(M * d_);
        jacs_.resize(M);

        LatentHistory hist;
        hist.dt = dt_;
        hist.states.assign(order_, std::vector<double>(d_));
        std::size_t m = 0;
        for (std::size_t w = 0; w < B; ++w) {
            for (int t = order_; t < F_; ++t, ++m) {
                for (int k = 0; k < order_; ++k)
                    std::memcpy(hist.states[k].data(),
                                &zfull_[(w * F_ + t - 1 - k) * d_], sizeof(double) * d_);
                jacs_[m] = euler_step_with_jacobian(hist, system);
                std::memcpy(&batch_.zhat[m * d_], jacs_[m].zhat.data(),
                            sizeof(double) * d_);
                std::memcpy(&batch_.z[m * d_], &zfull_[(w * F_ + t) * d_],
                            sizeof(double) * d_);
            }
        }

        LossTerms terms;
        terms.l1 = prediction_loss(batch_);
        if (M >= 2) compute_moments(batch_);
        if (mode_ == LossMode::Full)
            terms.l2 = kl_loss(batch_.mu_z, batch_.var_z, prior_);
        terms.total = terms.l1 + terms.l2;
        return terms;
    }

    void backward(const EncoderParams& enc, BatchGrads& out) {
        loss_backward(batch_, prior_, mode_, lgrads_);

        gz_enc_.assign(rows_ * d_enc_, 0.0);
        out.gamma.assign(n_learn_, 0.0);

        const std::size_t B = windows_->size();
        std::size_t m = 0;
        for (std::size_t w = 0; w < B; ++w) {
            for (int t = order_; t < F_; ++t, ++m) {
                const double* gz = &lgrads_.d_z[m * d_];
                const double* gzh = &lgrads_.d_zhat[m * d_];
                const StepJacobian& J = jacs_[m];
                scatter_grad(w, t, gz);
                // chain rule into the stencil inputs
                for (int i = 0; i < d_; ++i) tmp_g_[i] = 0.0;
                for (int j = 0; j < d_; ++j)
                    for (int i = 0; i < d_; ++i)
                        tmp_g_[i] += gzh[j] * J.d_z_t[j * d_ + i];
                scatter_grad(w, t - 1, tmp_g_);
                if (order_ == 2) {
                    for (int i = 0; i < d_; ++i) tmp_g_[i] = 0.0;
                    for (int j = 0; j < d_; ++j)
                        for (int i = 0; i < d_; ++i)
                            tmp_g_[i] += gzh[j] * J.d_z_tm1[j * d_ + i];
                    scatter_grad(w, t - 2, tmp_g_);
                }
                for (std::size_t p = 0; p < n_learn_; ++p) {
                    double acc = 0.0;
                    for (int j = 0; j < d_; ++j)
                        acc += gzh[j] * J.d_gamma[j * n_learn_ + p];
                    out.gamma[p] += acc;
                }
            }
        }

        if (chunk_grads_.empty()) chunk_grads_.resize(kGradChunks);
        gh1_.resize(rows_ * enc.h1);
        gh2_.resize(rows_ * enc.h2);
        parallel_over_chunks(kGradChunks, [&](int c) {
            const std::size_t r0 = rows_ * c / kGradChunks;
            const std::size_t r1 = rows_ * (c + 1) / kGradChunks;
            EncoderGrads& g = chunk_grads_[c];
            g.match(enc);
            if (r1 > r0)
                encoder_backward_rows(
                    enc, &x_[r0 * in_dim_], r1 - r0, &acts_.h1[r0 * enc.h1],
                    &acts_.h2[r0 * enc.h2], &gz_enc_[r0 * d_enc_], g,
                    &gh1_[r0 * enc.h1], &gh2_[r0 * enc.h2], kernels_);
        });
        out.enc.match(enc);
        for (int c = 0; c < kGradChunks; ++c) out.enc.add(chunk_grads_[c]);
    }

  private:
    void assemble_rows(const std::vector<WindowRef>& windows, std::size_t r0,
                       std::size_t r1) {
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t w = r / (F_ * objects_);
            const std::size_t rem = r % (F_ * objects_);
            const int t = static_cast<int>(rem / objects_);
            const int o = static_cast<int>(rem % objects_);
            const WindowRef& win = windows[w];
            const FrameSequence& seq = ds_.samples[win.sample];
            const float* frame = seq.frame(win.start + t * step_);
            double* dst = &x_[r * in_dim_];
            if (objects_ == 1) {
                for (int i = 0; i < in_dim_; ++i) dst[i] = frame[i];
            } else {
                const std::uint8_t* mask =
                    seq.masks[o].data() +
                    static_cast<std::size_t>(win.start + t * step_) * in_dim_;
                for (int i = 0; i < in_dim_; ++i)
                    dst[i] = mask[i] ? frame[i] : 0.0;
            }
        }
    }

    void forward_rows(const EncoderParams& p, std::size_t r0, std::size_t r1) {
        if (r1 <= r0) return;
        const std::size_t rows = r1 - r0;
        double* h1 = &acts_.h1[r0 * p.h1];
        double* h2 = &acts_.h2[r0 * p.h2];
        double* z = &acts_.z[r0 * p.out_dim];
        std::memset(h1, 0, rows * p.h1 * sizeof(double));
        std::memset(h2, 0, rows * p.h2 * sizeof(double));
        std::memset(z, 0, rows * p.out_dim * sizeof(double));
        const double* x = &x_[r0 * in_dim_];
        kernels_.gemm_nt(rows, p.h1, p.in_dim, x, p.w1.data(), h1);
        kernels_.add_bias_rows(h1, rows, p.h1, p.b1.data());
        kernels_.relu(h1, rows * p.h1);
        kernels_.gemm_nt(rows, p.h2, p.h1, h1, p.w2.data(), h2);
        kernels_.add_bias_rows(h2, rows, p.h2, p.b2.data());
        kernels_.relu(h2, rows * p.h2);
        kernels_.gemm_nt(rows, p.out_dim, p.h2, h2, p.w3.data(), z);
        kernels_.add_bias_rows(z, rows, p.out_dim, p.b3.data());
    }

    void scatter_grad(std::size_t w, int t, const double* g) {
        const std::size_t base = (w * F_ + t) * objects_;
        for (int o = 0; o < objects_; ++o)
            for (int j = 0; j < d_enc_; ++j)
                gz_enc_[(base + o) * d_enc_ + j] += g[o * d_enc_ + j];
    }

    const Dataset& ds_;
    int F_, step_;
    Prior prior_;
    LossMode mode_;
    const simd::Kernels& kernels_;
    int order_ = 0, d_ = 0, objects_ = 1, d_enc_ = 0, in_dim_ = 0;
    std::size_t n_learn_ = 0;
    double dt_ = 0.0;

    const std::vector<WindowRef>* windows_ = nullptr;
    std::size_t rows_ = 0;
    std::vector<double> x_, zfull_, gz_enc_, gh1_, gh2_;
    EncoderActivations acts_;
    LatentBatch batch_;
    std::vector<StepJacobian> jacs_;
    LossGrads lgrads_;
    std::vector<EncoderGrads> chunk_grads_;
    double tmp_g_[8];
};

}  // namespace

// ---------------------------------------------------------------------------
// Public single-batch entry points
// ---------------------------------------------------------------------------

ForwardResult forward_batch(const Dataset& ds,
                            const std::vector<WindowRef>& windows,
                            int frames_per_window, int frame_step,
                            const EncoderParams& enc, const OdeSystem& system,
                            const Prior& prior, LossMode mode) {
    BatchEngine engine(ds, frames_per_window, frame_step, system, prior, mode);
    ForwardResult res;
    res.terms = engine.forward(windows, enc, system);
    res.batch = engine.batch();
    return res;
}

BatchGrads backward_batch(const Dataset& ds,
                          const std::vector<WindowRef>& windows,
                          int frames_per_window, int frame_step,
                          const EncoderParams& enc, const OdeSystem& system,
                          const Prior& prior, LossMode mode,
                          ForwardResult* forward_out) {
    BatchEngine engine(ds, frames_per_window, frame_step, system, prior, mode);
    const LossTerms terms = engine.forward(windows, enc, system);
    if (forward_out) {
        forward_out->terms = terms;
        forward_out->batch = engine.batch();
    }
    BatchGrads grads;
    engine.backward(enc, grads);
    return grads;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

TrainDivergence::TrainDivergence(int epoch_, const LossTerms& terms_,
                                 std::vector<double> gamma_)
    : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch_) +
                         " (l1=" + std::to_string(terms_.l1) +
                         ", l2=" + std::to_string(terms_.l2) + ")"),
      epoch(epoch_),
      terms(terms_),
      gamma(std::move(gamma_)) {}

double lr_for_gamma(double gamma_init) {
    if (gamma_init == 0.0) return 1e-2;
    return std::pow(10.0, std::floor(std::log10(std::abs(gamma_init))));
}

namespace {

struct AdamTensors {
    std::vector<std::vector<double>> m, v;

    void match(const EncoderParams& p) {
        const std::size_t sizes[6] = {p.w1.size(), p.b1.size(), p.w2.size(),
                                      p.b2.size(), p.w3.size(), p.b3.size()};
        m.assign(6, {});
        v.assign(6, {});
        for (int i = 0; i < 6; ++i) {
            m[i].assign(sizes[i], 0.0);
            v[i].assign(sizes[i], 0.0);
        }
    }
};

void adam_update_encoder(EncoderParams& p, const EncoderGrads& g,
                         AdamTensors& ad, double lr, std::int64_t t,
                         const simd::Kernels& k) {
    const double c1 = 1.0 / (1.0 - std::pow(kBeta1, static_cast<double>(t)));
    const double c2 = 1.0 / (1.0 - std::pow(kBeta2, static_cast<double>(t)));
    std::vector<double>* params[6] = {&p.w1, &p.b1, &p.w2, &p.b2, &p.w3, &p.b3};
    const std::vector<double>* grads[6] = {&g.w1, &g.b1, &g.w2,
                                           &g.b2, &g.w3, &g.b3};
    for (int i = 0; i < 6; ++i)
        k.adam_step(params[i]->data(), grads[i]->data(), ad.m[i].data(),
                    ad.v[i].data(), params[i]->size(), lr, kBeta1, kBeta2,
                    kAdamEps, c1, c2);
}

json config_to_json(const TrainConfig& c) {
    json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["frames_per_sample"] = c.frames_per_sample;
    j["window_stride"] = c.window_stride;
    j["dt"] = c.dt;
    j["encoder_lr"] = c.encoder_lr;
    j["hidden1"] = c.hidden1;
    j["hidden2"] = c.hidden2;
    j["gamma_init"] = c.gamma_init;
    j["gamma_init_range"] = {c.gamma_init_lo, c.gamma_init_hi};
    j["prior_mean"] = c.prior_mean;
    j["prior_std"] = c.prior_std;
    j["loss_mode"] = c.loss_mode == LossMode::Full ? "full" : "mse-only";
    j["seed"] = c.seed;
    j["scenario"] = c.scenario;
    return j;
}

std::vector<WindowRef> build_windows(const Dataset& ds, int F, int step,
                                     int stride_windows) {
    std::vector<WindowRef> out;
    const int span = (F - 1) * step;
    const int stride = std::max(1, stride_windows * step);
    for (std::size_t s = 0; s < ds.samples.size(); ++s) {
        const int T = ds.samples[s].t;
        for (int start = 0; start + span <= T - 1; start += stride)
            out.push_back({static_cast<int>(s), start});
    }
    return out;
}

}  // namespace

RunReport train(const Dataset& ds, const TrainConfig& cfg,
                const TrainOutputs& out, const std::string& resume_from) {
    const auto t_start = std::chrono::steady_clock::now();
    require(!ds.samples.empty(), "dataset is empty");
    const OdeSystem& proto = ds.cfg.dynamics;
    const int order = proto.order();

    int step = 1;
    double dt_phys = ds.cfg.dt;
    if (cfg.dt > 0.0) {
        const double ratio = cfg.dt / ds.cfg.dt;
        const double rounded = std::round(ratio);
        require(rounded >= 1.0 && std::abs(ratio - rounded) < 1e-6,
                "train dt must be an integer multiple of the dataset dt");
        step = static_cast<int>(rounded);
        dt_phys = cfg.dt;
    }
    const int T0 = ds.samples[0].t;
    const int F = cfg.frames_per_sample > 0 ? cfg.frames_per_sample
                                            : (T0 - 1) / step + 1;
    require(F >= order + 1, "need at least order+1 frames per sample");
    const auto canonical_windows = build_windows(
        ds, F, step, cfg.window_stride > 0 ? cfg.window_stride : F);
    require(!canonical_windows.empty(), "no usable frame windows in the dataset");

    const Prior prior = Prior::isotropic(proto.dim(), cfg.prior_mean, cfg.prior_std);

    std::mt19937_64 rng(mix_seed(cfg.seed, 0));
    OdeSystem system = proto;
    const auto learn_idx = system.learnable_indices();
    std::vector<double> gamma0;
    if (!cfg.gamma_init.empty()) {
        require(cfg.gamma_init.size() == learn_idx.size(),
                "gamma_init size must match the learnable parameter count");
        gamma0 = cfg.gamma_init;
    } else {
        std::uniform_real_distribution<double> u(cfg.gamma_init_lo, cfg.gamma_init_hi);
        for (std::size_t i = 0; i < learn_idx.size(); ++i) gamma0.push_back(u(rng));
    }

    const int objects = system.kind() == OdeKind::TwoBodySpring ? 2 : 1;
    const int d_enc = system.dim() / objects;
    const int in_dim = static_cast<int>(ds.samples[0].frame_size());

    TrainerState st;
    int start_epoch = 0;
    if (!resume_from.empty()) {
        st = load_checkpoint(resume_from);
        require(st.encoder.in_dim == in_dim && st.encoder.out_dim == d_enc,
                "checkpoint encoder dims do not match the dataset/system");
        require(st.system.kind() == system.kind(), "checkpoint system kind mismatch");
        system = st.system;
        gamma0 = st.gamma_init;
        start_epoch = st.epoch;
        std::istringstream is(st.rng_state);
        is >> rng;
    } else {
        st.encoder = init_encoder(in_dim, cfg.hidden1, cfg.hidden2, d_enc,
                                  mix_seed(cfg.seed, 1));
        st.system = system;
        st.system.set_learnable_values(gamma0);
        system = st.system;
        st.enc_adam_m.clear();
        AdamTensors tmp;
        tmp.match(st.encoder);
        st.enc_adam_m = tmp.m;
        st.enc_adam_v = tmp.v;
        st.gamma_adam_m.assign(gamma0.size(), 0.0);
        st.gamma_adam_v.assign(gamma0.size(), 0.0);
        st.gamma_init = gamma0;
    }

    std::vector<double> gamma_lr(gamma0.size());
    for (std::size_t i = 0; i < gamma0.size(); ++i)
        gamma_lr[i] = lr_for_gamma(gamma0[i]);

    AdamTensors enc_adam;
    enc_adam.m = st.enc_adam_m;
    enc_adam.v = st.enc_adam_v;

    BatchEngine engine(ds, F, step, system, prior, cfg.loss_mode);
    engine.set_dt(dt_phys);
    const auto& kernels = simd::active_kernels();

    RunReport report;
    report.scenario = cfg.scenario;
    report.seed = cfg.seed;
    report.gamma_names = system.learnable_names();
    report.init_gamma = gamma0;
    report.kernel_name = kernels.name;
    report.config_echo = config_to_json(cfg).dump();

    const std::size_t bs = cfg.batch_size > 0
                               ? static_cast<std::size_t>(cfg.batch_size)
                               : canonical_windows.size();
    BatchGrads grads;
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        // reshuffled from the canonical order so the permutation depends
        // only on the rng stream (keeps checkpoint resume bit-identical)
        auto windows = canonical_windows;
        std::shuffle(windows.begin(), windows.end(), rng);
        double sum_l1 = 0.0, sum_l2 = 0.0, sum_total = 0.0, sum_var = 0.0;
        int batches = 0;
        std::size_t pos = 0;
        while (pos < windows.size()) {
            std::size_t end = std::min(pos + bs, windows.size());
            // avoid a trailing batch too small for moments
            if (end < windows.size() &&
                (windows.size() - end) * (F - order) < 2)
                end = windows.size();
            std::vector<WindowRef> batch(windows.begin() + pos, windows.begin() + end);
            pos = end;

            const LossTerms terms = engine.forward(batch, st.encoder, system);
            if (!std::isfinite(terms.total))
                throw TrainDivergence(epoch, terms, system.learnable_values());
            engine.backward(st.encoder, grads);

            ++st.step;
            adam_update_encoder(st.encoder, grads.enc, enc_adam, cfg.encoder_lr,
                                st.step, kernels);
            const double c1 = 1.0 / (1.0 - std::pow(kBeta1, static_cast<double>(st.step)));
            const double c2 = 1.0 / (1.0 - std::pow(kBeta2, static_cast<double>(st.step)));
            std::vector<double> gv = system.learnable_values();
            for (std::size_t i = 0; i < gv.size(); ++i) {
                double& m = st.gamma_adam_m[i];
                double& v = st.gamma_adam_v[i];
                const double g = grads.gamma[i];
                m = kBeta1 * m + (1.0 - kBeta1) * g;
                v = kBeta2 * v + (1.0 - kBeta2) * g * g;
                gv[i] -= gamma_lr[i] * (m * c1) / (std::sqrt(v * c2) + kAdamEps);
            }
            system.set_learnable_values(gv);

            sum_l1 += terms.l1;
            sum_l2 += terms.l2;
            sum_total += terms.total;
            double vbar = 0.0;
            const auto& b = engine.batch();
            if (!b.var_z.empty()) {
                for (double v : b.var_z) vbar += v;
                vbar /= b.var_z.size();
            }
            sum_var += vbar;
            ++batches;
        }
        report.l1.push_back(sum_l1 / batches);
        report.l2.push_back(sum_l2 / batches);
        report.total.push_back(sum_total / batches);
        report.z_var.push_back(sum_var / batches);
        report.gamma_epochs.push_back(system.learnable_values());
    }

    st.system = system;
    st.epoch = cfg.epochs;
    st.enc_adam_m = enc_adam.m;
    st.enc_adam_v = enc_adam.v;
    {
        std::ostringstream os;
        os << rng;
        st.rng_state = os.str();
    }

    report.final_gamma = system.learnable_values();
    if (system.kind() == OdeKind::Torricelli)
        for (auto& g : report.final_gamma) g = std::abs(g);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();

    if (!out.checkpoint_path.empty()) save_checkpoint(st, out.checkpoint_path);
    if (!out.csv_path.empty()) write_epoch_csv(report, out.csv_path);
    return report;
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'L', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void wblock(std::ofstream& f, const std::vector<double>& v) {
    const std::uint64_t n = v.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

std::vector<double> rblock(std::ifstream& f) {
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<double> v(n);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("truncated checkpoint");
    return v;
}

void wstring(std::ofstream& f, const std::string& s) {
    const std::uint64_t n = s.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f.write(s.data(), static_cast<std::streamsize>(n));
}

std::string rstring(std::ifstream& f) {
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::string s(n, '\0');
    f.read(s.data(), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("truncated checkpoint");
    return s;
}

}  // namespace

void save_checkpoint(const TrainerState& st, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(kCkptMagic, sizeof(kCkptMagic));
    const std::int32_t dims[4] = {st.encoder.in_dim, st.encoder.h1,
                                  st.encoder.h2, st.encoder.out_dim};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    wblock(f, st.encoder.w1);
    wblock(f, st.encoder.b1);
    wblock(f, st.encoder.w2);
    wblock(f, st.encoder.b2);
    wblock(f, st.encoder.w3);
    wblock(f, st.encoder.b3);
    for (const auto& t : st.enc_adam_m) wblock(f, t);
    for (const auto& t : st.enc_adam_v) wblock(f, t);

    wstring(f, st.system.kind_name());
    const std::int32_t order = st.system.order();
    f.write(reinterpret_cast<const char*>(&order), sizeof(order));
    std::vector<double> pv;
    for (const auto& p : st.system.params()) pv.push_back(p.value);
    wblock(f, pv);
    wblock(f, st.gamma_init);
    wblock(f, st.gamma_adam_m);
    wblock(f, st.gamma_adam_v);
    f.write(reinterpret_cast<const char*>(&st.step), sizeof(st.step));
    const std::int32_t epoch = st.epoch;
    f.write(reinterpret_cast<const char*>(&epoch), sizeof(epoch));
    wstring(f, st.rng_state);
    if (!f) throw std::runtime_error("write failed: " + path);
}

TrainerState load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw std::runtime_error("bad checkpoint format: " + path);
    TrainerState st;
    std::int32_t dims[4];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    st.encoder.in_dim = dims[0];
    st.encoder.h1 = dims[1];
    st.encoder.h2 = dims[2];
    st.encoder.out_dim = dims[3];
    st.encoder.w1 = rblock(f);
    st.encoder.b1 = rblock(f);
    st.encoder.w2 = rblock(f);
    st.encoder.b2 = rblock(f);
    st.encoder.w3 = rblock(f);
    st.encoder.b3 = rblock(f);
    st.enc_adam_m.resize(6);
    st.enc_adam_v.resize(6);
    for (auto& t : st.enc_adam_m) t = rblock(f);
    for (auto& t : st.enc_adam_v) t = rblock(f);
    const std::string kind = rstring(f);
    std::int32_t order = 0;
    f.read(reinterpret_cast<char*>(&order), sizeof(order));
    const std::vector<double> pv = rblock(f);
    st.system = make_system(kind, order, pv);
    st.gamma_init = rblock(f);
    st.gamma_adam_m = rblock(f);
    st.gamma_adam_v = rblock(f);
    f.read(reinterpret_cast<char*>(&st.step), sizeof(st.step));
    std::int32_t epoch = 0;
    f.read(reinterpret_cast<char*>(&epoch), sizeof(epoch));
    st.epoch = epoch;
    st.rng_state = rstring(f);
    if (!f) throw std::runtime_error("truncated checkpoint: " + path);
    return st;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

void write_epoch_csv(const RunReport& r, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,l1,l2,total";
    for (const auto& n : r.gamma_names) f << "," << n;
    f << "\n";
    for (std::size_t e = 0; e < r.total.size(); ++e) {
        f << e << "," << fmt_double(r.l1[e]) << "," << fmt_double(r.l2[e]) << ","
          << fmt_double(r.total[e]);
        for (double g : r.gamma_epochs[e]) f << "," << fmt_double(g);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string run_report_json(const RunReport& r) {
    json j;
    j["scenario"] = r.scenario;
    j["seed"] = r.seed;
    j["gamma_names"] = r.gamma_names;
    j["l1"] = r.l1;
    j["l2"] = r.l2;
    j["total"] = r.total;
    j["z_var"] = r.z_var;
    j["gamma_epochs"] = r.gamma_epochs;
    j["init_gamma"] = r.init_gamma;
    j["final_gamma"] = r.final_gamma;
    j["wall_seconds"] = r.wall_seconds;
    j["kernel"] = r.kernel_name;
    j["config"] = json::parse(r.config_echo.empty() ? "{}" : r.config_echo);
    return j.dump(2);
}

RunReport run_report_from_json(const std::string& text) {
    const json j = json::parse(text);
    RunReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.gamma_names = j.at("gamma_names").get<std::vector<std::string>>();
    r.l1 = j.at("l1").get<std::vector<double>>();
    r.l2 = j.at("l2").get<std::vector<double>>();
    r.total = j.at("total").get<std::vector<double>>();
    r.z_var = j.at("z_var").get<std::vector<double>>();
    r.gamma_epochs = j.at("gamma_epochs").get<std::vector<std::vector<double>>>();
    r.init_gamma = j.at("init_gamma").get<std::vector<double>>();
    r.final_gamma = j.at("final_gamma").get<std::vector<double>>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.kernel_name = j.at("kernel").get<std::string>();
    r.config_echo = j.at("config").dump();
    return r;
}

}  // namespace latdyn
