#include "latdyn/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace latdyn {

namespace {

constexpr double kTwoPi = 6.283185307179586;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// ---------------------------------------------------------------------------
// Reference integration
// ---------------------------------------------------------------------------

// First-order form y' = f(y) of every supported kind. FreeFallScale is
// integrated in object-distance space and mapped back to apparent radius.
struct ContinuousRhs {
    const OdeSystem& sys;
    int state_dim;  // order * d

    void operator()(const double* y, double* dy) const {
        const int d = sys.dim();
        const int n = sys.order();
        // derivative chain: y = [z, z', ..., z^(n-1)]
        for (int k = 0; k + 1 < n; ++k)
            for (int i = 0; i < d; ++i) dy[k * d + i] = y[(k + 1) * d + i];
        double* top = dy + (n - 1) * d;
        switch (sys.kind()) {
            case OdeKind::LinearAutonomous:
                for (int i = 0; i < d; ++i) {
                    double a = 0.0;
                    for (int k = 0; k < n; ++k) a -= sys.param(k) * y[k * d + i];
                    top[i] = a;
                }
                break;
            case OdeKind::Pendulum:
                top[0] = -sys.param(0) * y[1] -
                         (sys.param(2) / sys.param(1)) * std::sin(y[0]);
                break;
            case OdeKind::Torricelli:
                top[0] = -sys.param(0) * std::sqrt(std::max(y[0], 0.0));
                break;
            case OdeKind::SlidingBlock:
                top[0] = sys.param(0);
                break;
            case OdeKind::ExponentialDecay:
                top[0] = -sys.param(0) * y[0];
                break;
            case OdeKind::FreeFallScale:
                top[0] = sys.param(0);  // state here is h with h'' = g
                break;
            case OdeKind::TwoBodySpring: {
                const double k = sys.param(0);
                const double l = sys.param(1);
                const double dx = y[0] - y[2];
                const double dyv = y[1] - y[3];
                const double dist = std::max(std::sqrt(dx * dx + dyv * dyv), 1e-8);
                const double fx = -k * dx - l * dx / dist;
                const double fy = -k * dyv - l * dyv / dist;
                top[0] = fx;
                top[1] = fy;
                top[2] = -fx;
                top[3] = -fy;
                break;
            }
        }
    }
};

void rk4_step(const ContinuousRhs& rhs, std::vector<double>& y, double h,
              std::vector<double>& k1, std::vector<double>& k2,
              std::vector<double>& k3, std::vector<double>& k4,
              std::vector<double>& tmp) {
    const std::size_t n = y.size();
    rhs(y.data(), k1.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    rhs(tmp.data(), k2.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    rhs(tmp.data(), k3.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    rhs(tmp.data(), k4.data());
    for (std::size_t i = 0; i < n; ++i)
        y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace

std::vector<double> simulate_trajectory(const OdeSystem& system,
                                        const std::vector<std::vector<double>>& init,
                                        double dt, int T) {
    const int d = system.dim();
    const int n = system.order();
    require(static_cast<int>(init.size()) == n,
            "init must provide state and order-1 derivatives");
    require(T >= n, "T must be >= system order");
    require(dt > 0.0, "dt must be > 0");

    std::vector<double> y(static_cast<std::size_t>(n) * d);
    const bool freefall = system.kind() == OdeKind::FreeFallScale;
    if (freefall) {
        // map (r, r') to (h, h') through r = r0 f / h
        const double c = system.param(1) * system.param(2);
        const double r = std::max(init[0][0], 1e-8);
        const double h = c / r;
        y[0] = h;
        y[1] = init.size() > 1 ? -c * init[1][0] / (r * r) : 0.0;
    } else {
        for (int k = 0; k < n; ++k) {
            require(static_cast<int>(init[k].size()) == d, "init dimension mismatch");
            for (int i = 0; i < d; ++i) y[k * d + i] = init[k][i];
        }
    }

    ContinuousRhs rhs{system, n * d};
    std::vector<double> k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()),
        tmp(y.size());

    const int substeps = 100;
    const double h = dt / substeps;
    std::vector<double> traj(static_cast<std::size_t>(T) * d);
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < d; ++i) {
            double v = y[i];
            if (freefall) v = system.param(1) * system.param(2) / std::max(v, 1e-8);
            traj[static_cast<std::size_t>(t) * d + i] = v;
        }
        if (t + 1 < T)
            for (int s = 0; s < substeps; ++s) rk4_step(rhs, y, h, k1, k2, k3, k4, tmp);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Rendering (4x4 supersampled coverage, pixel centers at integer coords)
// ---------------------------------------------------------------------------

namespace {

constexpr double kSub[4] = {-0.375, -0.125, 0.125, 0.375};

template <class Inside>
void accumulate_coverage(std::vector<float>& cov, int w, int h, double x0,
                         double y0, double x1, double y1, Inside inside) {
    const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
    const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
    const int ix1 = std::min(w - 1, static_cast<int>(std::ceil(x1)));
    const int iy1 = std::min(h - 1, static_cast<int>(std::ceil(y1)));
    for (int iy = iy0; iy <= iy1; ++iy) {
        for (int ix = ix0; ix <= ix1; ++ix) {
            int cnt = 0;
            for (int sy = 0; sy < 4; ++sy)
                for (int sx = 0; sx < 4; ++sx)
                    if (inside(ix + kSub[sx], iy + kSub[sy])) ++cnt;
            if (cnt > 0) {
                float& c = cov[static_cast<std::size_t>(iy) * w + ix];
                c = std::max(c, cnt / 16.0f);
            }
        }
    }
}

std::vector<float> disc_coverage(int w, int h, double cx, double cy, double r) {
    std::vector<float> cov(static_cast<std::size_t>(w) * h, 0.0f);
    if (r <= 0.0) return cov;
    const double r2 = r * r;
    accumulate_coverage(cov, w, h, cx - r, cy - r, cx + r, cy + r,
                        [&](double x, double y) {
                            const double dx = x - cx, dy = y - cy;
                            return dx * dx + dy * dy <= r2;
                        });
    return cov;
}

// Fixed irregular blob used by the intensity scenario: union of three discs,
// asymmetric, covering roughly a fifth of the frame.
const std::vector<float>& intensity_blob(int w, int h) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::vector<float>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find({w, h});
    if (it != cache.end()) return it->second;

    std::vector<float> cov(static_cast<std::size_t>(w) * h, 0.0f);
    const double s = w / 50.0, sy = h / 50.0;
    const double cxs[3] = {20.0 * s, 30.0 * s, 22.0 * s};
    const double cys[3] = {18.0 * sy, 24.0 * sy, 31.0 * sy};
    const double rs[3] = {8.0 * s, 9.0 * s, 7.0 * s};
    accumulate_coverage(cov, w, h, 0, 0, w - 1, h - 1, [&](double x, double y) {
        for (int i = 0; i < 3; ++i) {
            const double dx = x - cxs[i], dy = y - cys[i];
            if (dx * dx + dy * dy <= rs[i] * rs[i]) return true;
        }
        return false;
    });
    return cache.emplace(std::make_pair(w, h), std::move(cov)).first->second;
}

}  // namespace

std::vector<float> render_pendulum(double theta_deg, const ScenarioConfig& cfg) {
    require(theta_deg >= -180.0 && theta_deg <= 180.0,
            "pendulum angle must be in [-180, 180] degrees");
    const int w = cfg.width, h = cfg.height;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double th = theta_deg * (kTwoPi / 360.0);
    const double arm = kPendulumArmPx * (w / 50.0);
    const double bob = kPendulumBobRadiusPx * (w / 50.0);
    const double bx = cx + arm * std::sin(th);
    const double by = cy + arm * std::cos(th);
    return disc_coverage(w, h, bx, by, bob);
}

std::vector<float> render_intensity(double z, const ScenarioConfig& cfg,
                                    RenderDiag* diag) {
    double v = z;
    if (v < 0.2 || v > 1.0) {
        v = std::clamp(v, 0.2, 1.0);
        if (diag) ++diag->clip_events;
    }
    const auto& blob = intensity_blob(cfg.width, cfg.height);
    std::vector<float> img(blob.size());
    for (std::size_t i = 0; i < blob.size(); ++i)
        img[i] = blob[i] * static_cast<float>(v);
    return img;
}

std::vector<float> render_scale(double r, const ScenarioConfig& cfg) {
    const int w = cfg.width, h = cfg.height;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double s = w / 50.0;
    const double rr = std::max(kScaleBaseRadiusPx * s + r * s, 0.0);
    const double rl = std::max(kScaleBaseRadiusPx * s - r * s, 0.0);
    const double rmax = std::max(rr, rl);
    std::vector<float> cov(static_cast<std::size_t>(w) * h, 0.0f);
    accumulate_coverage(cov, w, h, cx - rmax, cy - rmax, cx + rmax, cy + rmax,
                        [&](double x, double y) {
                            const double dx = x - cx, dy = y - cy;
                            const double rad = dx >= 0.0 ? rr : rl;
                            return dx * dx + dy * dy <= rad * rad;
                        });
    return cov;
}

TwoBodyRender render_two_body(const std::array<double, 2>& p1,
                              const std::array<double, 2>& p2,
                              const ScenarioConfig& cfg) {
    const int w = cfg.width, h = cfg.height;
    require(p1[0] >= 0 && p1[0] < w && p1[1] >= 0 && p1[1] < h &&
                p2[0] >= 0 && p2[0] < w && p2[1] >= 0 && p2[1] < h,
            "two-body positions must lie inside the frame");

    // static textured background, deterministic in pixel coordinates
    std::vector<float> img(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img[static_cast<std::size_t>(y) * w + x] = static_cast<float>(
                0.18 + 0.08 * std::sin(0.37 * x + 1.3) * std::cos(0.23 * y + 0.7) +
                0.06 * std::sin(0.11 * (x + y) + 2.1));

    const double s = w / 50.0;
    // sprite 1: filled diamond; sprite 2: ring
    std::vector<float> cov1(img.size(), 0.0f), cov2(img.size(), 0.0f);
    const double half = 6.0 * s;
    accumulate_coverage(cov1, w, h, p1[0] - half, p1[1] - half, p1[0] + half,
                        p1[1] + half, [&](double x, double y) {
                            return std::abs(x - p1[0]) + std::abs(y - p1[1]) <= half;
                        });
    const double ro = 7.0 * s, ri = 4.0 * s;
    accumulate_coverage(cov2, w, h, p2[0] - ro, p2[1] - ro, p2[0] + ro,
                        p2[1] + ro, [&](double x, double y) {
                            const double dx = x - p2[0], dy = y - p2[1];
                            const double d2 = dx * dx + dy * dy;
                            return d2 <= ro * ro && d2 >= ri * ri;
                        });

    TwoBodyRender out;
    out.mask1.resize(img.size());
    out.mask2.resize(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        float v = img[i];
        v = v * (1.0f - cov1[i]) + cov1[i];
        v = v * (1.0f - cov2[i]) + cov2[i];
        img[i] = v;
        out.mask1[i] = cov1[i] > 0.5f ? 1 : 0;
        out.mask2[i] = cov2[i] > 0.5f ? 1 : 0;
    }
    out.frame = std::move(img);
    return out;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::PendulumMotion: return "motion";
        case Scenario::Intensity: return "intensity";
        case Scenario::Scale: return "scale";
        case Scenario::TwoBodySpring: return "spring";
    }
    return "?";
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "motion") return Scenario::PendulumMotion;
    if (name == "intensity") return Scenario::Intensity;
    if (name == "scale") return Scenario::Scale;
    if (name == "spring") return Scenario::TwoBodySpring;
    throw std::invalid_argument("unknown scenario: " + name);
}

ScenarioConfig default_scenario(Scenario s) {
    ScenarioConfig cfg;
    cfg.scenario = s;
    switch (s) {
        case Scenario::Intensity:
            cfg.amplitude = 1.0;
            break;
        case Scenario::PendulumMotion:
            cfg.amplitude = 160.0;  // degrees
            break;
        case Scenario::Scale:
            cfg.amplitude = 10.0;  // pixels
            break;
        case Scenario::TwoBodySpring:
            cfg.dynamics = OdeSystem::two_body_spring(2.0, 1.0);
            cfg.amplitude = 0.0;
            break;
    }
    return cfg;
}

namespace {

float quantize8(float v) {
    const int q = static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    return static_cast<float>(q) / 255.0f;
}

FrameSequence generate_sample(const ScenarioConfig& cfg, std::uint64_t sample_seed) {
    std::mt19937_64 rng(sample_seed);
    const int T = cfg.frames_per_sample;
    FrameSequence seq;
    seq.t = T;
    seq.c = cfg.channels;
    seq.h = cfg.height;
    seq.w = cfg.width;
    seq.dt = cfg.dt;

    if (cfg.scenario == Scenario::TwoBodySpring) {
        std::uniform_real_distribution<double> ang(cfg.phase_lo, cfg.phase_hi);
        std::uniform_real_distribution<double> sep(cfg.sep_lo, cfg.sep_hi);
        const double a = ang(rng), d0 = sep(rng);
        const double cx = (cfg.width - 1) / 2.0, cy = (cfg.height - 1) / 2.0;
        std::vector<double> z0 = {cx + 0.5 * d0 * std::cos(a), cy + 0.5 * d0 * std::sin(a),
                                  cx - 0.5 * d0 * std::cos(a), cy - 0.5 * d0 * std::sin(a)};
        seq.init = {z0, {0.0, 0.0, 0.0, 0.0}};
        seq.gt_dim = 4;
        seq.gt_trajectory = simulate_trajectory(cfg.dynamics, seq.init, cfg.dt, T);
        seq.frames.resize(static_cast<std::size_t>(T) * seq.frame_size());
        seq.masks.assign(2, std::vector<std::uint8_t>(
                                static_cast<std::size_t>(T) * cfg.height * cfg.width));
        for (int t = 0; t < T; ++t) {
            const double* p = &seq.gt_trajectory[static_cast<std::size_t>(t) * 4];
            auto r = render_two_body({p[0], p[1]}, {p[2], p[3]}, cfg);
            float* dst = seq.frame(t);
            for (std::size_t i = 0; i < r.frame.size(); ++i) dst[i] = quantize8(r.frame[i]);
            std::copy(r.mask1.begin(), r.mask1.end(),
                      seq.masks[0].begin() + static_cast<std::size_t>(t) * r.mask1.size());
            std::copy(r.mask2.begin(), r.mask2.end(),
                      seq.masks[1].begin() + static_cast<std::size_t>(t) * r.mask2.size());
        }
        return seq;
    }

    // damped-oscillator scenarios: state amplitude fixed, phase randomized
    std::uniform_real_distribution<double> phase(cfg.phase_lo, cfg.phase_hi);
    const double phi = phase(rng);
    const double A = cfg.amplitude;
    const double g0 = cfg.dynamics.param(0), g1 = cfg.dynamics.param(1);
    const double zeta = 0.5 * g1;
    const double omega = std::sqrt(std::max(g0 - zeta * zeta, 0.0));
    const double z0 = A * std::cos(phi);
    const double v0 = -A * (zeta * std::cos(phi) + omega * std::sin(phi));
    seq.init = {{z0}, {v0}};
    std::vector<double> raw = simulate_trajectory(cfg.dynamics, seq.init, cfg.dt, T);

    seq.gt_dim = 1;
    seq.gt_trajectory.resize(T);
    seq.frames.resize(static_cast<std::size_t>(T) * seq.frame_size());
    for (int t = 0; t < T; ++t) {
        double state = raw[t];
        std::vector<float> img;
        switch (cfg.scenario) {
            case Scenario::Intensity:
                state = 0.6 + 0.4 * (A != 0.0 ? state / A : state);
                img = render_intensity(state, cfg);
                break;
            case Scenario::PendulumMotion:
                img = render_pendulum(state, cfg);
                break;
            case Scenario::Scale:
                img = render_scale(state, cfg);
                break;
            default:
                break;
        }
        seq.gt_trajectory[t] = state;
        float* dst = seq.frame(t);
        for (std::size_t i = 0; i < img.size(); ++i) dst[i] = quantize8(img[i]);
    }
    return seq;
}

}  // namespace

Dataset generate_dataset(const ScenarioConfig& cfg) {
    require(cfg.n_samples >= 1, "n_samples must be >= 1");
    require(cfg.frames_per_sample >= 2, "frames_per_sample must be >= 2");
    require(cfg.dt > 0.0, "dt must be > 0");

    Dataset ds;
    ds.cfg = cfg;
    ds.samples.reserve(cfg.n_samples);
    std::mt19937_64 master(cfg.seed);
    std::vector<std::uint64_t> seeds(cfg.n_samples);
    for (auto& s : seeds) s = master();
    for (int i = 0; i < cfg.n_samples; ++i)
        ds.samples.push_back(generate_sample(cfg, seeds[i]));
    return ds;
}

// ---------------------------------------------------------------------------
// PGM + manifest IO
// ---------------------------------------------------------------------------

void write_pgm(const std::string& path, const std::uint8_t* data, int w, int h) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(w) * h);
    if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

int next_pnm_token(std::istream& in) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            in.unget();
            int v;
            if (!(in >> v)) throw std::runtime_error("malformed PGM header");
            return v;
        }
        c = in.get();
    }
    throw std::runtime_error("truncated PGM header");
}

}  // namespace

std::vector<std::uint8_t> read_pgm(const std::string& path, int& w, int& h) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '2'))
        throw std::runtime_error("not a PGM file: " + path);
    w = next_pnm_token(f);
    h = next_pnm_token(f);
    const int maxval = next_pnm_token(f);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw std::runtime_error("unsupported PGM header: " + path);
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h);
    if (m1 == '5') {
        f.get();  // single whitespace after maxval
        f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
        if (!f) throw std::runtime_error("truncated PGM data: " + path);
    } else {
        for (auto& px : data) {
            int v;
            if (!(f >> v)) throw std::runtime_error("truncated PGM data: " + path);
            px = static_cast<std::uint8_t>(v);
        }
    }
    if (maxval != 255)
        for (auto& px : data)
            px = static_cast<std::uint8_t>(px * 255 / maxval);
    return data;
}

namespace {

std::string index_name(const char* prefix, int idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04d.pgm", prefix, idx);
    return buf;
}

json system_to_json(const OdeSystem& sys) {
    json j;
    j["kind"] = sys.kind_name();
    j["order"] = sys.order();
    json params = json::array();
    for (const auto& p : sys.params()) params.push_back(p.value);
    j["params"] = params;
    return j;
}

OdeSystem system_from_json(const json& j) {
    return make_system(j.at("kind").get<std::string>(), j.at("order").get<int>(),
                       j.at("params").get<std::vector<double>>());
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& root) {
    fs::create_directories(root);
    const auto& cfg = ds.cfg;

    json man;
    man["format"] = "latdyn-dataset-v1";
    man["scenario"] = scenario_name(cfg.scenario);
    man["dt"] = cfg.dt;
    man["n_samples"] = static_cast<int>(ds.samples.size());
    man["frames_per_sample"] = cfg.frames_per_sample;
    man["width"] = cfg.width;
    man["height"] = cfg.height;
    man["channels"] = cfg.channels;
    man["amplitude"] = cfg.amplitude;
    man["seed"] = cfg.seed;
    man["system"] = system_to_json(cfg.dynamics);
    json gtp;
    for (const auto& p : cfg.dynamics.params()) gtp[p.name] = p.value;
    man["gt_params"] = gtp;

    json samples = json::array();
    for (std::size_t s = 0; s < ds.samples.size(); ++s) {
        const auto& seq = ds.samples[s];
        json js;
        js["init"] = seq.init;
        js["gt_dim"] = seq.gt_dim;
        js["gt_trajectory"] = seq.gt_trajectory;
        samples.push_back(std::move(js));

        char dirbuf[32];
        std::snprintf(dirbuf, sizeof(dirbuf), "sample_%04zu", s);
        const fs::path dir = fs::path(root) / dirbuf;
        fs::create_directories(dir);
        std::vector<std::uint8_t> bytes(seq.frame_size());
        for (int t = 0; t < seq.t; ++t) {
            const float* src = seq.frame(t);
            for (std::size_t i = 0; i < bytes.size(); ++i)
                bytes[i] = static_cast<std::uint8_t>(
                    std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
            write_pgm((dir / index_name("frame_", t)).string(), bytes.data(), seq.w, seq.h);
            for (int ob = 0; ob < seq.n_objects(); ++ob) {
                const std::uint8_t* m =
                    seq.masks[ob].data() + static_cast<std::size_t>(t) * seq.w * seq.h;
                std::vector<std::uint8_t> mb(static_cast<std::size_t>(seq.w) * seq.h);
                for (std::size_t i = 0; i < mb.size(); ++i) mb[i] = m[i] ? 255 : 0;
                const std::string mp = "mask" + std::to_string(ob) + "_";
                write_pgm((dir / index_name(mp.c_str(), t)).string(), mb.data(), seq.w, seq.h);
            }
        }
    }
    man["samples"] = std::move(samples);

    std::ofstream mf(fs::path(root) / "manifest.json");
    if (!mf) throw std::runtime_error("cannot write manifest under " + root);
    mf << man.dump(2) << "\n";
}

namespace {

std::vector<float> resize_area(const std::vector<float>& src, int sw, int sh,
                               int tw, int th) {
    std::vector<float> dst(static_cast<std::size_t>(tw) * th, 0.0f);
    const double sx = static_cast<double>(sw) / tw;
    const double sy = static_cast<double>(sh) / th;
    for (int ty = 0; ty < th; ++ty) {
        const double y0 = ty * sy, y1 = (ty + 1) * sy;
        for (int tx = 0; tx < tw; ++tx) {
            const double x0 = tx * sx, x1 = (tx + 1) * sx;
            double acc = 0.0;
            for (int yy = static_cast<int>(y0); yy < static_cast<int>(std::ceil(y1)); ++yy) {
                const double wy = std::min<double>(y1, yy + 1) - std::max<double>(y0, yy);
                if (wy <= 0) continue;
                for (int xx = static_cast<int>(x0); xx < static_cast<int>(std::ceil(x1)); ++xx) {
                    const double wx = std::min<double>(x1, xx + 1) - std::max<double>(x0, xx);
                    if (wx <= 0) continue;
                    acc += wx * wy * src[static_cast<std::size_t>(std::min(yy, sh - 1)) * sw +
                                         std::min(xx, sw - 1)];
                }
            }
            dst[static_cast<std::size_t>(ty) * tw + tx] =
                static_cast<float>(acc / (sx * sy));
        }
    }
    return dst;
}

// indices of files named <prefix>####.pgm; must be 0..T-1 with no gaps
std::vector<int> collect_indices(const fs::path& dir, const std::string& prefix) {
    std::vector<int> idx;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() >= prefix.size() + 4 && name.rfind(prefix, 0) == 0 &&
            name.substr(name.size() - 4) == ".pgm") {
            try {
                idx.push_back(std::stoi(name.substr(prefix.size(),
                                                    name.size() - prefix.size() - 4)));
            } catch (...) {
                throw std::runtime_error("unparseable frame index in " + name);
            }
        }
    }
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (idx[i] != static_cast<int>(i))
            throw std::runtime_error("non-contiguous frame indices under " + dir.string());
    return idx;
}

}  // namespace

FrameSequence load_frames(const std::string& dir, int target_w, int target_h) {
    const fs::path d(dir);
    fs::path manifest = d / "manifest.json";
    if (!fs::exists(manifest)) manifest = d.parent_path() / "manifest.json";
    if (!fs::exists(manifest))
        throw std::runtime_error("missing manifest.json for " + dir);
    std::ifstream mf(manifest);
    json man = json::parse(mf);
    if (!man.contains("dt")) throw std::runtime_error("manifest lacks dt: " + manifest.string());

    const auto idx = collect_indices(d, "frame_");
    if (idx.size() < 2)
        throw std::runtime_error("need at least 2 frames (order+1) in " + dir);

    FrameSequence seq;
    seq.dt = man.at("dt").get<double>();
    seq.t = static_cast<int>(idx.size());
    seq.c = 1;

    int w0 = 0, h0 = 0;
    std::vector<std::vector<std::uint8_t>> raw(seq.t);
    for (int t = 0; t < seq.t; ++t) {
        int w = 0, h = 0;
        raw[t] = read_pgm((d / index_name("frame_", t)).string(), w, h);
        if (t == 0) {
            w0 = w;
            h0 = h;
        } else if (w != w0 || h != h0) {
            throw std::runtime_error("inconsistent frame sizes in " + dir);
        }
    }
    const int tw = target_w > 0 ? target_w : w0;
    const int th = target_h > 0 ? target_h : h0;
    seq.w = tw;
    seq.h = th;
    seq.frames.resize(static_cast<std::size_t>(seq.t) * seq.frame_size());
    for (int t = 0; t < seq.t; ++t) {
        std::vector<float> f(raw[t].size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = raw[t][i] / 255.0f;
        if (tw != w0 || th != h0) f = resize_area(f, w0, h0, tw, th);
        std::copy(f.begin(), f.end(), seq.frame(t));
    }

    // optional per-object masks
    for (int ob = 0;; ++ob) {
        const std::string prefix = "mask" + std::to_string(ob) + "_";
        if (!fs::exists(d / index_name(prefix.c_str(), 0))) break;
        const auto midx = collect_indices(d, prefix);
        if (static_cast<int>(midx.size()) != seq.t)
            throw std::runtime_error("mask/frame count mismatch in " + dir);
        std::vector<std::uint8_t> all(static_cast<std::size_t>(seq.t) * tw * th);
        for (int t = 0; t < seq.t; ++t) {
            int w = 0, h = 0;
            auto m = read_pgm((d / index_name(prefix.c_str(), t)).string(), w, h);
            if (w != w0 || h != h0)
                throw std::runtime_error("inconsistent mask sizes in " + dir);
            std::vector<float> f(m.size());
            for (std::size_t i = 0; i < m.size(); ++i) f[i] = m[i] / 255.0f;
            if (tw != w0 || th != h0) f = resize_area(f, w0, h0, tw, th);
            for (std::size_t i = 0; i < f.size(); ++i)
                all[static_cast<std::size_t>(t) * tw * th + i] = f[i] > 0.5f ? 1 : 0;
        }
        seq.masks.push_back(std::move(all));
    }
    return seq;
}

Dataset load_dataset(const std::string& root) {
    const fs::path r(root);
    std::ifstream mf(r / "manifest.json");
    if (!mf) throw std::runtime_error("missing manifest.json under " + root);
    json man = json::parse(mf);

    Dataset ds;
    ScenarioConfig cfg = default_scenario(
        scenario_from_name(man.at("scenario").get<std::string>()));
    cfg.dt = man.at("dt").get<double>();
    cfg.n_samples = man.at("n_samples").get<int>();
    cfg.frames_per_sample = man.at("frames_per_sample").get<int>();
    cfg.width = man.at("width").get<int>();
    cfg.height = man.at("height").get<int>();
    cfg.channels = man.at("channels").get<int>();
    if (man.contains("amplitude")) cfg.amplitude = man.at("amplitude").get<double>();
    if (man.contains("seed")) cfg.seed = man.at("seed").get<std::uint64_t>();
    if (man.contains("system")) cfg.dynamics = system_from_json(man.at("system"));
    ds.cfg = cfg;

    const json& samples = man.at("samples");
    for (int s = 0; s < cfg.n_samples; ++s) {
        char dirbuf[32];
        std::snprintf(dirbuf, sizeof(dirbuf), "sample_%04d", s);
        FrameSequence seq = load_frames((r / dirbuf).string());
        const json& js = samples.at(s);
        seq.gt_dim = js.at("gt_dim").get<int>();
        seq.gt_trajectory = js.at("gt_trajectory").get<std::vector<double>>();
        seq.init = js.at("init").get<std::vector<std::vector<double>>>();
        ds.samples.push_back(std::move(seq));
    }
    return ds;
}

}  // namespace latdyn
