#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "latdyn/eval.hpp"

using namespace latdyn;

TEST_SUITE("eval") {

TEST_CASE("align_affine recovers exact affine maps") {
    std::vector<double> zr(30);
    for (int i = 0; i < 30; ++i) zr[i] = std::sin(0.3 * i);

    const AlignedLatent id = align_affine(zr, zr);
    CHECK(id.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(id.offset == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(id.rmse == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> z(30);
    for (int i = 0; i < 30; ++i) z[i] = 2.0 * zr[i] + 3.0;
    const AlignedLatent fit = align_affine(z, zr);
    CHECK(fit.scale == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.offset == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(fit.rmse < 1e-12);

    CHECK_THROWS_AS(align_affine(std::vector<double>(30, 1.0), zr),
                    std::invalid_argument);
}

TEST_CASE("alignment rmse is invariant to re-metrization and never worse than sign flips") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> zr(40), z(40);
    for (int i = 0; i < 40; ++i) {
        zr[i] = std::sin(0.2 * i);
        z[i] = zr[i] + 0.05 * n(rng);
    }
    const double base = align_affine(z, zr).rmse;

    for (double a : {-3.0, 0.25, 7.0}) {
        std::vector<double> zt(40);
        for (int i = 0; i < 40; ++i) zt[i] = a * z[i] - 2.0;
        CHECK(align_affine(zt, zr).rmse == doctest::Approx(base).epsilon(1e-9));
    }

    auto raw_rmse = [&](double sign) {
        double se = 0.0;
        for (int i = 0; i < 40; ++i) {
            const double e = sign * z[i] - zr[i];
            se += e * e;
        }
        return std::sqrt(se / 40);
    };
    CHECK(base <= std::min(raw_rmse(1.0), raw_rmse(-1.0)) + 1e-12);
}

TEST_CASE("extrapolation with the true system and oracle encoder stays within Euler error") {
    // one-pixel dataset carrying the state; encoder inverts the map exactly
    Dataset ds;
    ds.cfg = default_scenario(Scenario::Intensity);
    ds.cfg.n_samples = 1;
    ds.cfg.frames_per_sample = 30;
    ds.cfg.width = ds.cfg.height = 1;
    ds.cfg.dt = 0.1;
    {
        FrameSequence seq;
        seq.t = 30;
        seq.c = 1;
        seq.h = seq.w = 1;
        seq.dt = 0.1;
        const auto traj =
            simulate_trajectory(ds.cfg.dynamics, {{1.0}, {0.0}}, 0.1, 30);
        seq.frames.resize(30);
        for (int t = 0; t < 30; ++t)
            seq.frames[t] = static_cast<float>((traj[t] + 1.0) / 2.0);
        // reference stored in rendered units (the intensity map)
        seq.gt_trajectory.resize(30);
        for (int t = 0; t < 30; ++t) seq.gt_trajectory[t] = 0.6 + 0.4 * traj[t];
        seq.gt_dim = 1;
        seq.init = {{1.0}, {0.0}};
        ds.samples.push_back(std::move(seq));
    }
    EncoderParams enc;
    enc.in_dim = enc.h1 = enc.h2 = enc.out_dim = 1;
    enc.w1 = {2.0};
    enc.b1 = {10.0};
    enc.w2 = {1.0};
    enc.b2 = {0.0};
    enc.w3 = {1.0};
    enc.b3 = {-11.0};

    const double err = extrapolation_error(enc, ds.cfg.dynamics, ds, 20);
    CHECK(err < 0.05);
    CHECK(extrapolation_error(enc, ds.cfg.dynamics, ds, 0) == 0.0);

    // mismatched frequency drifts and the error grows with the horizon
    const OdeSystem wrong = OdeSystem::linear(2, {5.5, 0.08});
    const double e5 = extrapolation_error(enc, wrong, ds, 5);
    const double e20 = extrapolation_error(enc, wrong, ds, 20);
    CHECK(e20 > e5);
}

TEST_CASE("robustness_sweep: rows, aggregation, point init range") {
    const OdeSystem sys = OdeSystem::linear(2, {4.0, 0.1});
    Dataset ds;
    ds.cfg = default_scenario(Scenario::Intensity);
    ds.cfg.dynamics = sys;
    ds.cfg.dt = 0.1;
    ds.cfg.n_samples = 4;
    ds.cfg.frames_per_sample = 5;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 4; ++s) {
        FrameSequence seq;
        seq.t = 5;
        seq.c = 1;
        seq.h = seq.w = 6;
        seq.dt = 0.1;
        seq.frames.resize(5 * 36);
        for (auto& v : seq.frames) v = static_cast<float>(u(rng));
        ds.samples.push_back(std::move(seq));
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.hidden1 = 8;
    cfg.hidden2 = 4;
    cfg.seed = 3;

    const SweepReport rep = robustness_sweep(ds, cfg, 3, {-2.0, 2.0});
    CHECK(rep.rows.size() == 3);
    // mean/std recomputable from the rows
    for (std::size_t p = 0; p < rep.gamma_names.size(); ++p) {
        double mean = 0.0;
        for (const auto& row : rep.rows) mean += row.final_gamma[p];
        mean /= rep.rows.size();
        CHECK(rep.mean[p] == doctest::Approx(mean).epsilon(1e-12));
        double sd = 0.0;
        for (const auto& row : rep.rows) {
            const double d = row.final_gamma[p] - mean;
            sd += d * d;
        }
        sd = std::sqrt(sd / (rep.rows.size() - 1));
        CHECK(rep.stddev[p] == doctest::Approx(sd).epsilon(1e-12));
    }

    // collapsed init range: identical gamma inits, identical runs
    const SweepReport point = robustness_sweep(ds, cfg, 3, {1.5, 1.5});
    CHECK(point.rows[0].init_gamma == point.rows[1].init_gamma);
    CHECK(point.rows[0].final_gamma == point.rows[2].final_gamma);
    for (std::size_t p = 0; p < point.stddev.size(); ++p)
        CHECK(point.stddev[p] == doctest::Approx(0.0));

    CHECK_THROWS_AS(robustness_sweep(ds, cfg, 1, {-1.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("dt_ablation: single-entry list gives a single row") {
    ScenarioConfig sc = default_scenario(Scenario::Intensity);
    sc.n_samples = 3;
    sc.frames_per_sample = 4;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 3;
    cfg.hidden1 = 8;
    cfg.hidden2 = 4;
    const auto rows = dt_ablation(sc, {0.25}, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].dt == 0.25);
    CHECK(rows[0].final_gamma.size() == 2);
    CHECK_THROWS_AS(dt_ablation(sc, {}, cfg), std::invalid_argument);
}

TEST_CASE("gt_pendulum_damping recovers the synthetic decay rate") {
    const double zeta = 0.059, A = 0.8;
    std::vector<std::pair<double, double>> peaks;
    for (int k = 0; k < 8; ++k) {
        const double t = 1.3 * k + 0.4;
        peaks.push_back({t, A * std::exp(-0.5 * zeta * t)});
    }
    CHECK(gt_pendulum_damping(peaks) == doctest::Approx(zeta).epsilon(1e-9));

    // constant peaks: no decay
    std::vector<std::pair<double, double>> flat = {{0.0, 0.5}, {1.0, 0.5}, {2.0, 0.5}};
    CHECK(gt_pendulum_damping(flat) == doctest::Approx(0.0));

    // uniform rescaling shifts ln but not the slope
    auto scaled = peaks;
    for (auto& [t, x] : scaled) x *= 37.0;
    CHECK(gt_pendulum_damping(scaled) ==
          doctest::Approx(gt_pendulum_damping(peaks)).epsilon(1e-12));

    CHECK_THROWS_AS(gt_pendulum_damping({{0.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(gt_pendulum_damping({{0.0, 1.0}, {1.0, -0.5}}),
                    std::invalid_argument);
}

TEST_CASE("gt_torricelli_k") {
    CHECK(gt_torricelli_k(0.05, 0.05, 10.0) == 0.0);
    // forward model: sqrt(h(t)) = sqrt(h0) - k t / 2
    const double k = 0.0095, h0 = 0.07;
    const double t = 2.0 * (std::sqrt(h0) - std::sqrt(0.01)) / k;
    CHECK(gt_torricelli_k(h0, 0.01, t) == doctest::Approx(k).epsilon(1e-9));
    CHECK(gt_torricelli_k(h0, 0.01, 2 * t) == doctest::Approx(k / 2).epsilon(1e-9));
    CHECK_THROWS_AS(gt_torricelli_k(0.07, 0.01, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gt_torricelli_k(0.01, 0.07, 1.0), std::invalid_argument);
}

TEST_CASE("gt_sliding_mu") {
    // round-trip against the formula's own kinematics
    const double mu = 0.21, alpha = 20.0, g = 9.81, s = 0.726;
    const double a_deg = alpha * 3.14159265358979323846 / 180.0;
    const double t = std::sqrt(2.0 * s / (g * (std::tan(a_deg) - mu)));
    CHECK(gt_sliding_mu(alpha, s, t, g) == doctest::Approx(mu).epsilon(1e-9));

    // s = 0 degenerates to tan(alpha)
    CHECK(gt_sliding_mu(30.0, 0.0, 2.0, g) ==
          doctest::Approx(std::tan(30.0 * 3.14159265358979323846 / 180.0)));

    // the implied total acceleration sits near the reported setting value
    const double accel = g * (std::sin(a_deg) - mu * std::cos(a_deg));
    CHECK(accel == doctest::Approx(1.42).epsilon(0.01));
    CHECK(std::abs(accel - 1.441) < 0.05);

    CHECK_THROWS_AS(gt_sliding_mu(20.0, 1.0, 0.0, g), std::invalid_argument);
    CHECK_THROWS_AS(gt_sliding_mu(95.0, 1.0, 1.0, g), std::invalid_argument);
}

TEST_CASE("gt_freefall_focal") {
    CHECK(gt_freefall_focal(243.1, 0.0335, 0.20) ==
          doctest::Approx(1451.3).epsilon(1e-3));
    CHECK(gt_freefall_focal(1.0, 1.0, 1.0) == 1.0);
    // linear in h0
    CHECK(gt_freefall_focal(243.1, 0.0335, 0.40) ==
          doctest::Approx(2 * gt_freefall_focal(243.1, 0.0335, 0.20)));
    CHECK_THROWS_AS(gt_freefall_focal(0.0, 1.0, 1.0), std::invalid_argument);
}

}  // TEST_SUITE
