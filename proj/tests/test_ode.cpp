#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>
#include <vector>

#include "latdyn/ode.hpp"

using namespace latdyn;

TEST_SUITE("ode") {

TEST_CASE("second-order step hand values") {
    // v = 0, so the step is z - dt^2 * gamma0 * z
    const auto r1 = euler_step_second_order({1.0}, {1.0}, 4.0, 0.0, 0.1);
    const double expected = 1.0 + 0.1 * (0.0 + 0.1 * (-(0.0 * 0.0 + 4.0 * 1.0)));
    CHECK(r1[0] == expected);
    CHECK(r1[0] == doctest::Approx(0.96).epsilon(1e-15));

    const auto r2 = euler_step_second_order({0.0}, {0.0}, 3.3, 7.7, 0.1);
    CHECK(r2[0] == 0.0);

    const auto r3 = euler_step_second_order({1.0}, {0.9}, 0.0, 0.0, 0.1);
    CHECK(r3[0] == doctest::Approx(1.1).epsilon(1e-15));
}

TEST_CASE("second-order step input validation") {
    CHECK_THROWS_AS(euler_step_second_order({1.0}, {1.0}, 4.0, 0.0, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(euler_step_second_order({1.0}, {1.0, 2.0}, 4.0, 0.0, 0.1),
                    std::invalid_argument);
    const double nan = std::nan("");
    CHECK_THROWS_AS(euler_step_second_order({nan}, {1.0}, 4.0, 0.0, 0.1),
                    std::domain_error);
    CHECK_THROWS_AS(euler_step_second_order({1.0}, {1.0}, nan, 0.0, 0.1),
                    std::domain_error);
}

TEST_CASE("general step: torricelli drainage and clamping") {
    const OdeSystem sys = OdeSystem::torricelli(0.01);
    LatentHistory h{{{1.0}}, 0.1};
    const auto next = euler_step_general(h, sys);
    CHECK(next[0] == doctest::Approx(0.999).epsilon(1e-15));

    StepDiag diag;
    LatentHistory neg{{{-0.5}}, 0.1};
    const auto clamped = euler_step_general(neg, sys, &diag);
    CHECK(clamped[0] == doctest::Approx(-0.5));  // sqrt(0) rate
    CHECK(diag.clamp_events == 1);
}

TEST_CASE("general step: zero dt is the identity for first order") {
    const OdeSystem sys = OdeSystem::exponential_decay(2.3);
    LatentHistory h{{{1.0}}, 0.0};
    CHECK(euler_step_general(h, sys)[0] == 1.0);
}

TEST_CASE("general step: pendulum equilibrium is a fixed point") {
    const OdeSystem sys = OdeSystem::pendulum(0.1, 1.0, 9.81);
    LatentHistory h{{{0.0}, {0.0}}, 0.05};
    CHECK(euler_step_general(h, sys)[0] == 0.0);
}

TEST_CASE("general step matches the dedicated second-order path bitwise") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 50; ++i) {
        const double g0 = u(rng), g1 = u(rng), z = u(rng), zm = u(rng);
        const OdeSystem sys = OdeSystem::linear(2, {g0, g1});
        LatentHistory h{{{z}, {zm}}, 0.07};
        const auto a = euler_step_general(h, sys);
        const auto b = euler_step_second_order({z}, {zm}, g0, g1, 0.07);
        CHECK(a[0] == b[0]);
    }
}

TEST_CASE("fixed points are preserved for every kind") {
    const double dt = 0.05;
    {
        LatentHistory h{{{0.0}, {0.0}}, dt};
        CHECK(euler_step_general(h, OdeSystem::linear(2, {4.0, 0.1}))[0] == 0.0);
        CHECK(euler_step_general(h, OdeSystem::sliding_block(0.0))[0] == 0.0);
    }
    {
        LatentHistory h{{{0.0}}, dt};
        CHECK(euler_step_general(h, OdeSystem::torricelli(0.3))[0] == 0.0);
        CHECK(euler_step_general(h, OdeSystem::exponential_decay(1.1))[0] == 0.0);
    }
    {
        // pendulum at the inverted equilibrium: sin(pi) = 0 up to rounding
        const double pi = 3.14159265358979323846;
        LatentHistory h{{{pi}, {pi}}, dt};
        const auto nx = euler_step_general(h, OdeSystem::pendulum(0.2, 1.0, 9.81));
        CHECK(nx[0] == doctest::Approx(pi).epsilon(1e-12));
    }
    {
        // coincident bodies with zero velocity stay put (floored separation)
        LatentHistory h{{{3.0, 4.0, 3.0, 4.0}, {3.0, 4.0, 3.0, 4.0}}, dt};
        const auto nx = euler_step_general(h, OdeSystem::two_body_spring(2.0, 1.0));
        for (int i = 0; i < 4; ++i) CHECK(nx[i] == h.states[0][i]);
    }
}

TEST_CASE("rollout: constant state and exponential decay oracle") {
    const OdeSystem flat = OdeSystem::linear(2, {0.0, 0.0});
    LatentHistory h{{{1.0}, {1.0}}, 0.1};
    const auto traj = rollout(h, flat, 5);
    REQUIRE(traj.size() == 5);
    for (double v : traj) CHECK(v == 1.0);

    const OdeSystem dec = OdeSystem::exponential_decay(1.0);
    LatentHistory h1{{{1.0}}, 0.001};
    const auto dtraj = rollout(h1, dec, 1000);
    CHECK(std::abs(dtraj.back() - std::exp(-1.0)) < 1e-3);
}

TEST_CASE("rollout tracks the closed-form oscillator") {
    const auto [g0, g1] = gamma_from_physical(2.0, 0.04);
    const OdeSystem sys = OdeSystem::linear(2, {g0, g1});
    const double dt = 0.01;
    const int steps = 1000;  // 10 s
    LatentHistory h{{{closed_form_oscillator(1, 0.04, 2, 0, dt)},
                     {closed_form_oscillator(1, 0.04, 2, 0, 0.0)}},
                    dt};
    const auto traj = rollout(h, sys, steps);
    double max_err = 0.0;
    for (int s = 0; s < steps; ++s) {
        const double t = (s + 2) * dt;
        max_err = std::max(max_err,
                           std::abs(traj[s] - closed_form_oscillator(1, 0.04, 2, 0, t)));
    }
    CHECK(max_err < 0.05);
}

TEST_CASE("rollout error shrinks first order in dt") {
    const auto [g0, g1] = gamma_from_physical(2.0, 0.04);
    const OdeSystem sys = OdeSystem::linear(2, {g0, g1});
    const double horizon = 8.0;
    auto max_err = [&](double dt) {
        const int steps = static_cast<int>(horizon / dt);
        LatentHistory h{{{closed_form_oscillator(1, 0.04, 2, 0, dt)},
                         {closed_form_oscillator(1, 0.04, 2, 0, 0.0)}},
                        dt};
        const auto traj = rollout(h, sys, steps);
        double e = 0.0;
        for (int s = 0; s < steps; ++s)
            e = std::max(e, std::abs(traj[s] -
                                     closed_form_oscillator(1, 0.04, 2, 0, (s + 2) * dt)));
        return e;
    };
    const double e4 = max_err(0.04), e2 = max_err(0.02), e1 = max_err(0.01);
    CHECK(e4 / e2 > 1.6);  // at least linear
    CHECK(e2 / e1 > 1.6);
}

TEST_CASE("energy decay: damped rollout peak envelope is non-increasing") {
    const OdeSystem sys = OdeSystem::linear(2, {4.0, 0.4});
    const double dt = 0.01;
    LatentHistory h{{{1.0}, {1.0}}, dt};  // released at rest
    const auto traj = rollout(h, sys, 4000);
    std::vector<double> peaks;
    for (std::size_t i = 1; i + 1 < traj.size(); ++i)
        if (traj[i] > traj[i - 1] && traj[i] >= traj[i + 1]) peaks.push_back(traj[i]);
    REQUIRE(peaks.size() >= 3);
    for (std::size_t i = 1; i < peaks.size(); ++i) CHECK(peaks[i] <= peaks[i - 1] + 1e-12);
}

TEST_CASE("closed-form oscillator values") {
    CHECK(closed_form_oscillator(1, 0, 2, 0, 0) == 1.0);
    const double pi = 3.14159265358979323846;
    CHECK(closed_form_oscillator(1, 0.04, 2, 0, pi) ==
          doctest::Approx(std::exp(-0.04 * pi)).epsilon(1e-12));
    CHECK(closed_form_oscillator(0, 0.3, 1.7, 0.4, 2.2) == 0.0);
}

TEST_CASE("gamma_from_physical") {
    const auto [a0, a1] = gamma_from_physical(2.0, 0.04);
    CHECK(a0 == doctest::Approx(4.0016).epsilon(1e-15));
    CHECK(a1 == doctest::Approx(0.08).epsilon(1e-15));
    const auto [b0, b1] = gamma_from_physical(1.0, 0.0);
    CHECK(b0 == 1.0);
    CHECK(b1 == 0.0);
    const auto [c0, c1] = gamma_from_physical(0.0, 1.0);
    CHECK(c0 == 1.0);
    CHECK(c1 == 2.0);
}

TEST_CASE("step jacobians match finite differences for every kind") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.3, 1.4);
    const double dt = 0.07, eps = 1e-6;

    auto check_system = [&](const OdeSystem& base, LatentHistory h) {
        OdeSystem sys = base;
        const auto J = euler_step_with_jacobian(h, sys);
        const int d = sys.dim();
        const auto learn = sys.learnable_values();

        for (int j = 0; j < d; ++j) {  // d zhat / d z_t
            auto hp = h, hm = h;
            hp.states[0][j] += eps;
            hm.states[0][j] -= eps;
            const auto zp = euler_step_general(hp, sys);
            const auto zm = euler_step_general(hm, sys);
            for (int i = 0; i < d; ++i)
                CHECK(J.d_z_t[i * d + j] ==
                      doctest::Approx((zp[i] - zm[i]) / (2 * eps)).epsilon(1e-5));
        }
        if (sys.order() == 2)
            for (int j = 0; j < d; ++j) {
                auto hp = h, hm = h;
                hp.states[1][j] += eps;
                hm.states[1][j] -= eps;
                const auto zp = euler_step_general(hp, sys);
                const auto zm = euler_step_general(hm, sys);
                for (int i = 0; i < d; ++i)
                    CHECK(J.d_z_tm1[i * d + j] ==
                          doctest::Approx((zp[i] - zm[i]) / (2 * eps)).epsilon(1e-5));
            }
        for (std::size_t p = 0; p < learn.size(); ++p) {
            auto vp = learn, vm = learn;
            vp[p] += eps;
            vm[p] -= eps;
            OdeSystem sp = sys, sm = sys;
            sp.set_learnable_values(vp);
            sm.set_learnable_values(vm);
            const auto zp = euler_step_general(h, sp);
            const auto zm = euler_step_general(h, sm);
            for (int i = 0; i < d; ++i)
                CHECK(J.d_gamma[i * learn.size() + p] ==
                      doctest::Approx((zp[i] - zm[i]) / (2 * eps)).epsilon(1e-5));
        }
    };

    check_system(OdeSystem::linear(2, {u(rng), u(rng)}),
                 {{{u(rng)}, {u(rng)}}, dt});
    check_system(OdeSystem::linear(1, {u(rng)}), {{{u(rng)}}, dt});
    check_system(OdeSystem::pendulum(u(rng), u(rng), 9.81),
                 {{{u(rng)}, {u(rng)}}, dt});
    check_system(OdeSystem::torricelli(u(rng)), {{{u(rng)}}, dt});
    check_system(OdeSystem::sliding_block(u(rng)), {{{u(rng)}, {u(rng)}}, dt});
    check_system(OdeSystem::exponential_decay(u(rng)), {{{u(rng)}}, dt});
    check_system(OdeSystem::free_fall_scale(u(rng), 0.03, 1400.0, 0.2),
                 {{{200 * u(rng)}, {200 * u(rng)}}, dt});
    check_system(OdeSystem::two_body_spring(2.0, 1.0),
                 {{{u(rng), u(rng), -u(rng), -u(rng)},
                   {u(rng), u(rng), -u(rng), -u(rng)}},
                  dt});

    // the spec's closed forms for the linear second-order block
    {
        const double z = 0.8, zm = 0.55;
        const OdeSystem sys = OdeSystem::linear(2, {1.3, 0.2});
        const auto J = euler_step_with_jacobian({{{z}, {zm}}, dt}, sys);
        CHECK(J.d_gamma[0] == doctest::Approx(-dt * dt * z).epsilon(1e-14));
        CHECK(J.d_gamma[1] == doctest::Approx(-dt * (z - zm)).epsilon(1e-14));
    }
}

TEST_CASE("system construction validates parameter counts") {
    CHECK_THROWS_AS(OdeSystem::linear(2, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(OdeSystem::linear(0, {}), std::invalid_argument);
    CHECK_THROWS_AS(make_system("pendulum", 2, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_system("nope", 1, {1.0}), std::invalid_argument);
    const OdeSystem spring = OdeSystem::two_body_spring(2.0, 1.0);
    CHECK(spring.dim() == 4);
    CHECK(spring.order() == 2);
    CHECK(spring.learnable_names() == std::vector<std::string>{"k"});
}

TEST_CASE("history length must match the order") {
    const OdeSystem sys = OdeSystem::linear(2, {1.0, 0.0});
    LatentHistory h{{{1.0}}, 0.1};
    CHECK_THROWS_AS(euler_step_general(h, sys), std::invalid_argument);
}

}  // TEST_SUITE
