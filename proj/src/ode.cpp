#include "latdyn/ode.hpp"

#include <cmath>
#include <stdexcept>

namespace latdyn {

namespace {

constexpr double kSeparationFloor = 1e-8;  // spring |p1-p2| guard
constexpr double kRadiusFloor = 1e-8;      // free-fall 1/r guard

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::domain_error(std::string("non-finite ") + what);
}

// zhat = z + dt*(v + dt*accel), the discretization every second-order kind
// shares. Written once so LinearAutonomous(2) and euler_step_second_order
// produce bit-identical results.
inline double second_order_stencil(double z, double v, double accel, double dt) {
    return z + dt * (v + dt * accel);
}

}  // namespace

OdeSystem::OdeSystem(OdeKind kind, int order, int dim,
                     std::vector<OdeParam> params)
    : kind_(kind), order_(order), dim_(dim), params_(std::move(params)) {
    require(order_ >= 1, "system order must be >= 1");
    require(dim_ >= 1, "latent dimension must be >= 1");
}

OdeSystem OdeSystem::linear(int order, std::vector<double> gammas) {
    require(order >= 1, "linear system order must be >= 1");
    require(static_cast<int>(gammas.size()) == order,
            "LinearAutonomous(n) takes exactly n coefficients");
    std::vector<OdeParam> ps;
    for (std::size_t i = 0; i < gammas.size(); ++i)
        ps.push_back({"gamma" + std::to_string(i), gammas[i], "", true});
    return OdeSystem(OdeKind::LinearAutonomous, order, 1, std::move(ps));
}

OdeSystem OdeSystem::pendulum(double zeta, double length, double gravity) {
    return OdeSystem(OdeKind::Pendulum, 2, 1,
                     {{"zeta", zeta, "1/s", true},
                      {"L", length, "m", true},
                      {"g", gravity, "m/s^2", false}});
}

OdeSystem OdeSystem::torricelli(double k) {
    return OdeSystem(OdeKind::Torricelli, 1, 1,
                     {{"k", k, "sqrt(m)/s", true}});
}

OdeSystem OdeSystem::sliding_block(double accel) {
    return OdeSystem(OdeKind::SlidingBlock, 2, 1,
                     {{"a", accel, "m/s^2", true}});
}

OdeSystem OdeSystem::exponential_decay(double gamma) {
    return OdeSystem(OdeKind::ExponentialDecay, 1, 1,
                     {{"gamma", gamma, "1/s", true}});
}

OdeSystem OdeSystem::free_fall_scale(double g, double r0, double f, double h0) {
    return OdeSystem(OdeKind::FreeFallScale, 2, 1,
                     {{"g", g, "m/s^2", true},
                      {"r0", r0, "m", false},
                      {"f", f, "px/m", false},
                      {"h0", h0, "m", false}});
}

OdeSystem OdeSystem::two_body_spring(double k, double l) {
    return OdeSystem(OdeKind::TwoBodySpring, 2, 4,
                     {{"k", k, "1/s^2", true}, {"l", l, "px", false}});
}

std::vector<std::size_t> OdeSystem::learnable_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].learnable) idx.push_back(i);
    return idx;
}

std::vector<double> OdeSystem::learnable_values() const {
    std::vector<double> v;
    for (const auto& p : params_)
        if (p.learnable) v.push_back(p.value);
    return v;
}

void OdeSystem::set_learnable_values(const std::vector<double>& v) {
    std::size_t j = 0;
    for (auto& p : params_)
        if (p.learnable) {
            require(j < v.size(), "learnable value count mismatch");
            p.value = v[j++];
        }
    require(j == v.size(), "learnable value count mismatch");
}

std::vector<std::string> OdeSystem::learnable_names() const {
    std::vector<std::string> names;
    for (const auto& p : params_)
        if (p.learnable) names.push_back(p.name);
    return names;
}

std::string OdeSystem::kind_name() const {
    switch (kind_) {
        case OdeKind::LinearAutonomous: return "linear";
        case OdeKind::Pendulum: return "pendulum";
        case OdeKind::Torricelli: return "torricelli";
        case OdeKind::SlidingBlock: return "sliding_block";
        case OdeKind::ExponentialDecay: return "exponential_decay";
        case OdeKind::FreeFallScale: return "free_fall_scale";
        case OdeKind::TwoBodySpring: return "two_body_spring";
    }
    return "?";
}

OdeSystem make_system(const std::string& kind_name, int order,
                      const std::vector<double>& p) {
    if (kind_name == "linear") return OdeSystem::linear(order, p);
    if (kind_name == "pendulum") {
        require(p.size() == 3, "pendulum takes {zeta, L, g}");
        return OdeSystem::pendulum(p[0], p[1], p[2]);
    }
    if (kind_name == "torricelli") {
        require(p.size() == 1, "torricelli takes {k}");
        return OdeSystem::torricelli(p[0]);
    }
    if (kind_name == "sliding_block") {
        require(p.size() == 1, "sliding_block takes {a}");
        return OdeSystem::sliding_block(p[0]);
    }
    if (kind_name == "exponential_decay") {
        require(p.size() == 1, "exponential_decay takes {gamma}");
        return OdeSystem::exponential_decay(p[0]);
    }
    if (kind_name == "free_fall_scale") {
        require(p.size() == 4, "free_fall_scale takes {g, r0, f, h0}");
        return OdeSystem::free_fall_scale(p[0], p[1], p[2], p[3]);
    }
    if (kind_name == "two_body_spring") {
        require(p.size() == 2, "two_body_spring takes {k, l}");
        return OdeSystem::two_body_spring(p[0], p[1]);
    }
    throw std::invalid_argument("unknown system kind: " + kind_name);
}

std::vector<double> euler_step_second_order(const std::vector<double>& z_t,
                                            const std::vector<double>& z_tm1,
                                            double gamma0, double gamma1,
                                            double dt) {
    require(z_t.size() == z_tm1.size(), "state dimension mismatch");
    require(dt > 0.0, "dt must be > 0");
    if (!std::isfinite(gamma0) || !std::isfinite(gamma1) || !std::isfinite(dt))
        throw std::domain_error("non-finite step argument");
    check_finite(z_t, "state");
    check_finite(z_tm1, "state");

    std::vector<double> out(z_t.size());
    for (std::size_t i = 0; i < z_t.size(); ++i) {
        const double v = (z_t[i] - z_tm1[i]) / dt;
        const double accel = -(gamma1 * v + gamma0 * z_t[i]);
        out[i] = second_order_stencil(z_t[i], v, accel, dt);
    }
    return out;
}

namespace {

// Acceleration of the two-body spring, force on body 1 negated onto body 2.
void spring_accel(const double* z, double k, double l, double* accel) {
    const double dx = z[0] - z[2];
    const double dy = z[1] - z[3];
    const double dist = std::max(std::sqrt(dx * dx + dy * dy), kSeparationFloor);
    const double fx = -k * dx - l * dx / dist;
    const double fy = -k * dy - l * dy / dist;
    accel[0] = fx;
    accel[1] = fy;
    accel[2] = -fx;
    accel[3] = -fy;
}

// Order n >= 3: derivative estimates v_k from the backward-difference
// table of the history, then the same semi-implicit cascade as Eq-2 order.
std::vector<double> linear_general_step(const LatentHistory& h,
                                        const OdeSystem& sys) {
    const int n = sys.order();
    const int d = sys.dim();
    std::vector<std::vector<double>> v(n);
    std::vector<std::vector<double>> t = h.states;
    v[0] = t[0];
    for (int k = 1; k < n; ++k) {
        for (int j = 0; j < n - k; ++j)
            for (int i = 0; i < d; ++i)
                t[j][i] = (t[j][i] - t[j + 1][i]) / h.dt;
        v[k] = t[0];
    }
    std::vector<double> out(d);
    for (int i = 0; i < d; ++i) {
        double a = 0.0;
        for (int k = 0; k < n; ++k) a -= sys.param(k) * v[k][i];
        // semi-implicit cascade from the highest derivative down
        double u = v[n - 1][i] + h.dt * a;
        for (int k = n - 2; k >= 0; --k) u = v[k][i] + h.dt * u;
        out[i] = u;
    }
    return out;
}

}  // namespace

std::vector<double> euler_step_general(const LatentHistory& history,
                                       const OdeSystem& system,
                                       StepDiag* diag) {
    const int n = system.order();
    const int d = system.dim();
    require(static_cast<int>(history.states.size()) == n,
            "history length must equal system order");
    for (const auto& s : history.states) {
        require(static_cast<int>(s.size()) == d, "state dimension mismatch");
        check_finite(s, "state");
    }
    if (n >= 2)
        require(history.dt > 0.0, "dt must be > 0 for order >= 2");
    else
        require(history.dt >= 0.0, "dt must be >= 0");
    const double dt = history.dt;
    const auto& z = history.states[0];

    switch (system.kind()) {
        case OdeKind::LinearAutonomous: {
            if (n == 1) {
                std::vector<double> out(d);
                for (int i = 0; i < d; ++i)
                    out[i] = z[i] + dt * (-(system.param(0) * z[i]));
                return out;
            }
            if (n == 2)
                return euler_step_second_order(z, history.states[1],
                                               system.param(0), system.param(1), dt);
            return linear_general_step(history, system);
        }
        case OdeKind::Pendulum: {
            const auto& zm1 = history.states[1];
            const double zeta = system.param(0);
            const double gl = system.param(2) / system.param(1);
            std::vector<double> out(d);
            for (int i = 0; i < d; ++i) {
                const double v = (z[i] - zm1[i]) / dt;
                const double accel = -(zeta * v) - gl * std::sin(z[i]);
                out[i] = second_order_stencil(z[i], v, accel, dt);
            }
            return out;
        }
        case OdeKind::Torricelli: {
            const double k = system.param(0);
            std::vector<double> out(d);
            for (int i = 0; i < d; ++i) {
                double h = z[i];
                if (h < 0.0) {
                    h = 0.0;
                    if (diag) ++diag->clamp_events;
                }
                out[i] = z[i] + dt * (-k * std::sqrt(h));
            }
            return out;
        }
        case OdeKind::SlidingBlock: {
            const auto& zm1 = history.states[1];
            const double a = system.param(0);
            std::vector<double> out(d);
            for (int i = 0; i < d; ++i) {
                const double v = (z[i] - zm1[i]) / dt;
                out[i] = second_order_stencil(z[i], v, a, dt);
            }
            return out;
        }
        case OdeKind::ExponentialDecay: {
            const double g = system.param(0);
            std::vector<double> out(d);
            for (int i = 0; i < d; ++i) out[i] = z[i] + dt * (-g * z[i]);
            return out;
        }
        case OdeKind::FreeFallScale: {
            const auto& zm1 = history.states[1];
            const double g = system.param(0);
            const double c = system.param(1) * system.param(2);  // r0 * f
            const double h_t = c / std::max(z[0], kRadiusFloor);
            const double h_tm1 = c / std::max(zm1[0], kRadiusFloor);
            const double vh = (h_t - h_tm1) / dt;
            const double h_next = second_order_stencil(h_t, vh, g, dt);
            return {c / std::max(h_next, kRadiusFloor)};
        }
        case OdeKind::TwoBodySpring: {
            const auto& zm1 = history.states[1];
            double accel[4];
            spring_accel(z.data(), system.param(0), system.param(1), accel);
            std::vector<double> out(4);
            for (int i = 0; i < 4; ++i) {
                const double v = (z[i] - zm1[i]) / dt;
                out[i] = second_order_stencil(z[i], v, accel[i], dt);
            }
            return out;
        }
    }
    throw std::logic_error("unreachable system kind");
}

std::vector<double> rollout(const LatentHistory& history,
                            const OdeSystem& system, int steps,
                            StepDiag* diag) {
    require(steps >= 1, "steps must be >= 1");
    LatentHistory h = history;
    const int d = system.dim();
    std::vector<double> traj(static_cast<std::size_t>(steps) * d);
    for (int s = 0; s < steps; ++s) {
        std::vector<double> next = euler_step_general(h, system, diag);
        for (int i = 0; i < d; ++i) traj[static_cast<std::size_t>(s) * d + i] = next[i];
        h.states.insert(h.states.begin(), std::move(next));
        h.states.pop_back();
    }
    return traj;
}

double closed_form_oscillator(double amplitude, double zeta, double omega,
                              double phi, double t) {
    return amplitude * std::exp(-zeta * t) * std::cos(omega * t + phi);
}

std::pair<double, double> gamma_from_physical(double omega, double zeta) {
    return {omega * omega + zeta * zeta, 2.0 * zeta};
}

StepJacobian euler_step_with_jacobian(const LatentHistory& history,
                                      const OdeSystem& system,
                                      StepDiag* diag) {
    const int n = system.order();
    const int d = system.dim();
    require(n <= 2, "jacobians implemented for order <= 2 systems");
    const double dt = history.dt;
    const std::size_t n_learn = system.learnable_indices().size();

    StepJacobian J;
    J.zhat = euler_step_general(history, system, diag);
    J.d_z_t.assign(static_cast<std::size_t>(d) * d, 0.0);
    if (n == 2) J.d_z_tm1.assign(static_cast<std::size_t>(d) * d, 0.0);
    J.d_gamma.assign(static_cast<std::size_t>(d) * n_learn, 0.0);

    const auto& z = history.states[0];
    auto dz = [&](int i, int j) -> double& { return J.d_z_t[i * d + j]; };
    auto dzm = [&](int i, int j) -> double& { return J.d_z_tm1[i * d + j]; };
    auto dg = [&](int i, std::size_t p) -> double& {
        return J.d_gamma[i * n_learn + p];
    };

    switch (system.kind()) {
        case OdeKind::LinearAutonomous: {
            if (n == 1) {
                const double g0 = system.param(0);
                dz(0, 0) = 1.0 - dt * g0;
                dg(0, 0) = -dt * z[0];
                return J;
            }
            const double g0 = system.param(0);
            const double g1 = system.param(1);
            const auto& zm1 = history.states[1];
            for (int i = 0; i < d; ++i) {
                dz(i, i) = 2.0 - dt * g1 - dt * dt * g0;
                dzm(i, i) = -(1.0 - dt * g1);
                dg(i, 0) = -dt * dt * z[i];
                dg(i, 1) = -dt * (z[i] - zm1[i]);
            }
            return J;
        }
        case OdeKind::Pendulum: {
            const auto& zm1 = history.states[1];
            const double zeta = system.param(0);
            const double L = system.param(1);
            const double g = system.param(2);
            const double v = (z[0] - zm1[0]) / dt;
            // accel = -zeta v - (g/L) sin(z)
            const double da_dz = -(g / L) * std::cos(z[0]);
            const double da_dv = -zeta;
            dz(0, 0) = 2.0 + dt * dt * da_dz + dt * da_dv;
            dzm(0, 0) = -1.0 - dt * da_dv;
            dg(0, 0) = dt * dt * (-v);                            // d/d zeta
            dg(0, 1) = dt * dt * (g / (L * L)) * std::sin(z[0]);  // d/d L
            return J;
        }
        case OdeKind::Torricelli: {
            const double k = system.param(0);
            const double h = std::max(z[0], 0.0);
            const double drate_dz = h > 0.0 ? -k / (2.0 * std::sqrt(h)) : 0.0;
            dz(0, 0) = 1.0 + dt * drate_dz;
            dg(0, 0) = dt * (-std::sqrt(h));
            return J;
        }
        case OdeKind::SlidingBlock: {
            dz(0, 0) = 2.0;
            dzm(0, 0) = -1.0;
            dg(0, 0) = dt * dt;
            return J;
        }
        case OdeKind::ExponentialDecay: {
            const double g = system.param(0);
            dz(0, 0) = 1.0 - dt * g;
            dg(0, 0) = -dt * z[0];
            return J;
        }
        case OdeKind::FreeFallScale: {
            const auto& zm1 = history.states[1];
            const double g = system.param(0);
            const double c = system.param(1) * system.param(2);
            const double rt = std::max(z[0], kRadiusFloor);
            const double rtm = std::max(zm1[0], kRadiusFloor);
            const double h_t = c / rt;
            const double h_tm1 = c / rtm;
            const double h_next = 2.0 * h_t - h_tm1 + dt * dt * g;
            const double hn = std::max(h_next, kRadiusFloor);
            const double drhat_dhn = h_next > kRadiusFloor ? -c / (hn * hn) : 0.0;
            const double dht_drt = z[0] > kRadiusFloor ? -c / (rt * rt) : 0.0;
            const double dhtm_drtm = zm1[0] > kRadiusFloor ? -c / (rtm * rtm) : 0.0;
            dz(0, 0) = drhat_dhn * 2.0 * dht_drt;
            dzm(0, 0) = drhat_dhn * (-dhtm_drtm);
            dg(0, 0) = drhat_dhn * dt * dt;
            return J;
        }
        case OdeKind::TwoBodySpring: {
            const double k = system.param(0);
            const double l = system.param(1);
            const double dx = z[0] - z[2];
            const double dy = z[1] - z[3];
            const double raw = std::sqrt(dx * dx + dy * dy);
            const double dist = std::max(raw, kSeparationFloor);
            // dF/d(delta), with the unit vector treated as constant when the
            // separation floor is active.
            double dF[2][2];
            if (raw > kSeparationFloor) {
                const double inv = 1.0 / dist;
                const double inv3 = inv * inv * inv;
                dF[0][0] = -k - l * (inv - dx * dx * inv3);
                dF[0][1] = -l * (-dx * dy * inv3);
                dF[1][0] = -l * (-dy * dx * inv3);
                dF[1][1] = -k - l * (inv - dy * dy * inv3);
            } else {
                const double inv = 1.0 / dist;
                dF[0][0] = -k - l * inv;
                dF[0][1] = 0.0;
                dF[1][0] = 0.0;
                dF[1][1] = -k - l * inv;
            }
            // accel = (F, -F); d(accel_i)/d(z_j) assembled from dF/d(delta)
            // with d(delta)/d(p1) = I, d(delta)/d(p2) = -I.
            double dA[4][4] = {};
            for (int r = 0; r < 2; ++r)
                for (int cidx = 0; cidx < 2; ++cidx) {
                    dA[r][cidx] = dF[r][cidx];
                    dA[r][cidx + 2] = -dF[r][cidx];
                    dA[r + 2][cidx] = -dF[r][cidx];
                    dA[r + 2][cidx + 2] = dF[r][cidx];
                }
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    dz(i, j) = (i == j ? 2.0 : 0.0) + dt * dt * dA[i][j];
                    dzm(i, j) = (i == j ? -1.0 : 0.0);
                }
            // d(accel)/dk = (-delta, +delta)
            dg(0, 0) = dt * dt * (-dx);
            dg(1, 0) = dt * dt * (-dy);
            dg(2, 0) = dt * dt * (dx);
            dg(3, 0) = dt * dt * (dy);
            return J;
        }
    }
    throw std::logic_error("unreachable system kind");
}

}  // namespace latdyn
