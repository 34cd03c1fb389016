#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Governing-equation definitions and the one-step Euler physics block.
// A system is an autonomous ODE z^(n) = f(z, z', ...; gamma); the block
// advances the newest latent state one sampling period using backward
// finite differences of the stored history for the derivative estimates
// and a semi-implicit update cascade (each derivative is advanced with the
// already-updated next-higher one).

namespace latdyn {

enum class OdeKind {
    LinearAutonomous,  // z^(n) + gamma_{n-1} z^(n-1) + ... + gamma_0 z = 0
    Pendulum,          // theta'' = -zeta theta' - (g/L) sin(theta)
    Torricelli,        // h' = -k sqrt(max(h,0)), reported estimate is |k|
    SlidingBlock,      // x'' = a  (total acceleration along the ramp)
    ExponentialDecay,  // z' = -gamma z
    FreeFallScale,     // apparent radius r = r0*f/h with h'' = g
    TwoBodySpring,     // planar pair, F = -k*dp - l*dp/|dp|, unit masses
};

struct OdeParam {
    std::string name;
    double value = 0.0;
    std::string unit;
    bool learnable = true;
};

class OdeSystem {
  public:
    static OdeSystem linear(int order, std::vector<double> gammas);
    static OdeSystem pendulum(double zeta, double length, double gravity);
    static OdeSystem torricelli(double k);
    static OdeSystem sliding_block(double accel);
    static OdeSystem exponential_decay(double gamma);
    static OdeSystem free_fall_scale(double g, double r0, double f, double h0);
    static OdeSystem two_body_spring(double k, double l);

    OdeKind kind() const { return kind_; }
    int order() const { return order_; }
    int dim() const { return dim_; }
    const std::vector<OdeParam>& params() const { return params_; }
    double param(std::size_t i) const { return params_[i].value; }
    void set_param(std::size_t i, double v) { params_[i].value = v; }

    std::vector<std::size_t> learnable_indices() const;
    std::vector<double> learnable_values() const;
    void set_learnable_values(const std::vector<double>& v);
    std::vector<std::string> learnable_names() const;

    std::string kind_name() const;

  private:
    OdeSystem(OdeKind kind, int order, int dim, std::vector<OdeParam> params);

    OdeKind kind_;
    int order_;
    int dim_;
    std::vector<OdeParam> params_;
};

OdeSystem make_system(const std::string& kind_name, int order,
                      const std::vector<double>& params);

// Latent states most recent first; length must equal the system order.
struct LatentHistory {
    std::vector<std::vector<double>> states;
    double dt = 0.0;
};

// Counters surfaced instead of aborting inside a step.
struct StepDiag {
    long clamp_events = 0;
};

/// One Euler step of z'' + gamma1 z' + gamma0 z = 0 (elementwise over d):
/// zhat = z_t + dt*(v + dt*accel) with v = (z_t - z_tm1)/dt and
/// accel = -(gamma1*v + gamma0*z_t).
std::vector<double> euler_step_second_order(const std::vector<double>& z_t,
                                            const std::vector<double>& z_tm1,
                                            double gamma0, double gamma1,
                                            double dt);

/// One Euler step of an arbitrary system. history.states.size() must equal
/// the system order; dt must be > 0 for order >= 2 (the velocity estimate
/// divides by dt) and >= 0 for order 1.
std::vector<double> euler_step_general(const LatentHistory& history,
                                       const OdeSystem& system,
                                       StepDiag* diag = nullptr);

/// Iterated euler_step_general; each prediction becomes the newest history
/// entry. Returns steps x d, flattened row-major.
std::vector<double> rollout(const LatentHistory& history,
                            const OdeSystem& system, int steps,
                            StepDiag* diag = nullptr);

/// A * exp(-zeta t) * cos(omega t + phi)
double closed_form_oscillator(double amplitude, double zeta, double omega,
                              double phi, double t);

/// Maps oscillator frequency/damping to the linear second-order
/// coefficients: gamma0 = omega^2 + zeta^2, gamma1 = 2 zeta.
std::pair<double, double> gamma_from_physical(double omega, double zeta);

// Step plus the Jacobians the trainer chains through. d_z_t / d_z_tm1 are
// d x d row-major (d_z_tm1 empty for first-order systems); d_gamma is
// d x n_learnable.
struct StepJacobian {
    std::vector<double> zhat;
    std::vector<double> d_z_t;
    std::vector<double> d_z_tm1;
    std::vector<double> d_gamma;
};

StepJacobian euler_step_with_jacobian(const LatentHistory& history,
                                      const OdeSystem& system,
                                      StepDiag* diag = nullptr);

}  // namespace latdyn
