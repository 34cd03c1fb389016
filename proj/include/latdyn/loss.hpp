#pragma once

#include <vector>

// The two-term unsupervised loss. L1 is the latent prediction MSE; L2 is
// the KL expression on the per-dimension batch moments of z against a
// Gaussian prior (twice the standard Gaussian KL; same minimizer). Moments
// for a non-standard prior are standardized first, which reduces to the
// plain expression for N(0,1).

namespace latdyn {

struct Prior {
    std::vector<double> mu0, var0;

    static Prior standard(int d);
    static Prior isotropic(int d, double mean, double stddev);
    static Prior isotropic_var(int d, double mean, double variance);
    int dim() const { return static_cast<int>(mu0.size()); }
};

enum class LossMode { Full, MseOnly };

struct LatentBatch {
    std::size_t rows = 0;
    int dim = 0;
    std::vector<double> z, zhat;      // rows x dim
    std::vector<double> mu_z, var_z;  // dim
};

/// (1/M) sum_i ||z_i - zhat_i||^2
double prediction_loss(const LatentBatch& batch);

/// Per-dimension mean and population variance (divide by M); rows >= 2.
void batch_moments(const double* z, std::size_t rows, int dim, double* mu,
                   double* var);
void compute_moments(LatentBatch& batch);

/// -(1/d) sum_j (1 + ln v'_j - m'^2_j - v'_j) on standardized moments
/// m' = (mu - mu0)/sigma0, v' = var/var0. Variance floored at 1e-8 before
/// the ln. Zero iff the standardized moments are (0,1).
double kl_loss(const std::vector<double>& mu_z, const std::vector<double>& var_z,
               const Prior& prior);

struct LossTerms {
    double total = 0.0, l1 = 0.0, l2 = 0.0;
};

/// total = l1 + l2 with unit weights; MseOnly zeroes the l2 term.
LossTerms total_loss(const LatentBatch& batch, const Prior& prior,
                     LossMode mode = LossMode::Full);

struct LossGrads {
    std::vector<double> d_z, d_zhat;  // rows x dim
};

/// Exact gradients of total_loss w.r.t. every z and zhat row, including the
/// batch-moment pathway of the KL term. Expects batch moments filled in.
void loss_backward(const LatentBatch& batch, const Prior& prior, LossMode mode,
                   LossGrads& grads);

}  // namespace latdyn
