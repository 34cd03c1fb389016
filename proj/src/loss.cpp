#include "latdyn/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "latdyn/kernels.hpp"

namespace latdyn {

namespace {

constexpr double kVarFloor = 1e-8;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Prior Prior::standard(int d) { return isotropic(d, 0.0, 1.0); }

Prior Prior::isotropic(int d, double mean, double stddev) {
    require(d >= 1, "prior dim must be >= 1");
    require(stddev > 0.0, "prior stddev must be > 0");
    Prior p;
    p.mu0.assign(d, mean);
    p.var0.assign(d, stddev * stddev);
    return p;
}

Prior Prior::isotropic_var(int d, double mean, double variance) {
    require(variance > 0.0, "prior variance must be > 0");
    Prior p;
    p.mu0.assign(d, mean);
    p.var0.assign(d, variance);
    return p;
}

double prediction_loss(const LatentBatch& batch) {
    require(batch.rows >= 1, "prediction loss needs at least one row");
    const auto& k = simd::active_kernels();
    const double sq = k.sq_diff_sum(batch.z.data(), batch.zhat.data(),
                                    batch.rows * batch.dim);
    return sq / static_cast<double>(batch.rows);
}

void batch_moments(const double* z, std::size_t rows, int dim, double* mu,
                   double* var) {
    require(rows >= 2, "batch moments need M >= 2");
    for (int j = 0; j < dim; ++j) {
        mu[j] = 0.0;
        var[j] = 0.0;
    }
    for (std::size_t i = 0; i < rows; ++i)
        for (int j = 0; j < dim; ++j) mu[j] += z[i * dim + j];
    for (int j = 0; j < dim; ++j) mu[j] /= static_cast<double>(rows);
    for (std::size_t i = 0; i < rows; ++i)
        for (int j = 0; j < dim; ++j) {
            const double dv = z[i * dim + j] - mu[j];
            var[j] += dv * dv;
        }
    for (int j = 0; j < dim; ++j) var[j] /= static_cast<double>(rows);
}

void compute_moments(LatentBatch& batch) {
    batch.mu_z.assign(batch.dim, 0.0);
    batch.var_z.assign(batch.dim, 0.0);
    batch_moments(batch.z.data(), batch.rows, batch.dim, batch.mu_z.data(),
                  batch.var_z.data());
}

double kl_loss(const std::vector<double>& mu_z, const std::vector<double>& var_z,
               const Prior& prior) {
    const int d = static_cast<int>(mu_z.size());
    require(d >= 1 && var_z.size() == mu_z.size(), "moment dimension mismatch");
    require(prior.dim() == d, "prior dimension mismatch");
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
        const double s0 = std::sqrt(prior.var0[j]);
        const double m = (mu_z[j] - prior.mu0[j]) / s0;
        const double v = std::max(var_z[j], kVarFloor) / prior.var0[j];
        if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(m))
            throw std::domain_error("invalid batch variance in KL term");
        acc += 1.0 + std::log(v) - m * m - v;
    }
    return -acc / d;
}

LossTerms total_loss(const LatentBatch& batch, const Prior& prior,
                     LossMode mode) {
    LossTerms t;
    t.l1 = prediction_loss(batch);
    if (mode == LossMode::Full) {
        if (static_cast<int>(batch.mu_z.size()) == batch.dim &&
            static_cast<int>(batch.var_z.size()) == batch.dim) {
            t.l2 = kl_loss(batch.mu_z, batch.var_z, prior);
        } else {
            std::vector<double> mu(batch.dim), var(batch.dim);
            batch_moments(batch.z.data(), batch.rows, batch.dim, mu.data(), var.data());
            t.l2 = kl_loss(mu, var, prior);
        }
    }
    t.total = t.l1 + t.l2;
    return t;
}

void loss_backward(const LatentBatch& batch, const Prior& prior, LossMode mode,
                   LossGrads& grads) {
    const std::size_t rows = batch.rows;
    const int d = batch.dim;
    const double inv_m = 1.0 / static_cast<double>(rows);
    grads.d_z.assign(rows * d, 0.0);
    grads.d_zhat.assign(rows * d, 0.0);

    for (std::size_t i = 0; i < rows * d; ++i) {
        const double diff = batch.z[i] - batch.zhat[i];
        grads.d_z[i] = 2.0 * diff * inv_m;
        grads.d_zhat[i] = -2.0 * diff * inv_m;
    }
    if (mode != LossMode::Full) return;

    require(static_cast<int>(batch.mu_z.size()) == d &&
                static_cast<int>(batch.var_z.size()) == d,
            "loss_backward requires batch moments");
    // KL pathway through the batch moments. The variance floor is treated
    // as the identity in the gradient so a collapsed batch still gets the
    // full push toward var0 (see kl_loss).
    for (int j = 0; j < d; ++j) {
        const double s0 = std::sqrt(prior.var0[j]);
        const double m = (batch.mu_z[j] - prior.mu0[j]) / s0;
        const double vf = std::max(batch.var_z[j], kVarFloor);
        const double v = vf / prior.var0[j];
        const double dl_dm = (2.0 / d) * m / s0;           // d l2 / d mu_j
        const double dl_dv = (1.0 / d) * (1.0 - 1.0 / v) / prior.var0[j];
        for (std::size_t i = 0; i < rows; ++i) {
            const double zc = batch.z[i * d + j] - batch.mu_z[j];
            grads.d_z[i * d + j] += dl_dm * inv_m + dl_dv * 2.0 * zc * inv_m;
        }
    }
}

}  // namespace latdyn
