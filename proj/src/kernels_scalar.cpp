#include "latdyn/kernels.hpp"

#include <cmath>

// Reference kernels. Plain loops, no reassociation tricks; these define the
// semantics the SIMD variants are tested against.

namespace latdyn::simd {
namespace {

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[i * n + j] += acc;
        }
    }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
    // a is (k x m), b is (k x n); C(m,n) += A^T B
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void add_bias_rows_scalar(double* c, std::size_t m, std::size_t n,
                          const double* bias) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += bias[j];
    }
}

void colsum_acc_scalar(const double* a, std::size_t m, std::size_t n,
                       double* out) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += ai[j];
    }
}

void relu_scalar(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* y, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (y[i] <= 0.0) g[i] = 0.0;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double sq_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void adam_step_scalar(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double inv_bc1, double inv_bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] * inv_bc1;
        const double vhat = v[i] * inv_bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels table = {
        "scalar",
        gemm_nt_scalar,
        gemm_tn_scalar,
        gemm_nn_scalar,
        add_bias_rows_scalar,
        colsum_acc_scalar,
        relu_scalar,
        relu_backward_scalar,
        axpy_scalar,
        dot_scalar,
        sum_scalar,
        sq_diff_sum_scalar,
        adam_step_scalar,
    };
    return table;
}

}  // namespace latdyn::simd
