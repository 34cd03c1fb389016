#pragma once

#include <cstddef>

// Data-parallel inner-loop kernels used by the encoder, loss and optimizer.
// Every kernel exists as a scalar reference implementation and, where the
// build/host supports it, an AVX2+FMA variant. The active table is selected
// once at runtime; LATDYN_SIMD=scalar forces the reference path.
//
// Conventions: all matrices are packed row-major. GEMM kernels accumulate
// into C (callers zero-fill when overwrite semantics are wanted). Summation
// order is fixed within one table, so results are reproducible run-to-run.

namespace latdyn::simd {

struct Kernels {
    const char* name;

    // C(m,n) += A(m,k) * B(n,k)^T   (rows of A dotted with rows of B)
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // C(m,n) += A(k,m)^T * B(k,n)
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // C(m,n) += A(m,k) * B(k,n)
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);

    // c[i,:] += bias for every row i
    void (*add_bias_rows)(double* c, std::size_t m, std::size_t n,
                          const double* bias);
    // out[j] += sum_i a[i,j]
    void (*colsum_acc)(const double* a, std::size_t m, std::size_t n,
                       double* out);

    void (*relu)(double* x, std::size_t n);  // in-place max(x, 0)
    // g[i] = 0 where y[i] <= 0 (subgradient at 0 is 0)
    void (*relu_backward)(const double* y, double* g, std::size_t n);

    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);

    // One Adam update over n parameters. inv_bc1/inv_bc2 are the
    // 1/(1-beta^t) bias-correction factors, precomputed by the caller.
    void (*adam_step)(double* p, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double inv_bc1, double inv_bc2);
};

const Kernels& scalar_kernels();

// nullptr when the binary was built without AVX2 support or the host CPU
// lacks it.
const Kernels* avx2_kernels();

// Table chosen at first use: AVX2 when available unless LATDYN_SIMD=scalar.
const Kernels& active_kernels();

}  // namespace latdyn::simd
