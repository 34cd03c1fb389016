// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64 builds only; kernels_dispatch.cpp decides at
// runtime whether the host may execute it.

#include "latdyn/kernels.hpp"

#if defined(LATDYN_BUILD_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace latdyn::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// 2x4 register tile of dot products over the shared k dimension. Rows of
// A are processed in panels (the active A slice stays in L2) and the four
// B rows of a tile are reused across the whole panel.
namespace nt_detail {

inline void tile_2x4(const double* a0, const double* a1, const double* b0,
                     const double* b1, const double* b2, const double* b3,
                     std::size_t k, std::size_t kv, double* c0, double* c1) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c02 = _mm256_setzero_pd(), c03 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c12 = _mm256_setzero_pd(), c13 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < kv; p += 4) {
        const __m256d va0 = _mm256_loadu_pd(a0 + p);
        const __m256d va1 = _mm256_loadu_pd(a1 + p);
        __m256d vb;
        vb = _mm256_loadu_pd(b0 + p);
        c00 = _mm256_fmadd_pd(va0, vb, c00);
        c10 = _mm256_fmadd_pd(va1, vb, c10);
        vb = _mm256_loadu_pd(b1 + p);
        c01 = _mm256_fmadd_pd(va0, vb, c01);
        c11 = _mm256_fmadd_pd(va1, vb, c11);
        vb = _mm256_loadu_pd(b2 + p);
        c02 = _mm256_fmadd_pd(va0, vb, c02);
        c12 = _mm256_fmadd_pd(va1, vb, c12);
        vb = _mm256_loadu_pd(b3 + p);
        c03 = _mm256_fmadd_pd(va0, vb, c03);
        c13 = _mm256_fmadd_pd(va1, vb, c13);
    }
    double s00 = hsum(c00), s01 = hsum(c01), s02 = hsum(c02), s03 = hsum(c03);
    double s10 = hsum(c10), s11 = hsum(c11), s12 = hsum(c12), s13 = hsum(c13);
    for (std::size_t p = kv; p < k; ++p) {
        s00 += a0[p] * b0[p]; s01 += a0[p] * b1[p];
        s02 += a0[p] * b2[p]; s03 += a0[p] * b3[p];
        s10 += a1[p] * b0[p]; s11 += a1[p] * b1[p];
        s12 += a1[p] * b2[p]; s13 += a1[p] * b3[p];
    }
    c0[0] += s00; c0[1] += s01; c0[2] += s02; c0[3] += s03;
    c1[0] += s10; c1[1] += s11; c1[2] += s12; c1[3] += s13;
}

inline void dot_row(const double* ai, const double* bj, std::size_t k,
                    std::size_t kv, double* out) {
    __m256d v = _mm256_setzero_pd();
    for (std::size_t p = 0; p < kv; p += 4)
        v = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), v);
    double s = hsum(v);
    for (std::size_t p = kv; p < k; ++p) s += ai[p] * bj[p];
    *out += s;
}

}  // namespace nt_detail

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c) {
    using namespace nt_detail;
    const std::size_t kv = k & ~std::size_t(3);
    constexpr std::size_t kRowPanel = 64;
    for (std::size_t i0 = 0; i0 < m; i0 += kRowPanel) {
        const std::size_t i1 = std::min(i0 + kRowPanel, m);
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + j * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            std::size_t i = i0;
            for (; i + 2 <= i1; i += 2)
                tile_2x4(a + i * k, a + (i + 1) * k, b0, b1, b2, b3, k, kv,
                         c + i * n + j, c + (i + 1) * n + j);
            for (; i < i1; ++i)
                for (std::size_t jj = 0; jj < 4; ++jj)
                    dot_row(a + i * k, b + (j + jj) * k, k, kv, c + i * n + j + jj);
        }
        for (; j < n; ++j)
            for (std::size_t i = i0; i < i1; ++i)
                dot_row(a + i * k, b + j * k, k, kv, c + i * n + j);
    }
}

// C(m,n) += A(k,m)^T B(k,n): 4 C-rows x 8 columns in registers, k split
// into panels so the active B slice stays cached while C absorbs one
// partial sum per panel.
void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c) {
    constexpr std::size_t kPanel = 64;
    for (std::size_t p0 = 0; p0 < k; p0 += kPanel) {
        const std::size_t p1 = std::min(p0 + kPanel, k);
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256d acc00 = _mm256_setzero_pd(), acc01 = _mm256_setzero_pd();
                __m256d acc10 = _mm256_setzero_pd(), acc11 = _mm256_setzero_pd();
                __m256d acc20 = _mm256_setzero_pd(), acc21 = _mm256_setzero_pd();
                __m256d acc30 = _mm256_setzero_pd(), acc31 = _mm256_setzero_pd();
                for (std::size_t p = p0; p < p1; ++p) {
                    const double* ap = a + p * m + i;
                    const double* bp = b + p * n + j;
                    const __m256d vb0 = _mm256_loadu_pd(bp);
                    const __m256d vb1 = _mm256_loadu_pd(bp + 4);
                    __m256d va;
                    va = _mm256_set1_pd(ap[0]);
                    acc00 = _mm256_fmadd_pd(va, vb0, acc00);
                    acc01 = _mm256_fmadd_pd(va, vb1, acc01);
                    va = _mm256_set1_pd(ap[1]);
                    acc10 = _mm256_fmadd_pd(va, vb0, acc10);
                    acc11 = _mm256_fmadd_pd(va, vb1, acc11);
                    va = _mm256_set1_pd(ap[2]);
                    acc20 = _mm256_fmadd_pd(va, vb0, acc20);
                    acc21 = _mm256_fmadd_pd(va, vb1, acc21);
                    va = _mm256_set1_pd(ap[3]);
                    acc30 = _mm256_fmadd_pd(va, vb0, acc30);
                    acc31 = _mm256_fmadd_pd(va, vb1, acc31);
                }
                double* c0 = c + i * n + j;
                double* c1 = c0 + n;
                double* c2 = c1 + n;
                double* c3 = c2 + n;
                _mm256_storeu_pd(c0, _mm256_add_pd(_mm256_loadu_pd(c0), acc00));
                _mm256_storeu_pd(c0 + 4, _mm256_add_pd(_mm256_loadu_pd(c0 + 4), acc01));
                _mm256_storeu_pd(c1, _mm256_add_pd(_mm256_loadu_pd(c1), acc10));
                _mm256_storeu_pd(c1 + 4, _mm256_add_pd(_mm256_loadu_pd(c1 + 4), acc11));
                _mm256_storeu_pd(c2, _mm256_add_pd(_mm256_loadu_pd(c2), acc20));
                _mm256_storeu_pd(c2 + 4, _mm256_add_pd(_mm256_loadu_pd(c2 + 4), acc21));
                _mm256_storeu_pd(c3, _mm256_add_pd(_mm256_loadu_pd(c3), acc30));
                _mm256_storeu_pd(c3 + 4, _mm256_add_pd(_mm256_loadu_pd(c3 + 4), acc31));
            }
            for (; j < n; ++j) {
                double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                for (std::size_t p = p0; p < p1; ++p) {
                    const double* ap = a + p * m + i;
                    const double bv = b[p * n + j];
                    s0 += ap[0] * bv;
                    s1 += ap[1] * bv;
                    s2 += ap[2] * bv;
                    s3 += ap[3] * bv;
                }
                c[i * n + j] += s0;
                c[(i + 1) * n + j] += s1;
                c[(i + 2) * n + j] += s2;
                c[(i + 3) * n + j] += s3;
            }
        }
        for (; i < m; ++i) {
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d acc = _mm256_setzero_pd();
                for (std::size_t p = p0; p < p1; ++p) {
                    const __m256d va = _mm256_set1_pd(a[p * m + i]);
                    acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(b + p * n + j), acc);
                }
                double* ci = c + i * n + j;
                _mm256_storeu_pd(ci, _mm256_add_pd(_mm256_loadu_pd(ci), acc));
            }
            for (; j < n; ++j) {
                double s = 0.0;
                for (std::size_t p = p0; p < p1; ++p) s += a[p * m + i] * b[p * n + j];
                c[i * n + j] += s;
            }
        }
    }
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c) {
    const std::size_t nv = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        std::size_t p = 0;
        for (; p + 2 <= k; p += 2) {
            const __m256d va0 = _mm256_set1_pd(ai[p]);
            const __m256d va1 = _mm256_set1_pd(ai[p + 1]);
            const double* b0 = b + p * n;
            const double* b1 = b0 + n;
            std::size_t j = 0;
            for (; j < nv; j += 4) {
                __m256d acc = _mm256_loadu_pd(ci + j);
                acc = _mm256_fmadd_pd(va0, _mm256_loadu_pd(b0 + j), acc);
                acc = _mm256_fmadd_pd(va1, _mm256_loadu_pd(b1 + j), acc);
                _mm256_storeu_pd(ci + j, acc);
            }
            for (; j < n; ++j) ci[j] += ai[p] * b0[j] + ai[p + 1] * b1[j];
        }
        for (; p < k; ++p) {
            const __m256d va = _mm256_set1_pd(ai[p]);
            const double* bp = b + p * n;
            std::size_t j = 0;
            for (; j < nv; j += 4) {
                __m256d acc = _mm256_loadu_pd(ci + j);
                acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j), acc);
                _mm256_storeu_pd(ci + j, acc);
            }
            for (; j < n; ++j) ci[j] += ai[p] * bp[j];
        }
    }
}

void add_bias_rows_avx2(double* c, std::size_t m, std::size_t n,
                        const double* bias) {
    const std::size_t nv = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        std::size_t j = 0;
        for (; j < nv; j += 4)
            _mm256_storeu_pd(ci + j, _mm256_add_pd(_mm256_loadu_pd(ci + j),
                                                   _mm256_loadu_pd(bias + j)));
        for (; j < n; ++j) ci[j] += bias[j];
    }
}

void colsum_acc_avx2(const double* a, std::size_t m, std::size_t n,
                     double* out) {
    const std::size_t nv = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * n;
        std::size_t j = 0;
        for (; j < nv; j += 4)
            _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j),
                                                    _mm256_loadu_pd(ai + j)));
        for (; j < n; ++j) out[j] += ai[j];
    }
}

void relu_avx2(double* x, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* y, double* g, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
    }
    for (; i < n; ++i)
        if (y[i] <= 0.0) g[i] = 0.0;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i];
    return s;
}

double sq_diff_sum_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void adam_step_avx2(double* p, const double* g, double* m, double* v,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double inv_bc1, double inv_bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vc1 = _mm256_set1_pd(inv_bc1);
    const __m256d vc2 = _mm256_set1_pd(inv_bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        __m256d vm = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(v1mb1, vg));
        vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(v1mb2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m + i, vm);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vc1);
        const __m256d vhat = _mm256_mul_pd(vv, vc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] * inv_bc1;
        const double vhat = v[i] * inv_bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Kernels* avx2_kernels_impl() {
    static const Kernels table = {
        "avx2",
        gemm_nt_avx2,
        gemm_tn_avx2,
        gemm_nn_avx2,
        add_bias_rows_avx2,
        colsum_acc_avx2,
        relu_avx2,
        relu_backward_avx2,
        axpy_avx2,
        dot_avx2,
        sum_avx2,
        sq_diff_sum_avx2,
        adam_step_avx2,
    };
    return &table;
}

}  // namespace latdyn::simd

#endif  // LATDYN_BUILD_AVX2
