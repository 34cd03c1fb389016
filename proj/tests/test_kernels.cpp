#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "latdyn/kernels.hpp"

using namespace latdyn::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
        CHECK(std::abs(a[i] - b[i]) <= tol * scale);
    }
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar gemm_nt matches a hand example") {
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]] -> C = A B^T
    const std::vector<double> a = {1, 2, 3, 4}, b = {5, 6, 7, 8};
    std::vector<double> c(4, 0.0);
    scalar_kernels().gemm_nt(2, 2, 2, a.data(), b.data(), c.data());
    CHECK(c[0] == 17.0);  // 1*5+2*6
    CHECK(c[1] == 23.0);  // 1*7+2*8
    CHECK(c[2] == 39.0);
    CHECK(c[3] == 53.0);
}

TEST_CASE("scalar gemm_tn / gemm_nn match naive references") {
    std::mt19937_64 rng(7);
    const std::size_t m = 5, n = 7, k = 9;
    const auto a_tn = random_vec(k * m, rng);
    const auto b_tn = random_vec(k * n, rng);
    std::vector<double> c(m * n, 0.0), ref(m * n, 0.0);
    scalar_kernels().gemm_tn(m, n, k, a_tn.data(), b_tn.data(), c.data());
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                ref[i * n + j] += a_tn[p * m + i] * b_tn[p * n + j];
    check_close(c, ref, 1e-15);

    const auto a_nn = random_vec(m * k, rng);
    const auto b_nn = random_vec(k * n, rng);
    std::fill(c.begin(), c.end(), 0.0);
    std::fill(ref.begin(), ref.end(), 0.0);
    scalar_kernels().gemm_nn(m, n, k, a_nn.data(), b_nn.data(), c.data());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j)
                ref[i * n + j] += a_nn[i * k + p] * b_nn[p * n + j];
    check_close(c, ref, 1e-15);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
    const Kernels* avx = avx2_kernels();
    if (!avx) {
        MESSAGE("AVX2 unavailable on this host; equivalence checks skipped");
        return;
    }
    const Kernels& ref = scalar_kernels();
    std::mt19937_64 rng(42);

    // deliberately awkward shapes to cover tails
    const std::size_t shapes[][3] = {{1, 1, 1},   {2, 4, 8},   {3, 5, 7},
                                     {4, 4, 16},  {5, 9, 33},  {8, 12, 100},
                                     {13, 7, 251}, {6, 31, 64}};
    for (const auto& s : shapes) {
        const std::size_t m = s[0], n = s[1], k = s[2];
        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(n * k, rng);
        std::vector<double> c0(m * n, 0.5), c1(m * n, 0.5);
        ref.gemm_nt(m, n, k, a.data(), b.data(), c0.data());
        avx->gemm_nt(m, n, k, a.data(), b.data(), c1.data());
        check_close(c0, c1, 1e-12);

        const auto at = random_vec(k * m, rng);
        const auto bt = random_vec(k * n, rng);
        std::fill(c0.begin(), c0.end(), -0.25);
        std::fill(c1.begin(), c1.end(), -0.25);
        ref.gemm_tn(m, n, k, at.data(), bt.data(), c0.data());
        avx->gemm_tn(m, n, k, at.data(), bt.data(), c1.data());
        check_close(c0, c1, 1e-12);

        const auto an = random_vec(m * k, rng);
        const auto bn = random_vec(k * n, rng);
        std::fill(c0.begin(), c0.end(), 1.0);
        std::fill(c1.begin(), c1.end(), 1.0);
        ref.gemm_nn(m, n, k, an.data(), bn.data(), c0.data());
        avx->gemm_nn(m, n, k, an.data(), bn.data(), c1.data());
        check_close(c0, c1, 1e-12);
    }

    for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 255u, 1000u}) {
        auto x = random_vec(n, rng);
        auto y = random_vec(n, rng);

        auto x0 = x;
        ref.relu(x0.data(), n);
        auto x1 = x;
        avx->relu(x1.data(), n);
        check_close(x0, x1, 0.0);

        auto g0 = y, g1 = y;
        ref.relu_backward(x.data(), g0.data(), n);
        avx->relu_backward(x.data(), g1.data(), n);
        check_close(g0, g1, 0.0);

        auto y0 = y, y1 = y;
        ref.axpy(0.37, x.data(), y0.data(), n);
        avx->axpy(0.37, x.data(), y1.data(), n);
        check_close(y0, y1, 1e-15);

        CHECK(std::abs(ref.dot(x.data(), y.data(), n) -
                       avx->dot(x.data(), y.data(), n)) < 1e-12);
        CHECK(std::abs(ref.sum(x.data(), n) - avx->sum(x.data(), n)) < 1e-12);
        CHECK(std::abs(ref.sq_diff_sum(x.data(), y.data(), n) -
                       avx->sq_diff_sum(x.data(), y.data(), n)) < 1e-12);

        // bias rows + colsum on an m x n block
        const std::size_t m = 5;
        auto c = random_vec(m * n, rng);
        const auto bias = random_vec(n, rng);
        auto c0 = c, c1 = c;
        ref.add_bias_rows(c0.data(), m, n, bias.data());
        avx->add_bias_rows(c1.data(), m, n, bias.data());
        check_close(c0, c1, 0.0);
        std::vector<double> s0(n, 0.1), s1(n, 0.1);
        ref.colsum_acc(c.data(), m, n, s0.data());
        avx->colsum_acc(c.data(), m, n, s1.data());
        check_close(s0, s1, 1e-13);

        // one adam step from identical state
        auto p0 = random_vec(n, rng);
        auto p1 = p0;
        auto g = random_vec(n, rng);
        std::vector<double> m0(n, 0.01), v0(n, 0.02), m1 = m0, v1 = v0;
        ref.adam_step(p0.data(), g.data(), m0.data(), v0.data(), n, 1e-2, 0.9,
                      0.999, 1e-8, 1.5, 1.2);
        avx->adam_step(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-2, 0.9,
                       0.999, 1e-8, 1.5, 1.2);
        check_close(p0, p1, 1e-14);
        check_close(m0, m1, 1e-14);
        check_close(v0, v1, 1e-14);
    }
}

TEST_CASE("adam_step reproduces the textbook update") {
    // single parameter, first step from zero moments
    double p = 1.0, g = 0.5, m = 0.0, v = 0.0;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 / (1.0 - b1), c2 = 1.0 / (1.0 - b2);
    scalar_kernels().adam_step(&p, &g, &m, &v, 1, lr, b1, b2, eps, c1, c2);
    // mhat = g, vhat = g^2 -> p -= lr * g / (|g| + eps)
    CHECK(p == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + eps)).epsilon(1e-12));
}

TEST_CASE("active_kernels returns a usable table") {
    const Kernels& k = active_kernels();
    const std::vector<double> a = {1.0, 2.0, 3.0};
    CHECK(k.sum(a.data(), 3) == doctest::Approx(6.0));
}

}  // TEST_SUITE
