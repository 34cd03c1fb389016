#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <random>

#include "latdyn/encoder.hpp"

using namespace latdyn;

namespace {

std::vector<double> random_frame(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

double total_loss_proxy(const EncoderParams& p, const std::vector<double>& frame,
                        const std::vector<double>& grad_z) {
    // scalar function whose exact gradient encoder_backward computes
    const auto z = encode(p, frame);
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) acc += z[i] * grad_z[i];
    return acc;
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("init: determinism, kaiming scale, zero biases") {
    const auto a = init_encoder(2500, 256, 128, 2, 99);
    const auto b = init_encoder(2500, 256, 128, 2, 99);
    CHECK(a.w1 == b.w1);
    CHECK(a.w3 == b.w3);

    for (double v : a.b1) CHECK(v == 0.0);
    for (double v : a.b2) CHECK(v == 0.0);
    for (double v : a.b3) CHECK(v == 0.0);

    double ss = 0.0;
    for (double v : a.w1) ss += v * v;
    const double stddev = std::sqrt(ss / a.w1.size());
    const double expect = std::sqrt(2.0 / 2500.0);
    CHECK(std::abs(stddev - expect) < 0.1 * expect);

    CHECK_THROWS_AS(init_encoder(0, 8, 8, 1, 0), std::invalid_argument);
}

TEST_CASE("encode degenerate cases") {
    auto p = init_encoder(4, 3, 3, 2, 1);
    std::fill(p.w1.begin(), p.w1.end(), 0.0);
    std::fill(p.w2.begin(), p.w2.end(), 0.0);
    std::fill(p.w3.begin(), p.w3.end(), 0.0);
    p.b3 = {0.7, -0.3};
    const auto z = encode(p, {0.1, 0.2, 0.3, 0.4});
    CHECK(z[0] == 0.7);
    CHECK(z[1] == -0.3);

    CHECK_THROWS_AS(encode(p, {0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("hand-built single-unit chain") {
    // 1-pixel frame, one unit per layer: z = w3*relu(w2*relu(w1*x+b1)+b2)+b3
    EncoderParams p;
    p.in_dim = p.h1 = p.h2 = p.out_dim = 1;
    p.w1 = {2.0};
    p.b1 = {-0.5};
    p.w2 = {1.5};
    p.b2 = {0.25};
    p.w3 = {-1.0};
    p.b3 = {0.1};
    auto chain = [&](double x) {
        const double a1 = std::max(2.0 * x - 0.5, 0.0);
        const double a2 = std::max(1.5 * a1 + 0.25, 0.0);
        return -1.0 * a2 + 0.1;
    };
    for (double x : {0.0, 0.2, 0.5, 1.0})
        CHECK(encode(p, {x})[0] == doctest::Approx(chain(x)).epsilon(1e-15));
}

TEST_CASE("batch encode equals per-frame encode") {
    std::mt19937_64 rng(5);
    const auto p = init_encoder(16, 8, 8, 2, 3);
    std::vector<double> frames;
    std::vector<std::vector<double>> singles;
    for (int i = 0; i < 5; ++i) {
        const auto f = random_frame(16, rng);
        frames.insert(frames.end(), f.begin(), f.end());
        singles.push_back(encode(p, f));
    }
    EncoderActivations acts;
    encode_batch(p, frames.data(), 5, acts);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(acts.z[i * 2 + j] == singles[i][j]);
}

TEST_CASE("positive homogeneity with zero biases") {
    std::mt19937_64 rng(8);
    auto p = init_encoder(12, 6, 6, 1, 17);
    std::fill(p.b1.begin(), p.b1.end(), 0.0);
    std::fill(p.b2.begin(), p.b2.end(), 0.0);
    std::fill(p.b3.begin(), p.b3.end(), 0.0);
    const auto f = random_frame(12, rng);
    for (double alpha : {0.5, 2.0, 7.3}) {
        auto scaled = f;
        for (auto& v : scaled) v *= alpha;
        CHECK(encode(p, scaled)[0] ==
              doctest::Approx(alpha * encode(p, f)[0]).epsilon(1e-12));
    }
}

TEST_CASE("backward: zero grad_z and last-layer bias identity") {
    std::mt19937_64 rng(21);
    const auto p = init_encoder(16, 8, 8, 2, 4);
    const auto f = random_frame(16, rng);

    const auto gz0 = encoder_backward(p, f, {0.0, 0.0});
    for (double v : gz0.w1) CHECK(v == 0.0);
    for (double v : gz0.b3) CHECK(v == 0.0);

    const std::vector<double> gz = {0.3, -1.2};
    const auto g = encoder_backward(p, f, gz);
    CHECK(g.b3[0] == gz[0]);
    CHECK(g.b3[1] == gz[1]);
}

TEST_CASE("gradient check: 20 random triples on a 16-8-8-2 net") {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double eps = 1e-4;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto p = init_encoder(16, 8, 8, 2, 1000 + trial);
        const auto frame = random_frame(16, rng);
        const std::vector<double> gz = {u(rng), u(rng)};
        const auto g = encoder_backward(p, frame, gz);

        auto check_tensor = [&](std::vector<double>& w, const std::vector<double>& gw) {
            for (std::size_t i = 0; i < w.size(); i += std::max<std::size_t>(1, w.size() / 13)) {
                const double keep = w[i];
                w[i] = keep + eps;
                const double fp = total_loss_proxy(p, frame, gz);
                w[i] = keep - eps;
                const double fm = total_loss_proxy(p, frame, gz);
                w[i] = keep;
                const double fd = (fp - fm) / (2 * eps);
                const double rel = std::abs(fd - gw[i]) /
                                   std::max({std::abs(fd), std::abs(gw[i]), 1e-8});
                worst = std::max(worst, rel);
            }
        };
        check_tensor(p.w1, g.w1);
        check_tensor(p.b1, g.b1);
        check_tensor(p.w2, g.w2);
        check_tensor(p.b2, g.b2);
        check_tensor(p.w3, g.w3);
        check_tensor(p.b3, g.b3);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("checkpoint round-trip and dim validation") {
    namespace fs = std::filesystem;
    const auto p = init_encoder(16, 8, 4, 2, 7);
    const auto path = (fs::temp_directory_path() / "latdyn_enc.bin").string();
    save_encoder(p, path);
    const auto q = load_encoder(path);
    CHECK(q.in_dim == p.in_dim);
    CHECK(q.w1 == p.w1);
    CHECK(q.b3 == p.b3);

    // corrupt the dims field
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        const std::int32_t bad = 999;
        f.write(reinterpret_cast<const char*>(&bad), sizeof(bad));
    }
    CHECK_THROWS_AS(load_encoder(path), std::runtime_error);
    fs::remove(path);
}

}  // TEST_SUITE
