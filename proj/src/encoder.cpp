#include "latdyn/encoder.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace latdyn {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void fill_kaiming(std::vector<double>& w, int fan_in, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : w) v = dist(rng);
}

}  // namespace

EncoderParams init_encoder(int in_dim, int h1, int h2, int out_dim,
                           std::uint64_t seed) {
    require(in_dim >= 1 && h1 >= 1 && h2 >= 1 && out_dim >= 1,
            "encoder dims must be >= 1");
    EncoderParams p;
    p.in_dim = in_dim;
    p.h1 = h1;
    p.h2 = h2;
    p.out_dim = out_dim;
    p.w1.resize(static_cast<std::size_t>(h1) * in_dim);
    p.b1.assign(h1, 0.0);
    p.w2.resize(static_cast<std::size_t>(h2) * h1);
    p.b2.assign(h2, 0.0);
    p.w3.resize(static_cast<std::size_t>(out_dim) * h2);
    p.b3.assign(out_dim, 0.0);
    std::mt19937_64 rng(seed);
    fill_kaiming(p.w1, in_dim, rng);
    fill_kaiming(p.w2, h1, rng);
    fill_kaiming(p.w3, h2, rng);
    return p;
}

void encode_batch(const EncoderParams& p, const double* x, std::size_t rows,
                  EncoderActivations& acts, const simd::Kernels& k) {
    acts.rows = rows;
    acts.h1.assign(rows * p.h1, 0.0);
    acts.h2.assign(rows * p.h2, 0.0);
    acts.z.assign(rows * p.out_dim, 0.0);

    k.gemm_nt(rows, p.h1, p.in_dim, x, p.w1.data(), acts.h1.data());
    k.add_bias_rows(acts.h1.data(), rows, p.h1, p.b1.data());
    k.relu(acts.h1.data(), acts.h1.size());

    k.gemm_nt(rows, p.h2, p.h1, acts.h1.data(), p.w2.data(), acts.h2.data());
    k.add_bias_rows(acts.h2.data(), rows, p.h2, p.b2.data());
    k.relu(acts.h2.data(), acts.h2.size());

    k.gemm_nt(rows, p.out_dim, p.h2, acts.h2.data(), p.w3.data(), acts.z.data());
    k.add_bias_rows(acts.z.data(), rows, p.out_dim, p.b3.data());
}

std::vector<double> encode(const EncoderParams& p,
                           const std::vector<double>& frame) {
    require(static_cast<int>(frame.size()) == p.in_dim,
            "frame size does not match encoder input dim");
    EncoderActivations acts;
    encode_batch(p, frame.data(), 1, acts);
    return acts.z;
}

void EncoderGrads::match(const EncoderParams& p) {
    w1.assign(p.w1.size(), 0.0);
    b1.assign(p.b1.size(), 0.0);
    w2.assign(p.w2.size(), 0.0);
    b2.assign(p.b2.size(), 0.0);
    w3.assign(p.w3.size(), 0.0);
    b3.assign(p.b3.size(), 0.0);
}

void EncoderGrads::zero() {
    std::fill(w1.begin(), w1.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
    std::fill(w3.begin(), w3.end(), 0.0);
    std::fill(b3.begin(), b3.end(), 0.0);
}

void EncoderGrads::add(const EncoderGrads& o) {
    const simd::Kernels& k = simd::active_kernels();
    k.axpy(1.0, o.w1.data(), w1.data(), w1.size());
    k.axpy(1.0, o.b1.data(), b1.data(), b1.size());
    k.axpy(1.0, o.w2.data(), w2.data(), w2.size());
    k.axpy(1.0, o.b2.data(), b2.data(), b2.size());
    k.axpy(1.0, o.w3.data(), w3.data(), w3.size());
    k.axpy(1.0, o.b3.data(), b3.data(), b3.size());
}

void encoder_backward_rows(const EncoderParams& p, const double* x,
                           std::size_t rows, const double* h1,
                           const double* h2, const double* grad_z,
                           EncoderGrads& grads, double* g_h1, double* g_h2,
                           const simd::Kernels& k) {
    // output layer
    k.gemm_tn(p.out_dim, p.h2, rows, grad_z, h2, grads.w3.data());
    k.colsum_acc(grad_z, rows, p.out_dim, grads.b3.data());

    // into h2
    std::memset(g_h2, 0, rows * p.h2 * sizeof(double));
    k.gemm_nn(rows, p.h2, p.out_dim, grad_z, p.w3.data(), g_h2);
    k.relu_backward(h2, g_h2, rows * p.h2);

    k.gemm_tn(p.h2, p.h1, rows, g_h2, h1, grads.w2.data());
    k.colsum_acc(g_h2, rows, p.h2, grads.b2.data());

    // into h1
    std::memset(g_h1, 0, rows * p.h1 * sizeof(double));
    k.gemm_nn(rows, p.h1, p.h2, g_h2, p.w2.data(), g_h1);
    k.relu_backward(h1, g_h1, rows * p.h1);

    k.gemm_tn(p.h1, p.in_dim, rows, g_h1, x, grads.w1.data());
    k.colsum_acc(g_h1, rows, p.h1, grads.b1.data());
}

void encoder_backward_batch(const EncoderParams& p, const double* x,
                            std::size_t rows, const EncoderActivations& acts,
                            const double* grad_z, EncoderGrads& grads,
                            double* g_h1, double* g_h2,
                            const simd::Kernels& k) {
    require(acts.rows == rows, "activation/row mismatch");
    encoder_backward_rows(p, x, rows, acts.h1.data(), acts.h2.data(), grad_z,
                          grads, g_h1, g_h2, k);
}

EncoderGrads encoder_backward(const EncoderParams& p,
                              const std::vector<double>& frame,
                              const std::vector<double>& grad_z) {
    require(static_cast<int>(frame.size()) == p.in_dim,
            "frame size does not match encoder input dim");
    require(static_cast<int>(grad_z.size()) == p.out_dim,
            "grad_z size does not match encoder output dim");
    EncoderActivations acts;
    encode_batch(p, frame.data(), 1, acts);
    EncoderGrads g;
    g.match(p);
    std::vector<double> s1(p.h1), s2(p.h2);
    encoder_backward_batch(p, frame.data(), 1, acts, grad_z.data(), g,
                           s1.data(), s2.data());
    return g;
}

// ---------------------------------------------------------------------------
// checkpoint IO
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'L', 'D', 'E', 'N', 'C', '0', '0', '1'};

void write_block(std::ofstream& f, const std::vector<double>& v) {
    const std::uint64_t n = v.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

std::vector<double> read_block(std::ifstream& f) {
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<double> v(n);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("truncated encoder checkpoint");
    return v;
}

}  // namespace

void save_encoder(const EncoderParams& p, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(kMagic, sizeof(kMagic));
    const std::int32_t dims[4] = {p.in_dim, p.h1, p.h2, p.out_dim};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    write_block(f, p.w1);
    write_block(f, p.b1);
    write_block(f, p.w2);
    write_block(f, p.b2);
    write_block(f, p.w3);
    write_block(f, p.b3);
    if (!f) throw std::runtime_error("write failed: " + path);
}

EncoderParams load_encoder(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw std::runtime_error("bad encoder checkpoint format: " + path);
    std::int32_t dims[4];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    EncoderParams p;
    p.in_dim = dims[0];
    p.h1 = dims[1];
    p.h2 = dims[2];
    p.out_dim = dims[3];
    p.w1 = read_block(f);
    p.b1 = read_block(f);
    p.w2 = read_block(f);
    p.b2 = read_block(f);
    p.w3 = read_block(f);
    p.b3 = read_block(f);
    if (p.w1.size() != static_cast<std::size_t>(p.h1) * p.in_dim ||
        p.w2.size() != static_cast<std::size_t>(p.h2) * p.h1 ||
        p.w3.size() != static_cast<std::size_t>(p.out_dim) * p.h2)
        throw std::runtime_error("inconsistent encoder checkpoint dims: " + path);
    return p;
}

}  // namespace latdyn
