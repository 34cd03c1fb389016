#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latdyn/kernels.hpp"

// The frame encoder: a 3-layer MLP, relu on the hidden layers, linear
// output (the latent must range over the prior, negatives included).
// Weights row-major (out x in).

namespace latdyn {

struct EncoderParams {
    int in_dim = 0, h1 = 0, h2 = 0, out_dim = 0;
    std::vector<double> w1, b1, w2, b2, w3, b3;

    std::size_t weight_count() const {
        return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
    }
};

/// Kaiming/He fan-in init: W ~ N(0, 2/fan_in), biases zero.
EncoderParams init_encoder(int in_dim, int h1, int h2, int out_dim,
                           std::uint64_t seed);

std::vector<double> encode(const EncoderParams& p,
                           const std::vector<double>& frame);

// Batch forward keeps the hidden activations for the backward pass.
struct EncoderActivations {
    std::size_t rows = 0;
    std::vector<double> h1, h2, z;
};

void encode_batch(const EncoderParams& p, const double* x, std::size_t rows,
                  EncoderActivations& acts,
                  const simd::Kernels& k = simd::active_kernels());

struct EncoderGrads {
    std::vector<double> w1, b1, w2, b2, w3, b3;

    void match(const EncoderParams& p);
    void zero();
    void add(const EncoderGrads& other);
};

/// Reverse-mode gradients of sum_i z_i . grad_z_i over a batch, accumulated
/// into grads. h1/h2 are the forward activations for these rows; g_h1/g_h2
/// are caller-owned scratch of at least rows*h1 / rows*h2 doubles.
void encoder_backward_rows(const EncoderParams& p, const double* x,
                           std::size_t rows, const double* h1,
                           const double* h2, const double* grad_z,
                           EncoderGrads& grads, double* g_h1, double* g_h2,
                           const simd::Kernels& k = simd::active_kernels());

void encoder_backward_batch(const EncoderParams& p, const double* x,
                            std::size_t rows, const EncoderActivations& acts,
                            const double* grad_z, EncoderGrads& grads,
                            double* g_h1, double* g_h2,
                            const simd::Kernels& k = simd::active_kernels());

/// Single-frame convenience wrapper around the batch path.
EncoderGrads encoder_backward(const EncoderParams& p,
                              const std::vector<double>& frame,
                              const std::vector<double>& grad_z);

// Versioned binary checkpoint of dims + weights.
void save_encoder(const EncoderParams& p, const std::string& path);
EncoderParams load_encoder(const std::string& path);

}  // namespace latdyn
