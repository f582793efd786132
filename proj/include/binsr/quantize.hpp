#pragma once

#include <string_view>
#include <vector>

#include "binsr/tape.hpp"

namespace binsr {

/// Surrogate gradient used for the Sign function feeding a binarized conv.
enum class QuantizerKind {
  SteClip,     // 1{|x| <= 1}
  BiRealPoly,  // 2 + 2x on [-1, 0), 2 - 2x on [0, 1], 0 elsewhere
};

const char* quantizer_name(QuantizerKind q);
QuantizerKind parse_quantizer(std::string_view name);

/// sign(0) = +1.
inline float sign_value(float x) { return x >= 0.0f ? 1.0f : -1.0f; }

float ste_derivative(float x);
float bireal_derivative(float x);
float quantizer_derivative(QuantizerKind q, float x);

Tensor sign_forward(const Tensor& x);
Tensor ste_backward(const Tensor& grad_out, const Tensor& x_saved);
Tensor bireal_backward(const Tensor& grad_out, const Tensor& x_saved);

/// Sign planes plus one positive scale per output channel.
struct BinWeights {
  Tensor signs;              // (Cout, Cin, kh, kw), entries in {-1, +1}
  std::vector<float> alpha;  // mean |latent| over each output channel's filter
};

BinWeights binarize_weights(const Tensor& latent);
/// alpha[c] * signs[c], i.e. the effective dense weight.
Tensor materialize(const BinWeights& w);

/// Dense float binarized convolution: alpha[c] times the +-1 dot product.
/// `x` is expected to hold post-Sign activations.
Tensor binconv_forward(const Tensor& x, const BinWeights& w, int stride, int pad);

namespace ops {

/// Sign with the given surrogate backward.
VarId sign(Tape& tape, VarId x, QuantizerKind q);

/// Binarized conv over latent weights. Activation gradient is the dense conv
/// transpose with alpha*sign weights; the latent weight gradient is the
/// effective-weight gradient scaled by alpha (alpha held constant).
VarId binconv(Tape& tape, VarId x, VarId latent, int stride, int pad);

}  // namespace ops
}  // namespace binsr
