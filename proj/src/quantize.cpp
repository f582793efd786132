#include "binsr/quantize.hpp"

#include <cmath>
#include <string>

#include "binsr/error.hpp"
#include "binsr/kernels.hpp"

namespace binsr {

const char* quantizer_name(QuantizerKind q) {
  switch (q) {
    case QuantizerKind::SteClip: return "STE-clip";
    case QuantizerKind::BiRealPoly: return "BiReal-poly";
  }
  return "?";
}

QuantizerKind parse_quantizer(std::string_view name) {
  if (name == "STE-clip") return QuantizerKind::SteClip;
  if (name == "BiReal-poly") return QuantizerKind::BiRealPoly;
  throw ConfigError("unknown quantizer '" + std::string(name) + "' (expected STE-clip or BiReal-poly)");
}

float ste_derivative(float x) { return std::fabs(x) <= 1.0f ? 1.0f : 0.0f; }

float bireal_derivative(float x) {
  if (x >= -1.0f && x < 0.0f) return 2.0f + 2.0f * x;
  if (x >= 0.0f && x <= 1.0f) return 2.0f - 2.0f * x;
  return 0.0f;
}

float quantizer_derivative(QuantizerKind q, float x) {
  return q == QuantizerKind::SteClip ? ste_derivative(x) : bireal_derivative(x);
}

Tensor sign_forward(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sign_value(x[i]);
  return out;
}

namespace {

Tensor surrogate_backward(const Tensor& grad_out, const Tensor& x_saved, QuantizerKind q) {
  if (grad_out.shape() != x_saved.shape()) {
    throw ConfigError("quantizer backward: grad " + grad_out.shape().str() + " vs input " +
                      x_saved.shape().str());
  }
  Tensor g(x_saved.shape());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = grad_out[i] * quantizer_derivative(q, x_saved[i]);
  return g;
}

}  // namespace

Tensor ste_backward(const Tensor& grad_out, const Tensor& x_saved) {
  return surrogate_backward(grad_out, x_saved, QuantizerKind::SteClip);
}

Tensor bireal_backward(const Tensor& grad_out, const Tensor& x_saved) {
  return surrogate_backward(grad_out, x_saved, QuantizerKind::BiRealPoly);
}

BinWeights binarize_weights(const Tensor& latent) {
  const Shape s = latent.shape();
  BinWeights w{Tensor(s), std::vector<float>(s.n)};
  const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
  for (int co = 0; co < s.n; ++co) {
    double acc = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const float v = latent[co * per + i];
      acc += std::fabs(v);
      w.signs[co * per + i] = sign_value(v);
    }
    w.alpha[co] = per ? static_cast<float>(acc / static_cast<double>(per)) : 0.0f;
  }
  return w;
}

Tensor materialize(const BinWeights& w) {
  const Shape s = w.signs.shape();
  Tensor out(s);
  const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
  for (int co = 0; co < s.n; ++co)
    for (std::size_t i = 0; i < per; ++i) out[co * per + i] = w.alpha[co] * w.signs[co * per + i];
  return out;
}

namespace {

void scale_channels(Tensor& t, const std::vector<float>& alpha) {
  const Shape s = t.shape();
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      float* p = t.data().data() + t.index(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) p[i] *= alpha[c];
    }
}

}  // namespace

Tensor binconv_forward(const Tensor& x, const BinWeights& w, int stride, int pad) {
  Tensor out = kernels::conv2d_forward(x, w.signs, nullptr, stride, pad);
  scale_channels(out, w.alpha);
  return out;
}

namespace ops {

VarId sign(Tape& tape, VarId x, QuantizerKind q) {
  Tensor out = sign_forward(tape.value(x));
  return tape.record(OpKind::Sign, std::move(out), {x},
                     [&tape, x, q](std::span<const float> g, std::span<const std::span<float>> gi) {
                       if (gi[0].empty()) return;
                       const Tensor& xv = tape.value(x);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         gi[0][i] += g[i] * quantizer_derivative(q, xv[i]);
                     });
}

VarId binconv(Tape& tape, VarId x, VarId latent, int stride, int pad) {
  BinWeights bw = binarize_weights(tape.value(latent));
  Tensor out = binconv_forward(tape.value(x), bw, stride, pad);
  const Shape out_shape = out.shape();
  return tape.record(
      OpKind::BinConv, std::move(out), {x, latent},
      [&tape, x, bw = std::move(bw), stride, pad, out_shape](
          std::span<const float> g, std::span<const std::span<float>> gi) {
        // d(alpha * conv(x, S)) routes alpha into the upstream gradient.
        Tensor scaled(out_shape, std::vector<float>(g.begin(), g.end()));
        scale_channels(scaled, bw.alpha);
        const Tensor& xv = tape.value(x);
        if (!gi[0].empty())
          kernels::conv2d_backward_input(scaled.data(), out_shape, bw.signs, stride, pad,
                                         xv.shape(), gi[0]);
        if (!gi[1].empty())
          kernels::conv2d_backward_weight(xv, scaled.data(), out_shape, stride, pad,
                                          bw.signs.shape(), gi[1]);
      });
}

}  // namespace ops
}  // namespace binsr
