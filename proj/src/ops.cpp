#include "binsr/ops.hpp"

#include <cmath>
#include <vector>

#include "binsr/error.hpp"
#include "binsr/kernels.hpp"

namespace binsr::ops {

VarId conv2d(Tape& tape, VarId x, VarId weight, std::optional<VarId> bias, int stride, int pad) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  Tensor out = kernels::conv2d_forward(xv, wv, bias ? &tape.value(*bias) : nullptr, stride, pad);
  const Shape out_shape = out.shape();
  std::vector<VarId> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return tape.record(
      OpKind::Conv2d, std::move(out), std::move(inputs),
      [&tape, x, weight, stride, pad, out_shape, has_bias](std::span<const float> g,
                                                           std::span<const std::span<float>> gi) {
        const Tensor& xv = tape.value(x);
        const Tensor& wv = tape.value(weight);
        if (!gi[0].empty())
          kernels::conv2d_backward_input(g, out_shape, wv, stride, pad, xv.shape(), gi[0]);
        if (!gi[1].empty())
          kernels::conv2d_backward_weight(xv, g, out_shape, stride, pad, wv.shape(), gi[1]);
        if (has_bias && !gi[2].empty()) kernels::conv2d_backward_bias(g, out_shape, gi[2]);
      });
}

namespace {

void check_bn_params(const Shape& x, const Tensor& gamma, const Tensor& beta,
                     const Tensor& running_mean, const Tensor& running_var) {
  const auto c = static_cast<std::size_t>(x.c);
  if (gamma.size() != c || beta.size() != c) {
    throw ConfigError("batchnorm: gamma/beta length " + std::to_string(gamma.size()) + "/" +
                      std::to_string(beta.size()) + " != channels " + std::to_string(c));
  }
  if (running_mean.size() != c || running_var.size() != c) {
    throw ConfigError("batchnorm: running statistics not populated for " + std::to_string(c) +
                      " channels");
  }
}

}  // namespace

VarId batchnorm(Tape& tape, VarId x, VarId gamma, VarId beta, Tensor& running_mean,
                Tensor& running_var, BnMode mode, const BatchNormOptions& opts) {
  const Tensor& xv = tape.value(x);
  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  const Shape s = xv.shape();
  check_bn_params(s, gv, bv, running_mean, running_var);

  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t count = plane * s.n;
  std::vector<float> mean(s.c), inv_std(s.c);

  if (mode == BnMode::Train) {
    if (count < 2) throw ConfigError("batchnorm: train mode needs more than one value per channel");
    for (int c = 0; c < s.c; ++c) {
      // Per-plane float partials, combined in double.
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* p = xv.data().data() + xv.index(n, c, 0, 0);
        float part = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) part += p[i];
        sum += part;
      }
      const double mu = sum / static_cast<double>(count);
      const float muf = static_cast<float>(mu);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* p = xv.data().data() + xv.index(n, c, 0, 0);
        float part = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) {
          const float d = p[i] - muf;
          part += d * d;
        }
        sq += part;
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<float>(mu);
      inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + opts.eps));
      const double unbiased = sq / static_cast<double>(count - 1);
      running_mean[c] = opts.momentum * running_mean[c] + (1.0f - opts.momentum) * mean[c];
      running_var[c] = opts.momentum * running_var[c] +
                       (1.0f - opts.momentum) * static_cast<float>(unbiased);
    }
  } else {
    for (int c = 0; c < s.c; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = 1.0f / std::sqrt(running_var[c] + opts.eps);
    }
  }

  Tensor xhat(s);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = xv.index(n, c, 0, 0);
      const float* src = xv.data().data() + base;
      float* h = xhat.data().data() + base;
      float* o = out.data().data() + base;
      const float m = mean[c], k = inv_std[c], g = gv[c], b = bv[c];
      for (std::size_t i = 0; i < plane; ++i) {
        h[i] = (src[i] - m) * k;
        o[i] = g * h[i] + b;
      }
    }

  const bool batch_stats = mode == BnMode::Train;
  return tape.record(
      OpKind::BatchNorm, std::move(out), {x, gamma, beta},
      [&tape, gamma, xhat = std::move(xhat), inv_std = std::move(inv_std), s, plane, count,
       batch_stats](std::span<const float> g, std::span<const std::span<float>> gi) {
        const Tensor& gv = tape.value(gamma);
        for (int c = 0; c < s.c; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const std::size_t base = xhat.index(n, c, 0, 0);
            const float* gp = g.data() + base;
            const float* hp = xhat.data().data() + base;
            float pg = 0.0f, pgx = 0.0f;
            for (std::size_t i = 0; i < plane; ++i) {
              pg += gp[i];
              pgx += gp[i] * hp[i];
            }
            sum_g += pg;
            sum_gx += pgx;
          }
          if (!gi[1].empty()) gi[1][c] += static_cast<float>(sum_gx);
          if (!gi[2].empty()) gi[2][c] += static_cast<float>(sum_g);
          if (gi[0].empty()) continue;
          const float scale = gv[c] * inv_std[c];
          const double m = static_cast<double>(count);
          const float mean_g = batch_stats ? static_cast<float>(sum_g / m) : 0.0f;
          const float mean_gx = batch_stats ? static_cast<float>(sum_gx / m) : 0.0f;
          for (int n = 0; n < s.n; ++n) {
            const std::size_t base = xhat.index(n, c, 0, 0);
            const float* gp = g.data() + base;
            const float* hp = xhat.data().data() + base;
            float* dst = gi[0].data() + base;
            for (std::size_t i = 0; i < plane; ++i) dst[i] += scale * (gp[i] - mean_g - hp[i] * mean_gx);
          }
        }
      });
}

Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const Tensor& running_mean, const Tensor& running_var, float eps) {
  const Shape s = x.shape();
  check_bn_params(s, gamma, beta, running_mean, running_var);
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  Tensor out(s);
  for (int c = 0; c < s.c; ++c) {
    const float mean = running_mean[c];
    const float inv_std = 1.0f / std::sqrt(running_var[c] + eps);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = x.index(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i)
        out[base + i] = gamma[c] * ((x[base + i] - mean) * inv_std) + beta[c];
    }
  }
  return out;
}

VarId add(Tape& tape, VarId a, VarId b) {
  Tensor out = kernels::add(tape.value(a), tape.value(b));
  return tape.record(OpKind::Add, std::move(out), {a, b},
                     [](std::span<const float> g, std::span<const std::span<float>> gi) {
                       for (const auto& dst : gi) {
                         if (dst.empty()) continue;
                         for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                       }
                     });
}

VarId pixel_shuffle(Tape& tape, VarId x, int r) {
  Tensor out = kernels::pixel_shuffle(tape.value(x), r);
  const Shape out_shape = out.shape();
  return tape.record(OpKind::PixelShuffle, std::move(out), {x},
                     [r, out_shape](std::span<const float> g, std::span<const std::span<float>> gi) {
                       if (gi[0].empty()) return;
                       Tensor gt(out_shape, std::vector<float>(g.begin(), g.end()));
                       const Tensor back = kernels::pixel_unshuffle(gt, r);
                       for (std::size_t i = 0; i < back.size(); ++i) gi[0][i] += back[i];
                     });
}

VarId repeat_channels(Tape& tape, VarId x, int k) {
  Tensor out = kernels::repeat_channels(tape.value(x), k);
  const Shape in_shape = tape.value(x).shape();
  return tape.record(
      OpKind::RepeatChannels, std::move(out), {x},
      [k, in_shape](std::span<const float> g, std::span<const std::span<float>> gi) {
        if (gi[0].empty()) return;
        const std::size_t block = static_cast<std::size_t>(in_shape.c) * in_shape.h * in_shape.w;
        for (int n = 0; n < in_shape.n; ++n)
          for (int t = 0; t < k; ++t) {
            const float* src = g.data() + (static_cast<std::size_t>(n) * k + t) * block;
            float* dst = gi[0].data() + static_cast<std::size_t>(n) * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
      });
}

float l1_value(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ConfigError("l1_loss: shape mismatch " + pred.shape().str() + " vs " +
                      target.shape().str());
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred[i] - target[i]);
  return static_cast<float>(sum / static_cast<double>(pred.size()));
}

VarId l1_loss(Tape& tape, VarId pred, VarId target) {
  const float loss = l1_value(tape.value(pred), tape.value(target));
  return tape.record(
      OpKind::L1Loss, Tensor::scalar(loss), {pred, target},
      [&tape, pred, target](std::span<const float> g, std::span<const std::span<float>> gi) {
        const Tensor& p = tape.value(pred);
        const Tensor& t = tape.value(target);
        const float scale = g[0] / static_cast<float>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          const float d = p[i] - t[i];
          const float s = d > 0.0f ? scale : (d < 0.0f ? -scale : 0.0f);
          if (!gi[0].empty()) gi[0][i] += s;
          if (!gi[1].empty()) gi[1][i] -= s;
        }
      });
}

}  // namespace binsr::ops
