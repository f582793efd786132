#include "binsr/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <vector>

#include "binsr/error.hpp"

namespace binsr::kernels {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvDims {
  int cin, h, w;
  int cout, kh, kw;
  int oh, ow;
  int stride, pad;
  int patch() const { return cin * kh * kw; }
  int pixels() const { return oh * ow; }
};

ConvDims make_dims(const Shape& in, const Shape& wt, const Shape& out, int stride, int pad) {
  return {in.c, in.h, in.w, wt.n, wt.h, wt.w, out.h, out.w, stride, pad};
}

float* scratch(int slot, std::size_t n);

// Zero-padded copy of one sample, cin x (h+2p) x (w+2p).
const float* pad_sample(const float* img, const ConvDims& d) {
  const int hp = d.h + 2 * d.pad, wp = d.w + 2 * d.pad;
  float* padded = scratch(2, static_cast<std::size_t>(d.cin) * hp * wp);
  if (d.pad == 0) return img;
  for (int ci = 0; ci < d.cin; ++ci) {
    float* plane = padded + static_cast<std::size_t>(ci) * hp * wp;
    std::fill(plane, plane + static_cast<std::size_t>(d.pad) * wp, 0.0f);
    std::fill(plane + static_cast<std::size_t>(d.pad + d.h) * wp, plane + static_cast<std::size_t>(hp) * wp,
              0.0f);
    for (int y = 0; y < d.h; ++y) {
      float* dst = plane + static_cast<std::size_t>(y + d.pad) * wp;
      std::fill(dst, dst + d.pad, 0.0f);
      std::copy_n(img + (static_cast<std::size_t>(ci) * d.h + y) * d.w, d.w, dst + d.pad);
      std::fill(dst + d.pad + d.w, dst + wp, 0.0f);
    }
  }
  return padded;
}

// cols is (cin*kh*kw) x ld, row-major, zero where the window hits padding; one
// sample fills oh*ow columns starting at `cols`.
void im2col(const float* img, const ConvDims& d, float* cols, std::size_t ld) {
  const float* padded = pad_sample(img, d);
  const int hp = d.h + 2 * d.pad, wp = d.w + 2 * d.pad;
  for (int ci = 0; ci < d.cin; ++ci) {
    const float* plane = padded + static_cast<std::size_t>(ci) * hp * wp;
    for (int i = 0; i < d.kh; ++i) {
      for (int j = 0; j < d.kw; ++j) {
        float* row = cols + static_cast<std::size_t>((ci * d.kh + i) * d.kw + j) * ld;
        for (int y = 0; y < d.oh; ++y) {
          float* dst = row + static_cast<std::size_t>(y) * d.ow;
          const float* src = plane + static_cast<std::size_t>(y * d.stride + i) * wp + j;
          if (d.stride == 1) {
            std::copy_n(src, d.ow, dst);
          } else {
            for (int x = 0; x < d.ow; ++x) dst[x] = src[x * d.stride];
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, const ConvDims& d, float* img, std::size_t ld) {
  const int hp = d.h + 2 * d.pad, wp = d.w + 2 * d.pad;
  float* padded = scratch(2, static_cast<std::size_t>(d.cin) * hp * wp);
  std::fill(padded, padded + static_cast<std::size_t>(d.cin) * hp * wp, 0.0f);
  for (int ci = 0; ci < d.cin; ++ci) {
    float* plane = padded + static_cast<std::size_t>(ci) * hp * wp;
    for (int i = 0; i < d.kh; ++i) {
      for (int j = 0; j < d.kw; ++j) {
        const float* row = cols + static_cast<std::size_t>((ci * d.kh + i) * d.kw + j) * ld;
        for (int y = 0; y < d.oh; ++y) {
          const float* src = row + static_cast<std::size_t>(y) * d.ow;
          float* dst = plane + static_cast<std::size_t>(y * d.stride + i) * wp + j;
          if (d.stride == 1) {
            for (int x = 0; x < d.ow; ++x) dst[x] += src[x];
          } else {
            for (int x = 0; x < d.ow; ++x) dst[x * d.stride] += src[x];
          }
        }
      }
    }
  }
  for (int ci = 0; ci < d.cin; ++ci)
    for (int y = 0; y < d.h; ++y) {
      const float* src = padded + (static_cast<std::size_t>(ci) * hp + y + d.pad) * wp + d.pad;
      float* dst = img + (static_cast<std::size_t>(ci) * d.h + y) * d.w;
      for (int x = 0; x < d.w; ++x) dst[x] += src[x];
    }
}

// Per-thread buffers reused across calls.
float* scratch(int slot, std::size_t n) {
  thread_local std::vector<float> buffers[3];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

void require_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ConfigError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace

Shape conv2d_output_shape(const Shape& in, const Shape& wt, int stride, int pad) {
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1, got " + std::to_string(stride));
  if (pad < 0) throw ConfigError("conv2d: pad must be >= 0, got " + std::to_string(pad));
  if (in.c != wt.c) {
    throw ConfigError("conv2d: input channels " + std::to_string(in.c) +
                      " != weight Cin " + std::to_string(wt.c) + " (input " + in.str() +
                      ", weight " + wt.str() + ")");
  }
  const int hp = in.h + 2 * pad - wt.h;
  const int wp = in.w + 2 * pad - wt.w;
  if (hp < 0 || wp < 0) {
    throw ConfigError("conv2d: kernel " + wt.str() + " larger than padded input " + in.str());
  }
  return {in.n, wt.n, hp / stride + 1, wp / stride + 1};
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor* bias, int stride,
                      int pad) {
  const Shape out_shape = conv2d_output_shape(input.shape(), weight.shape(), stride, pad);
  if (bias && bias->size() != static_cast<std::size_t>(weight.shape().n)) {
    throw ConfigError("conv2d: bias length " + std::to_string(bias->size()) + " != Cout " +
                      std::to_string(weight.shape().n));
  }
  const ConvDims d = make_dims(input.shape(), weight.shape(), out_shape, stride, pad);
  Tensor out(out_shape);
  const std::size_t pix = d.pixels();
  float* cols = scratch(0, static_cast<std::size_t>(d.patch()) * pix);
  const std::size_t in_stride = static_cast<std::size_t>(d.cin) * d.h * d.w;
  const std::size_t out_stride = static_cast<std::size_t>(d.cout) * pix;
  ConstMapMat wmat(weight.data().data(), d.cout, d.patch());
  ConstMapMat cmat(cols, d.patch(), pix);
  for (int n = 0; n < out_shape.n; ++n) {
    im2col(input.data().data() + n * in_stride, d, cols, pix);
    MapMat o(out.data().data() + n * out_stride, d.cout, pix);
    o.noalias() = wmat * cmat;
    if (bias) {
      for (int co = 0; co < d.cout; ++co) o.row(co).array() += (*bias)[co];
    }
  }
  return out;
}

void conv2d_backward_input(std::span<const float> grad_out, const Shape& out_shape,
                           const Tensor& weight, int stride, int pad, const Shape& in_shape,
                           std::span<float> grad_in) {
  const ConvDims d = make_dims(in_shape, weight.shape(), out_shape, stride, pad);
  const std::size_t pix = d.pixels();
  ConstMapMat wmat(weight.data().data(), d.cout, d.patch());
  MapMat cols(scratch(0, static_cast<std::size_t>(d.patch()) * pix), d.patch(), pix);
  const std::size_t in_stride = static_cast<std::size_t>(d.cin) * d.h * d.w;
  const std::size_t out_stride = static_cast<std::size_t>(d.cout) * pix;
  for (int n = 0; n < out_shape.n; ++n) {
    ConstMapMat g(grad_out.data() + n * out_stride, d.cout, pix);
    cols.noalias() = wmat.transpose() * g;
    col2im_add(cols.data(), d, grad_in.data() + n * in_stride, pix);
  }
}

void conv2d_backward_weight(const Tensor& input, std::span<const float> grad_out,
                            const Shape& out_shape, int stride, int pad, const Shape& w_shape,
                            std::span<float> grad_weight) {
  const ConvDims d = make_dims(input.shape(), w_shape, out_shape, stride, pad);
  const std::size_t pix = d.pixels();
  float* cols = scratch(0, static_cast<std::size_t>(d.patch()) * pix);
  ConstMapMat cmat(cols, d.patch(), pix);
  MapMat gw(grad_weight.data(), d.cout, d.patch());
  const std::size_t in_stride = static_cast<std::size_t>(d.cin) * d.h * d.w;
  const std::size_t out_stride = static_cast<std::size_t>(d.cout) * pix;
  for (int n = 0; n < out_shape.n; ++n) {
    im2col(input.data().data() + n * in_stride, d, cols, pix);
    ConstMapMat g(grad_out.data() + n * out_stride, d.cout, pix);
    gw.noalias() += g * cmat.transpose();
  }
}

void conv2d_backward_bias(std::span<const float> grad_out, const Shape& out_shape,
                          std::span<float> grad_bias) {
  const std::size_t plane = static_cast<std::size_t>(out_shape.h) * out_shape.w;
  for (int n = 0; n < out_shape.n; ++n) {
    for (int c = 0; c < out_shape.c; ++c) {
      const float* g = grad_out.data() + (static_cast<std::size_t>(n) * out_shape.c + c) * plane;
      float s = 0.0f;
      for (std::size_t i = 0; i < plane; ++i) s += g[i];
      grad_bias[c] += s;
    }
  }
}

Tensor pixel_shuffle(const Tensor& input, int r) {
  const Shape& s = input.shape();
  if (r < 1) throw ConfigError("pixel_shuffle: factor must be >= 1");
  if (s.c % (r * r) != 0) {
    throw ConfigError("pixel_shuffle: channels " + std::to_string(s.c) +
                      " not divisible by r^2 = " + std::to_string(r * r));
  }
  const int oc = s.c / (r * r);
  Tensor out({s.n, oc, s.h * r, s.w * r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < oc; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
          const int src_c = c * r * r + i * r + j;
          for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
              out.at(n, c, r * y + i, r * x + j) = input.at(n, src_c, y, x);
        }
  return out;
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
  const Shape& s = input.shape();
  if (r < 1 || s.h % r != 0 || s.w % r != 0) {
    throw ConfigError("pixel_unshuffle: spatial dims " + s.str() + " not divisible by " +
                      std::to_string(r));
  }
  Tensor out({s.n, s.c * r * r, s.h / r, s.w / r});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
          const int dst_c = c * r * r + i * r + j;
          for (int y = 0; y < s.h / r; ++y)
            for (int x = 0; x < s.w / r; ++x)
              out.at(n, dst_c, y, x) = input.at(n, c, r * y + i, r * x + j);
        }
  return out;
}

Tensor repeat_channels(const Tensor& input, int k) {
  if (k < 1) throw ConfigError("repeat_channels: k must be >= 1, got " + std::to_string(k));
  const Shape& s = input.shape();
  Tensor out({s.n, s.c * k, s.h, s.w});
  const std::size_t block = static_cast<std::size_t>(s.c) * s.h * s.w;
  for (int n = 0; n < s.n; ++n) {
    const float* src = input.data().data() + n * block;
    for (int t = 0; t < k; ++t) {
      std::memcpy(out.data().data() + (static_cast<std::size_t>(n) * k + t) * block, src,
                  block * sizeof(float));
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace binsr::kernels
