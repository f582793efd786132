#include "binsr/bitplane.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "binsr/error.hpp"

namespace binsr {

namespace {

Word tail_mask(int channels, int word) {
  const int remaining = channels - word * kWordBits;
  if (remaining >= kWordBits) return ~Word{0};
  return (Word{1} << remaining) - 1;
}

}  // namespace

BitPlane pack_bits(const Tensor& x, int pad) {
  if (pad < 0) throw ConfigError("pack_bits: pad must be >= 0");
  const Shape s = x.shape();
  BitPlane p;
  p.samples = s.n;
  p.channels = s.c;
  p.height = s.h;
  p.width = s.w;
  p.pad = pad;
  p.words_per_pos = words_for(s.c);
  const std::size_t total =
      static_cast<std::size_t>(s.n) * p.padded_h() * p.padded_w() * p.words_per_pos;
  p.bits.assign(total, 0);
  p.valid.assign(total, 0);

  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.h; ++y)
      for (int xx = 0; xx < s.w; ++xx) {
        Word* valid = p.valid.data() + p.offset(n, y + pad, xx + pad);
        for (int wd = 0; wd < p.words_per_pos; ++wd) valid[wd] = tail_mask(s.c, wd);
      }
    for (int c = 0; c < s.c; ++c) {
      const float* src = x.data().data() + (static_cast<std::size_t>(n) * s.c + c) * s.h * s.w;
      const Word bit = Word{1} << (c % kWordBits);
      for (int y = 0; y < s.h; ++y) {
        Word* row = p.bits.data() + p.offset(n, y + pad, pad) + c / kWordBits;
        const float* line = src + static_cast<std::size_t>(y) * s.w;
        bool bad = false;
        for (int xx = 0; xx < s.w; ++xx) {
          const float v = line[xx];
          row[static_cast<std::size_t>(xx) * p.words_per_pos] |= bit & (Word{0} - Word{v == 1.0f});
          bad |= (v != 1.0f) & (v != -1.0f);
        }
        if (bad) {
          const int xx = static_cast<int>(
              std::find_if(line, line + s.w, [](float v) { return v != 1.0f && v != -1.0f; }) - line);
          throw DataError("pack_bits: non-binary value " + std::to_string(line[xx]) + " at index (" +
                          std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(y) + ", " +
                          std::to_string(xx) + ")");
        }
      }
    }
  }
  return p;
}

Tensor unpack_bits(const BitPlane& p) {
  Tensor out({p.samples, p.channels, p.height, p.width});
  for (int n = 0; n < p.samples; ++n)
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const Word* bits = p.bits.data() + p.offset(n, y + p.pad, x + p.pad);
        for (int c = 0; c < p.channels; ++c)
          out.at(n, c, y, x) = ((bits[c / kWordBits] >> (c % kWordBits)) & 1u) ? 1.0f : -1.0f;
      }
  return out;
}

PackedWeights pack_weights(const BinWeights& w) {
  const Shape s = w.signs.shape();
  PackedWeights p;
  p.cout = s.n;
  p.cin = s.c;
  p.kh = s.h;
  p.kw = s.w;
  p.words_per_pos = words_for(s.c);
  p.alpha = w.alpha;
  p.bits.assign(static_cast<std::size_t>(s.n) * s.h * s.w * p.words_per_pos, 0);
  for (int co = 0; co < s.n; ++co)
    for (int i = 0; i < s.h; ++i)
      for (int j = 0; j < s.w; ++j) {
        Word* dst =
            p.bits.data() + ((static_cast<std::size_t>(co) * s.h + i) * s.w + j) * p.words_per_pos;
        for (int c = 0; c < s.c; ++c)
          if (w.signs.at(co, c, i, j) > 0.0f) dst[c / kWordBits] |= Word{1} << (c % kWordBits);
      }
  return p;
}

namespace {

struct ConvGeom {
  int oh = 0, ow = 0;
};

ConvGeom check_geometry(const BitPlane& x, const PackedWeights& w, int stride, int pad) {
  if (stride < 1) throw ConfigError("xnor_conv: stride must be >= 1");
  if (x.pad != pad) {
    throw ConfigError("xnor_conv: plane packed with pad " + std::to_string(x.pad) +
                      " but conv requests pad " + std::to_string(pad));
  }
  if (x.channels != w.cin) {
    throw ConfigError("xnor_conv: input channels " + std::to_string(x.channels) +
                      " != weight Cin " + std::to_string(w.cin));
  }
  if (x.padded_h() < w.kh || x.padded_w() < w.kw) {
    throw ConfigError("xnor_conv: kernel larger than padded input");
  }
  return {(x.padded_h() - w.kh) / stride + 1, (x.padded_w() - w.kw) / stride + 1};
}

template <std::size_t W, class Emit>
void interior_rows(const Word* xwin, const PackedWeights& w, int n_valid, std::size_t idx, std::size_t co_stride,
                   Emit& emit) {
  for (int co = 0; co < w.cout; ++co) {
    const Word* f = w.filter(co);
    int m = 0;
    for (std::size_t k = 0; k < W; ++k) m += std::popcount(xwin[k] ^ f[k]);
    emit(idx + co * co_stride, co, n_valid - 2 * m);
  }
}

// emit(flat NCHW index, output channel, integer dot) for every output;
// n_valid_out gets the per-position valid count, shared by all samples.
template <class Emit>
void xnor_core(const BitPlane& x, const PackedWeights& w, int stride, ConvGeom g, std::vector<int>& n_valid_out,
               Emit emit) {
  const int pad = x.pad, oh = g.oh, ow = g.ow;
  const int wpp = x.words_per_pos;
  const int taps = w.kh * w.kw;
  const std::size_t window = static_cast<std::size_t>(taps) * wpp;
  const std::size_t co_stride = static_cast<std::size_t>(oh) * ow;
  n_valid_out.assign(co_stride, 0);

  std::vector<Word> xwin(window), mwin(window);
  const int full_valid = taps * x.channels;
  for (int n = 0; n < x.samples; ++n)
    for (int y = 0; y < oh; ++y) {
      const int py = y * stride;
      const bool row_inside = py >= pad && py + w.kh <= pad + x.height;
      for (int xx = 0; xx < ow; ++xx) {
        const int px = xx * stride;
        // Interior windows skip the validity mask.
        const bool inside = row_inside && px >= pad && px + w.kw <= pad + x.width;
        std::size_t t = 0;
        for (int i = 0; i < w.kh; ++i) {
          const std::size_t off = x.offset(n, py + i, px);
          const std::size_t len = static_cast<std::size_t>(w.kw) * wpp;
          std::copy_n(x.bits.data() + off, len, xwin.data() + t);
          if (!inside) std::copy_n(x.valid.data() + off, len, mwin.data() + t);
          t += len;
        }
        int n_valid = full_valid;
        if (!inside) {
          n_valid = 0;
          for (std::size_t k = 0; k < window; ++k) n_valid += std::popcount(mwin[k]);
        }
        n_valid_out[static_cast<std::size_t>(y) * ow + xx] = n_valid;

        const std::size_t idx = (static_cast<std::size_t>(n) * w.cout * oh + y) * ow + xx;
        if (inside) {
          switch (window) {
            case 1: interior_rows<1>(xwin.data(), w, n_valid, idx, co_stride, emit); break;
            case 9: interior_rows<9>(xwin.data(), w, n_valid, idx, co_stride, emit); break;
            case 18: interior_rows<18>(xwin.data(), w, n_valid, idx, co_stride, emit); break;
            case 25: interior_rows<25>(xwin.data(), w, n_valid, idx, co_stride, emit); break;
            default:
              for (int co = 0; co < w.cout; ++co) {
                const Word* f = w.filter(co);
                int m = 0;
                for (std::size_t k = 0; k < window; ++k) m += std::popcount(xwin[k] ^ f[k]);
                emit(idx + co * co_stride, co, n_valid - 2 * m);
              }
          }
        } else {
          for (int co = 0; co < w.cout; ++co) {
            const Word* f = w.filter(co);
            int m = 0;
            for (std::size_t k = 0; k < window; ++k) m += std::popcount((xwin[k] ^ f[k]) & mwin[k]);
            emit(idx + co * co_stride, co, n_valid - 2 * m);
          }
        }
      }
    }
}

}  // namespace

XnorDots xnor_conv_dots(const BitPlane& x, const PackedWeights& w, int stride, int pad) {
  const ConvGeom g = check_geometry(x, w, stride, pad);
  XnorDots r;
  r.shape = {x.samples, w.cout, g.oh, g.ow};
  r.dot.resize(r.shape.numel());
  int* dot = r.dot.data();
  xnor_core(x, w, stride, g, r.n_valid, [dot](std::size_t i, int, int d) { dot[i] = d; });
  return r;
}

Tensor xnor_conv(const BitPlane& x, const PackedWeights& w, int stride, int pad) {
  const ConvGeom g = check_geometry(x, w, stride, pad);
  Tensor out({x.samples, w.cout, g.oh, g.ow});
  float* o = out.data().data();
  const float* alpha = w.alpha.data();
  std::vector<int> n_valid;
  xnor_core(x, w, stride, g, n_valid,
            [o, alpha](std::size_t i, int co, int d) { o[i] = static_cast<float>(d) * alpha[co]; });
  return out;
}

}  // namespace binsr
