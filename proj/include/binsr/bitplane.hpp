#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "binsr/quantize.hpp"
#include "binsr/tensor.hpp"

namespace binsr {

/// Native machine word used for packing. Channel c of a spatial position lives
/// in word c / 64 at bit c % 64 (LSB-first); bit 1 encodes +1, bit 0 encodes -1.
using Word = std::uint64_t;
inline constexpr int kWordBits = 64;
static_assert(sizeof(Word) * 8 == kWordBits);

inline int words_for(int channels) { return (channels + kWordBits - 1) / kWordBits; }

/// Channel-packed {-1, +1} activations over a zero-padded spatial grid.
/// `valid` has the same layout as `bits`: a set bit marks a real channel at an
/// in-image position; padding positions and tail bits past `channels` are 0.
struct BitPlane {
  int samples = 0;
  int channels = 0;
  int height = 0;  // logical, unpadded
  int width = 0;
  int pad = 0;
  int words_per_pos = 0;
  std::vector<Word> bits;
  std::vector<Word> valid;

  int padded_h() const { return height + 2 * pad; }
  int padded_w() const { return width + 2 * pad; }
  std::size_t offset(int n, int py, int px) const {
    return ((static_cast<std::size_t>(n) * padded_h() + py) * padded_w() + px) * words_per_pos;
  }
};

/// Throws DataError naming the first element that is not exactly -1 or +1.
BitPlane pack_bits(const Tensor& x, int pad);
/// Reconstructs the unpadded +-1 tensor.
Tensor unpack_bits(const BitPlane& plane);

struct PackedWeights {
  int cout = 0;
  int cin = 0;
  int kh = 0;
  int kw = 0;
  int words_per_pos = 0;
  std::vector<Word> bits;  // [co][i][j][word]
  std::vector<float> alpha;

  const Word* filter(int co) const {
    return bits.data() + static_cast<std::size_t>(co) * kh * kw * words_per_pos;
  }
};

PackedWeights pack_weights(const BinWeights& w);

/// Integer output of the packed kernel before alpha scaling.
struct XnorDots {
  Shape shape;                      // (N, Cout, OH, OW)
  std::vector<std::int32_t> dot;    // n_valid - 2 * mismatches
  std::vector<std::int32_t> n_valid;  // per (OH, OW): in-image taps * Cin
};

XnorDots xnor_conv_dots(const BitPlane& x, const PackedWeights& w, int stride, int pad);

/// alpha[co] * dot, equal to binconv_forward under zero padding.
Tensor xnor_conv(const BitPlane& x, const PackedWeights& w, int stride, int pad);

}  // namespace binsr
