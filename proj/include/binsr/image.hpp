#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "binsr/tensor.hpp"

namespace binsr {

/// Interleaved 8-bit RGB.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // size 3 * width * height

  ImageU8() = default;
  ImageU8(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h, 0) {}

  std::uint8_t& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

/// Real-valued planar image (channels x height x width).
struct ImageF {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  ImageF() = default;
  ImageF(int w, int h, int c) : width(w), height(h), channels(c),
                                data(static_cast<std::size_t>(c) * w * h, 0.0) {}

  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// Any PNG colour type is converted to 8-bit RGB. Throws DataError.
ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

ImageF to_float(const ImageU8& img);
/// Rounds half away from zero and clamps to [0, 255].
ImageU8 to_u8(const ImageF& img);

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Sampling taps for one output coordinate.
struct ResizeTaps {
  std::vector<int> index;  // clamped source indices
  std::vector<double> weight;  // normalized to sum 1
};

/// Per-output-coordinate taps along one axis. Downscaling widens the kernel by
/// 1/scale (antialiasing); output pixel centres map to (x + 0.5) / scale - 0.5.
std::vector<ResizeTaps> resize_taps(int in_size, int out_size);

/// Separable bicubic resize, width pass then height pass. Throws ConfigError on
/// non-positive output dims.
ImageF bicubic_resize(const ImageF& img, int out_w, int out_h);

/// BT.601 studio-range luma: 16 + (65.481 R + 128.553 G + 24.966 B) / 255.
ImageF rgb_to_y(const ImageU8& img);

/// (1, 3, H, W) tensor in [0, 1].
Tensor image_to_tensor(const ImageU8& img);
/// Sample n of a (N, 3, H, W) tensor scaled by 255, rounded and clamped.
ImageU8 tensor_to_image(const Tensor& t, int n = 0);

/// Copy of the w x h window at (x0, y0).
ImageU8 crop(const ImageU8& img, int x0, int y0, int w, int h);

}  // namespace binsr
