#include "binsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "binsr/error.hpp"

namespace binsr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  ImageU8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": corrupt PNG data");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img = ImageU8(static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info)));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": unsupported PNG layout");
  }
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  if (img.width < 1 || img.height < 1) throw DataError("write_png: empty image");
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError(path.string() + ": PNG encoding failed");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageF to_float(const ImageU8& img) {
  ImageF out(img.width, img.height, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(x, y, c);
  return out;
}

ImageU8 to_u8(const ImageF& img) {
  if (img.channels != 3) throw ConfigError("to_u8: expected 3 channels");
  ImageU8 out(img.width, img.height);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::round(img.at(c, y, x)), 0.0, 255.0));
  return out;
}

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::fabs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

std::vector<ResizeTaps> resize_taps(int in_size, int out_size) {
  if (in_size < 1 || out_size < 1) throw ConfigError("resize: sizes must be >= 1");
  const double scale = static_cast<double>(out_size) / in_size;
  const double kscale = std::min(scale, 1.0);
  const double support = 2.0 / kscale;
  std::vector<ResizeTaps> taps(out_size);
  for (int x = 0; x < out_size; ++x) {
    const double centre = (x + 0.5) / scale - 0.5;
    const int first = static_cast<int>(std::floor(centre - support));
    const int last = static_cast<int>(std::ceil(centre + support));
    ResizeTaps& t = taps[x];
    double sum = 0.0;
    for (int j = first; j <= last; ++j) {
      const double w = kscale * cubic_kernel(kscale * (centre - j));
      if (w == 0.0) continue;
      t.index.push_back(std::clamp(j, 0, in_size - 1));
      t.weight.push_back(w);
      sum += w;
    }
    for (double& w : t.weight) w /= sum;
  }
  return taps;
}

ImageF bicubic_resize(const ImageF& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ConfigError("bicubic_resize: output dims must be >= 1");
  const auto tx = resize_taps(img.width, out_w);
  const auto ty = resize_taps(img.height, out_h);
  ImageF mid(out_w, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tx[x].index.size(); ++k) acc += tx[x].weight[k] * img.at(c, y, tx[x].index[k]);
        mid.at(c, y, x) = acc;
      }
  ImageF out(out_w, out_h, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ty[y].index.size(); ++k) acc += ty[y].weight[k] * mid.at(c, ty[y].index[k], x);
        out.at(c, y, x) = acc;
      }
  return out;
}

ImageF rgb_to_y(const ImageU8& img) {
  ImageF y(img.width, img.height, 1);
  for (int r = 0; r < img.height; ++r)
    for (int x = 0; x < img.width; ++x)
      y.at(0, r, x) = 16.0 + (65.481 * img.at(x, r, 0) + 128.553 * img.at(x, r, 1) +
                              24.966 * img.at(x, r, 2)) / 255.0;
  return y;
}

Tensor image_to_tensor(const ImageU8& img) {
  Tensor t({1, 3, img.height, img.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) t.at(0, c, y, x) = img.at(x, y, c) / 255.0f;
  return t;
}

ImageU8 tensor_to_image(const Tensor& t, int n) {
  const Shape s = t.shape();
  if (s.c != 3 || n < 0 || n >= s.n) throw ConfigError("tensor_to_image: expected (N, 3, H, W), got " + s.str());
  ImageU8 img(s.w, s.h);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        const float v = std::round(t.at(n, c, y, x) * 255.0f);
        img.at(x, y, c) = v >= 0.0f ? static_cast<std::uint8_t>(std::min(v, 255.0f)) : 0;
      }
  return img;
}

ImageU8 crop(const ImageU8& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > img.width || y0 + h > img.height) {
    throw ConfigError("crop window outside image");
  }
  ImageU8 out(w, h);
  for (int y = 0; y < h; ++y)
    std::copy_n(img.rgb.begin() + (static_cast<std::ptrdiff_t>(y0 + y) * img.width + x0) * 3, w * 3,
                out.rgb.begin() + static_cast<std::ptrdiff_t>(y) * w * 3);
  return out;
}

}  // namespace binsr
