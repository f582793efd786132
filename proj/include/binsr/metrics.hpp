#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "binsr/image.hpp"

namespace binsr {

/// Returned by psnr() for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Single-channel images, `crop` border pixels removed from each side first.
/// 10 log10(255^2 / MSE). Throws ConfigError on size mismatch.
double psnr(const ImageF& a, const ImageF& b, int crop);

/// Mean SSIM over all 11x11 Gaussian windows (sigma 1.5) fully inside the
/// cropped image. C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2.
double ssim(const ImageF& a, const ImageF& b, int crop);

/// Normalized 11-tap Gaussian, sigma 1.5.
std::vector<double> ssim_window();

struct ImageMetrics {
  std::string image;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<ImageMetrics> images;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  void add(ImageMetrics m);
  /// "image,psnr,ssim" rows and a final "mean" row.
  void write_csv(std::ostream& os) const;
};

/// PSNR/SSIM of the Y planes of two RGB images of equal size.
ImageMetrics compare_y(const std::string& name, const ImageU8& pred, const ImageU8& target, int crop);

/// "inf" for the identical-image sentinel.
std::string format_psnr(double v);

}  // namespace binsr
