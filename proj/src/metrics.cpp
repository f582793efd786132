#include "binsr/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "binsr/error.hpp"

namespace binsr {

namespace {

void check_pair(const ImageF& a, const ImageF& b, int crop, const char* what) {
  if (a.channels != 1 || b.channels != 1) throw ConfigError(std::string(what) + ": expects single-channel planes");
  if (a.width != b.width || a.height != b.height) {
    throw ConfigError(std::string(what) + ": size mismatch " + std::to_string(a.width) + "x" +
                      std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                      std::to_string(b.height));
  }
  if (crop < 0 || 2 * crop >= a.width || 2 * crop >= a.height) {
    throw ConfigError(std::string(what) + ": crop " + std::to_string(crop) + " leaves no pixels");
  }
}

}  // namespace

double psnr(const ImageF& a, const ImageF& b, int crop) {
  check_pair(a, b, crop, "psnr");
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = crop; y < a.height - crop; ++y)
    for (int x = crop; x < a.width - crop; ++x) {
      const double d = a.at(0, y, x) - b.at(0, y, x);
      sum += d * d;
      ++count;
    }
  const double mse = sum / static_cast<double>(count);
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

std::vector<double> ssim_window() {
  constexpr int size = 11;
  constexpr double sigma = 1.5;
  std::vector<double> w(size);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - size / 2;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

double ssim(const ImageF& a, const ImageF& b, int crop) {
  check_pair(a, b, crop, "ssim");
  const std::vector<double> win = ssim_window();
  const int k = static_cast<int>(win.size());
  const int w = a.width - 2 * crop, h = a.height - 2 * crop;
  if (w < k || h < k) throw ConfigError("ssim: image smaller than the 11x11 window after crop");
  const int ow = w - k + 1, oh = h - k + 1;

  // Separable 'valid' filtering of a, b, a^2, b^2, ab.
  auto filter = [&](auto value) {
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += win[i] * value(y + crop, x + i + crop);
        rows[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (int i = 0; i < k; ++i) acc += win[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
        out[static_cast<std::size_t>(y) * ow + x] = acc;
      }
    return out;
  };
  const auto mu_a = filter([&](int y, int x) { return a.at(0, y, x); });
  const auto mu_b = filter([&](int y, int x) { return b.at(0, y, x); });
  const auto aa = filter([&](int y, int x) { return a.at(0, y, x) * a.at(0, y, x); });
  const auto bb = filter([&](int y, int x) { return b.at(0, y, x) * b.at(0, y, x); });
  const auto ab = filter([&](int y, int x) { return a.at(0, y, x) * b.at(0, y, x); });

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = aa[i] - ma * ma, vb = bb[i] - mb * mb, cov = ab[i] - ma * mb;
    sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

void MetricsReport::add(ImageMetrics m) {
  images.push_back(std::move(m));
  double p = 0.0, s = 0.0;
  for (const auto& i : images) {
    p += i.psnr;
    s += i.ssim;
  }
  mean_psnr = p / static_cast<double>(images.size());
  mean_ssim = s / static_cast<double>(images.size());
}

std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void MetricsReport::write_csv(std::ostream& os) const {
  char buf[32];
  os << "image,psnr,ssim\n";
  for (const auto& m : images) {
    std::snprintf(buf, sizeof buf, "%.6f", m.ssim);
    os << m.image << ',' << format_psnr(m.psnr) << ',' << buf << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.6f", mean_ssim);
  os << "mean," << format_psnr(mean_psnr) << ',' << buf << '\n';
}

ImageMetrics compare_y(const std::string& name, const ImageU8& pred, const ImageU8& target, int crop) {
  const ImageF yp = rgb_to_y(pred), yt = rgb_to_y(target);
  return {name, psnr(yp, yt, crop), ssim(yp, yt, crop)};
}

}  // namespace binsr
