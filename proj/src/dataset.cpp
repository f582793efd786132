#include "binsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "binsr/error.hpp"

namespace binsr {

namespace fs = std::filesystem;

ImageU8 crop_to_multiple(const ImageU8& img, int r) {
  if (r < 1) throw ConfigError("scale must be >= 1");
  const int w = img.width / r * r, h = img.height / r * r;
  if (w == 0 || h == 0) throw DataError("image smaller than the scale factor");
  return crop(img, (img.width - w) / 2, (img.height - h) / 2, w, h);
}

ImageU8 bicubic_downscale(const ImageU8& hr, int r) {
  if (hr.width % r != 0 || hr.height % r != 0) {
    throw ConfigError("bicubic_downscale: dims not divisible by scale");
  }
  return to_u8(bicubic_resize(to_float(hr), hr.width / r, hr.height / r));
}

ImageU8 bicubic_upscale(const ImageU8& lr, int r) {
  return to_u8(bicubic_resize(to_float(lr), lr.width * r, lr.height * r));
}

ImagePair make_pair(std::string name, const ImageU8& hr, int r) {
  ImagePair p;
  p.name = std::move(name);
  p.scale = r;
  p.hr = crop_to_multiple(hr, r);
  p.lr = bicubic_downscale(p.hr, r);
  return p;
}

Dataset make_pairs(const fs::path& hr_dir, int r) {
  if (!fs::is_directory(hr_dir)) throw DataError("not a directory: " + hr_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(hr_dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Dataset d;
  if (files.empty()) d.warnings.push_back("no PNG files in " + hr_dir.string());
  for (const auto& f : files) {
    try {
      d.pairs.push_back(make_pair(f.stem().string(), read_png(f), r));
    } catch (const DataError& e) {
      d.warnings.push_back(std::string("skipped: ") + e.what());
    }
  }
  return d;
}

void write_manifest(const fs::path& manifest,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw DataError("cannot write " + manifest.string());
  for (const auto& [hr, lr] : entries) out << hr << '\t' << lr << '\n';
  if (!out) throw DataError("write failed: " + manifest.string());
}

Dataset load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot read manifest " + manifest.string());
  const fs::path base = manifest.parent_path();
  Dataset d;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(manifest.string() + ":" + std::to_string(lineno) + ": expected <hr>\\t<lr>");
    }
    const fs::path hr_path = base / line.substr(0, tab);
    const fs::path lr_path = base / line.substr(tab + 1);
    ImagePair p;
    p.name = hr_path.stem().string();
    p.hr = read_png(hr_path);
    p.lr = read_png(lr_path);
    if (p.lr.width == 0 || p.hr.width % p.lr.width != 0 || p.hr.height % p.lr.height != 0 ||
        p.hr.width / p.lr.width != p.hr.height / p.lr.height) {
      throw DataError(manifest.string() + ":" + std::to_string(lineno) + ": HR/LR sizes are not an integer scale apart");
    }
    p.scale = p.hr.width / p.lr.width;
    if (!d.pairs.empty() && d.pairs.front().scale != p.scale) {
      throw DataError(manifest.string() + ": mixed scales in one manifest");
    }
    d.pairs.push_back(std::move(p));
  }
  return d;
}

PatchOffset sample_offset(const ImagePair& pair, int lr_patch, std::mt19937_64& rng) {
  if (lr_patch < 1 || lr_patch > pair.lr.width || lr_patch > pair.lr.height) {
    throw ConfigError("patch " + std::to_string(lr_patch) + " does not fit LR image " +
                      std::to_string(pair.lr.width) + "x" + std::to_string(pair.lr.height) + " (" +
                      pair.name + ")");
  }
  std::uniform_int_distribution<int> dx(0, pair.lr.width - lr_patch);
  std::uniform_int_distribution<int> dy(0, pair.lr.height - lr_patch);
  PatchOffset o;
  o.x = dx(rng);
  o.y = dy(rng);
  return o;
}

void sample_batch(const std::vector<ImagePair>& pairs, int batch, int lr_patch, std::mt19937_64& rng,
                  Tensor& lr, Tensor& hr) {
  if (pairs.empty()) throw DataError("cannot sample from an empty dataset");
  const int r = pairs.front().scale;
  const int hp = lr_patch * r;
  lr = Tensor({batch, 3, lr_patch, lr_patch});
  hr = Tensor({batch, 3, hp, hp});
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  for (int b = 0; b < batch; ++b) {
    const ImagePair& p = pairs[pick(rng)];
    const PatchOffset o = sample_offset(p, lr_patch, rng);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < lr_patch; ++y)
        for (int x = 0; x < lr_patch; ++x) lr.at(b, c, y, x) = p.lr.at(o.x + x, o.y + y, c) / 255.0f;
      for (int y = 0; y < hp; ++y)
        for (int x = 0; x < hp; ++x)
          hr.at(b, c, y, x) = p.hr.at(r * o.x + x, r * o.y + y, c) / 255.0f;
    }
  }
}

std::mt19937_64 worker_rng(std::uint64_t seed, std::uint64_t worker) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(worker), static_cast<std::uint32_t>(worker >> 32)};
  return std::mt19937_64(seq);
}

ImageU8 synthetic_image(int width, int height, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageF img(width, height, 3);
  const double pi = std::numbers::pi;

  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 40.0 + 150.0 * u(rng);
    gx[c] = (u(rng) - 0.5) * 120.0;
    gy[c] = (u(rng) - 0.5) * 120.0;
  }
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        img.at(c, y, x) = base[c] + gx[c] * x / width + gy[c] * y / height;

  const int gratings = 1 + static_cast<int>(u(rng) * 2.0);
  for (int g = 0; g < gratings; ++g) {
    const double theta = u(rng) * pi;
    const double period = 3.0 + u(rng) * 14.0;
    const double amp = 20.0 + u(rng) * 40.0;
    const double phase = u(rng) * 2.0 * pi;
    double tint[3];
    for (double& t : tint) t = 0.4 + 0.6 * u(rng);
    // Confined to a random rectangle.
    const int x0 = static_cast<int>(u(rng) * width * 0.5), y0 = static_cast<int>(u(rng) * height * 0.5);
    const int x1 = x0 + static_cast<int>((0.3 + 0.5 * u(rng)) * width);
    const int y1 = y0 + static_cast<int>((0.3 + 0.5 * u(rng)) * height);
    for (int y = y0; y < std::min(y1, height); ++y)
      for (int x = x0; x < std::min(x1, width); ++x) {
        const double v = amp * std::sin(2.0 * pi * (x * std::cos(theta) + y * std::sin(theta)) / period + phase);
        for (int c = 0; c < 3; ++c) img.at(c, y, x) += tint[c] * v;
      }
  }

  const int shapes = 3 + static_cast<int>(u(rng) * 5.0);
  for (int s = 0; s < shapes; ++s) {
    double color[3];
    for (double& v : color) v = u(rng) * 255.0;
    const double cx = u(rng) * width, cy = u(rng) * height;
    const double rx = 4.0 + u(rng) * width * 0.25, ry = 4.0 + u(rng) * height * 0.25;
    const bool disc = u(rng) < 0.5;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::fabs(dx) <= 1.0 && std::fabs(dy) <= 1.0;
        if (inside)
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
      }
  }

  std::normal_distribution<double> noise(0.0, 2.0);
  for (double& v : img.data) v += noise(rng);
  return to_u8(img);
}

Dataset synthetic_dataset(int count, int size, int r, std::uint64_t seed, const std::string& prefix) {
  Dataset d;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng = worker_rng(seed, static_cast<std::uint64_t>(i));
    std::ostringstream name;
    name << prefix << (i < 10 ? "0" : "") << i;
    d.pairs.push_back(make_pair(name.str(), synthetic_image(size, size, rng), r));
  }
  return d;
}

}  // namespace binsr
