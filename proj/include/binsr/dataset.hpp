#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "binsr/image.hpp"

namespace binsr {

struct ImagePair {
  std::string name;
  ImageU8 hr;  // dims are multiples of scale
  ImageU8 lr;  // hr dims / scale
  int scale = 2;
};

struct Dataset {
  std::vector<ImagePair> pairs;
  std::vector<std::string> warnings;  // one per skipped file
};

/// Centre crop to the largest multiple of r in each dimension.
ImageU8 crop_to_multiple(const ImageU8& img, int r);
/// Bicubic 1/r downscale of an HR image whose dims are multiples of r.
ImageU8 bicubic_downscale(const ImageU8& hr, int r);
/// Bicubic r-times upscale, the reference baseline.
ImageU8 bicubic_upscale(const ImageU8& lr, int r);

ImagePair make_pair(std::string name, const ImageU8& hr, int r);

/// Every *.png in `hr_dir`, sorted by file name. Unreadable files are skipped
/// and reported in warnings. Throws DataError if the directory is missing.
Dataset make_pairs(const std::filesystem::path& hr_dir, int r);

/// Manifest: one "hr_path<TAB>lr_path" line per pair, relative to the
/// manifest's directory.
void write_manifest(const std::filesystem::path& manifest,
                    const std::vector<std::pair<std::string, std::string>>& entries);
Dataset load_manifest(const std::filesystem::path& manifest);

struct PatchOffset {
  int x = 0;  // LR coordinates; the HR tile starts at scale * (x, y)
  int y = 0;
};

/// Uniform LR tile origin. Throws ConfigError if the tile does not fit.
PatchOffset sample_offset(const ImagePair& pair, int lr_patch, std::mt19937_64& rng);

/// Fills (batch, 3, p, p) LR and (batch, 3, rp, rp) HR tensors in [0, 1] from
/// uniformly chosen pairs.
void sample_batch(const std::vector<ImagePair>& pairs, int batch, int lr_patch, std::mt19937_64& rng,
                  Tensor& lr, Tensor& hr);

/// Independent stream per (seed, worker).
std::mt19937_64 worker_rng(std::uint64_t seed, std::uint64_t worker);

/// Procedural test image: gradients, gratings, hard-edged shapes, light noise.
ImageU8 synthetic_image(int width, int height, std::mt19937_64& rng);
Dataset synthetic_dataset(int count, int size, int r, std::uint64_t seed, const std::string& prefix);

}  // namespace binsr
