#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "binsr/dataset.hpp"
#include "binsr/model_zoo.hpp"
#include "binsr/train_config.hpp"

// Library side of the command-line tool. Every function validates its inputs
// before touching the disk and reports failures through binsr::Error.
namespace binsr::cmd {

struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
};

/// {"preset": "desk"|"reference", "network": {...}, "train": {...}}; every
/// key optional. Throws ConfigError (DataError if unreadable).
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_preset(const std::string& name);
nlohmann::json to_json(const RunConfig& rc);

/// Optional command-line overrides applied on top of a RunConfig.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> iters;
  std::optional<int> batch;
  std::optional<int> patch;
  std::optional<double> lr;
  std::optional<int> blocks;
  std::optional<int> channels;
  std::optional<int> scale;
  std::optional<std::string> block;
  std::optional<std::string> tail;
  std::optional<std::string> cutoff;  // "none", "tail" or an index
  std::optional<std::string> quantizer;
  std::optional<bool> full_precision;

  void apply(RunConfig& rc) const;
};

Cutoff parse_cutoff(const std::string& s);

struct PrepareSummary {
  std::size_t pairs = 0;
  std::vector<std::string> warnings;
  std::filesystem::path manifest;
};
PrepareSummary prepare(const std::filesystem::path& hr_dir, const std::filesystem::path& out_dir, int scale);

/// Desk data: 16 synthetic 128x128 training images and 4 validation images.
Dataset desk_train_data(int scale);
Dataset desk_val_data(int scale);

struct TrainArgs {
  RunConfig config;
  std::optional<std::filesystem::path> data;  // manifest; synthetic desk data if absent
  std::optional<std::filesystem::path> val;
  std::optional<std::filesystem::path> resume;
  std::filesystem::path out;
};
/// Writes config.json, train.log, checkpoints and model.e2fc under args.out.
int train(const TrainArgs& args, std::ostream& out);

int eval(const std::filesystem::path& ckpt, const std::optional<std::filesystem::path>& data,
         const std::optional<std::filesystem::path>& csv, bool packed, std::ostream& out);

int infer(const std::filesystem::path& ckpt, const std::filesystem::path& lr_png,
          const std::filesystem::path& out_png, bool packed);

struct AblationArgs {
  RunConfig base;
  int seeds = 3;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> val;
  std::filesystem::path out;
  std::vector<std::string> positions;  // cutoff only; default 0, mid, last, tail
  std::ostream* progress = nullptr;
};

struct AblationRow {
  std::string label;
  std::size_t params = 0;
  std::vector<double> psnr;  // one per seed
  std::vector<double> ssim;
  double median_psnr = 0.0;
  double median_ssim = 0.0;
};

struct AblationResult {
  std::string kind;  // blocks | tails | cutoff
  std::vector<AblationRow> rows;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;
  double seconds = 0.0;

  const AblationRow& row(const std::string& label) const;
  void write_csv(std::ostream& os) const;
};

AblationResult ablate_blocks(const AblationArgs& args);
AblationResult ablate_tails(const AblationArgs& args);
AblationResult ablate_cutoff(const AblationArgs& args);

struct BenchReport {
  int channels = 0, hw = 0, kernel = 0, iters = 0;
  double dense_ms = 0.0;   // per call
  double packed_ms = 0.0;  // per call, activation packing included
  double speedup = 0.0;
  int n_valid_min = 0, n_valid_max = 0;
  bool equal = false;
};
/// Throws NumericError when the packed and dense outputs differ.
BenchReport bench_packed(int channels, int hw, int kernel, int iters, std::uint64_t seed = 1);
void print_bench(const BenchReport& r, std::ostream& out);

int analyze(const NetworkConfig& cfg, bool dump, std::ostream& out);

}  // namespace binsr::cmd
