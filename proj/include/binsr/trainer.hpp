#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "binsr/checkpoint.hpp"
#include "binsr/dataset.hpp"
#include "binsr/metrics.hpp"
#include "binsr/model_zoo.hpp"
#include "binsr/train_config.hpp"

namespace binsr {

struct LogEntry {
  int epoch = 0;  // 0-based
  int iter = 0;   // 1-based within the epoch
  double lr = 0.0;
  float loss = 0.0f;
  std::optional<double> val_psnr;
  std::optional<double> val_ssim;

  /// "epoch iter lr loss [val_psnr val_ssim]"
  std::string line() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no log file, no checkpoints
  std::ostream* echo = nullptr;   // receives every log line
  const Dataset* val = nullptr;
  const Checkpoint* resume = nullptr;
};

struct TrainResult {
  std::vector<LogEntry> log;
  std::optional<MetricsReport> last_val;
  std::filesystem::path last_checkpoint;
};

/// Per iteration: sample a batch, forward with batch-statistics BN, L1 loss,
/// backward, Adam at lr_at(epoch). Epoch e draws patches from a generator
/// seeded by (cfg.seed, e), so a resumed run repeats an uninterrupted one.
/// Throws NumericError on a non-finite loss; checkpoints already written stay.
TrainResult train(Model& model, const TrainConfig& cfg, const Dataset& data, const TrainOptions& opt = {});

/// Border crop used for metrics: cfg.crop, or the scale when cfg.crop is -1.
int metric_crop(const TrainConfig& cfg, int scale);

ImageU8 super_resolve(const Model& model, const ImageU8& lr, bool packed = false);

/// Eval-mode metrics on the Y channel. Throws ConfigError on scale mismatch.
MetricsReport evaluate(const Model& model, const Dataset& data, int crop, bool packed = false);
MetricsReport evaluate_bicubic(const Dataset& data, int crop);

}  // namespace binsr
