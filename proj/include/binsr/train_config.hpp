#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

namespace binsr {

struct TrainConfig {
  int epochs = 300;
  int iters_per_epoch = 100;
  int batch = 16;
  double lr0 = 2e-4;
  int halve_every = 200;  // epochs
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  int patch = 24;  // LR patch side
  int val_every = 1;  // epochs; 0 disables validation
  int keep_checkpoints = 2;
  int crop = -1;  // metric border; -1 means the scale factor

  /// Throws ConfigError.
  void validate() const;
};

/// lr0 * 0.5^floor(epoch / halve_every).
double lr_at(int epoch, const TrainConfig& cfg);

nlohmann::json to_json(const TrainConfig& c);
/// Missing fields keep defaults; "loss" is accepted only as "L1".
TrainConfig train_config_from_json(const nlohmann::json& j);

/// "desk": 10 epochs x 100 iters, batch 16, patch 24, lr 1.6e-2 halved after
/// epoch 7. "reference": lr 2e-4 halved every 200 epochs, 1000 iters per epoch.
TrainConfig train_preset(std::string_view name);

}  // namespace binsr
