#include "binsr/train_config.hpp"

#include <cmath>
#include <string>

#include "binsr/error.hpp"

namespace binsr {

void TrainConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("epochs", epochs);
  positive("iters_per_epoch", iters_per_epoch);
  positive("batch", batch);
  positive("lr0", lr0);
  positive("halve_every", halve_every);
  positive("eps", eps);
  positive("patch", patch);
  positive("keep_checkpoints", keep_checkpoints);
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (val_every < 0) throw ConfigError("val_every must be >= 0");
  if (crop < -1) throw ConfigError("crop must be >= 0 or -1");
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ConfigError("lr_at: epoch must be >= 0");
  return cfg.lr0 * std::ldexp(1.0, -(epoch / cfg.halve_every));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},       {"iters_per_epoch", c.iters_per_epoch},
          {"batch", c.batch},         {"lr0", c.lr0},
          {"halve_every", c.halve_every}, {"beta1", c.beta1},
          {"beta2", c.beta2},         {"eps", c.eps},
          {"seed", c.seed},           {"patch", c.patch},
          {"loss", "L1"},             {"val_every", c.val_every},
          {"keep_checkpoints", c.keep_checkpoints}, {"crop", c.crop}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "iters_per_epoch") c.iters_per_epoch = v.get<int>();
      else if (key == "batch") c.batch = v.get<int>();
      else if (key == "lr0") c.lr0 = v.get<double>();
      else if (key == "halve_every") c.halve_every = v.get<int>();
      else if (key == "beta1") c.beta1 = v.get<double>();
      else if (key == "beta2") c.beta2 = v.get<double>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "patch") c.patch = v.get<int>();
      else if (key == "val_every") c.val_every = v.get<int>();
      else if (key == "keep_checkpoints") c.keep_checkpoints = v.get<int>();
      else if (key == "crop") c.crop = v.get<int>();
      else if (key == "loss") {
        if (v.get<std::string>() != "L1") throw ConfigError("only the L1 loss is supported");
      } else throw ConfigError("unknown train config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig train_preset(std::string_view name) {
  TrainConfig c;
  if (name == "desk") {
    c.epochs = 10;
    c.iters_per_epoch = 100;
    c.lr0 = 1.6e-2;
    c.halve_every = 7;
  } else if (name == "reference") {
    c.iters_per_epoch = 1000;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or reference)");
  }
  return c;
}

}  // namespace binsr
