#include "binsr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "binsr/error.hpp"
#include "binsr/interpreter.hpp"
#include "binsr/ops.hpp"
#include "binsr/optim.hpp"

namespace binsr {

namespace fs = std::filesystem;

std::string LogEntry::line() const {
  char buf[160];
  int n = std::snprintf(buf, sizeof buf, "%d %d %.6g %.9g", epoch, iter, lr, static_cast<double>(loss));
  if (val_psnr && val_ssim) {
    std::snprintf(buf + n, sizeof buf - n, " %s %.6f", format_psnr(*val_psnr).c_str(), *val_ssim);
  }
  return buf;
}

int metric_crop(const TrainConfig& cfg, int scale) { return cfg.crop >= 0 ? cfg.crop : scale; }

namespace {

fs::path checkpoint_path(const fs::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_e%04d.e2fc", epoch);
  return dir / name;
}

}  // namespace

TrainResult train(Model& model, const TrainConfig& cfg, const Dataset& data, const TrainOptions& opt) {
  cfg.validate();
  if (data.pairs.empty()) throw DataError("training dataset is empty");
  for (const auto& p : data.pairs)
    if (p.scale != model.config.scale) {
      throw ConfigError("dataset scale " + std::to_string(p.scale) + " does not match network scale " +
                        std::to_string(model.config.scale));
    }

  Adam adam(cfg.beta1, cfg.beta2, cfg.eps);
  int first_epoch = 0;
  if (opt.resume) {
    model = restore_model(*opt.resume);
    restore_adam(*opt.resume, adam);
    first_epoch = static_cast<int>(opt.resume->epoch);
  }

  std::ofstream logfile;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    logfile.open(opt.out_dir / "train.log", first_epoch > 0 ? std::ios::app : std::ios::trunc);
    if (!logfile) throw DataError("cannot write " + (opt.out_dir / "train.log").string());
  }
  const int crop = metric_crop(cfg, model.config.scale);

  TrainResult result;
  std::vector<fs::path> kept;
  Tensor lr_batch, hr_batch;
  for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng = worker_rng(cfg.seed, static_cast<std::uint64_t>(epoch));
    const double lr = lr_at(epoch, cfg);
    for (int it = 1; it <= cfg.iters_per_epoch; ++it) {
      sample_batch(data.pairs, cfg.batch, cfg.patch, rng, lr_batch, hr_batch);
      Tape tape;
      const VarId x = tape.input(lr_batch, false);
      const VarId y = forward_train(tape, model.graph, model.params, x, ops::BnMode::Train);
      const VarId t = tape.constant(hr_batch);
      const VarId loss = ops::l1_loss(tape, y, t);
      const float loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError("loss became non-finite at epoch " + std::to_string(epoch) + " iter " +
                           std::to_string(it));
      }
      model.params.zero_grad();
      tape.backward(loss);
      adam.step(model.params, lr);

      LogEntry e{epoch, it, lr, loss_value, std::nullopt, std::nullopt};
      const bool last_iter = it == cfg.iters_per_epoch;
      if (last_iter && opt.val && !opt.val->pairs.empty() && cfg.val_every > 0 &&
          ((epoch + 1) % cfg.val_every == 0 || epoch + 1 == cfg.epochs)) {
        MetricsReport rep = evaluate(model, *opt.val, crop, false);
        e.val_psnr = rep.mean_psnr;
        e.val_ssim = rep.mean_ssim;
        result.last_val = std::move(rep);
      }
      const std::string line = e.line();
      if (logfile) logfile << line << '\n' << std::flush;
      if (opt.echo) *opt.echo << line << '\n' << std::flush;
      result.log.push_back(e);
    }

    if (!opt.out_dir.empty()) {
      const fs::path path = checkpoint_path(opt.out_dir, epoch + 1);
      save_checkpoint(path, make_checkpoint(model, cfg, &adam, static_cast<std::uint32_t>(epoch + 1)));
      result.last_checkpoint = path;
      kept.push_back(path);
      while (static_cast<int>(kept.size()) > cfg.keep_checkpoints) {
        fs::remove(kept.front());
        kept.erase(kept.begin());
      }
    }
  }
  return result;
}

ImageU8 super_resolve(const Model& model, const ImageU8& lr, bool packed) {
  const Tensor y = forward_eval(model.graph, model.params, image_to_tensor(lr), packed);
  return tensor_to_image(y);
}

MetricsReport evaluate(const Model& model, const Dataset& data, int crop, bool packed) {
  MetricsReport rep;
  for (const auto& p : data.pairs) {
    if (p.scale != model.config.scale) {
      throw ConfigError("image '" + p.name + "' has scale " + std::to_string(p.scale) + " but the model is x" +
                        std::to_string(model.config.scale));
    }
    rep.add(compare_y(p.name, super_resolve(model, p.lr, packed), p.hr, crop));
  }
  return rep;
}

MetricsReport evaluate_bicubic(const Dataset& data, int crop) {
  MetricsReport rep;
  for (const auto& p : data.pairs) rep.add(compare_y(p.name, bicubic_upscale(p.lr, p.scale), p.hr, crop));
  return rep;
}

}  // namespace binsr
