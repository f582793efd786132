// binsr: binarized super-resolution toolkit.
//
// Exit codes: 0 ok, 2 configuration or usage error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "binsr/commands.hpp"
#include "binsr/error.hpp"

namespace fs = std::filesystem;
using namespace binsr;

namespace {

struct ConfigFlags {
  std::string config;
  std::string preset;
  cmd::Overrides ov;

  void add(CLI::App* app, bool with_train) {
    app->add_option("--config", config, "JSON config {preset, network, train}");
    app->add_option("--preset", preset, "desk | reference");
    app->add_option("--seed", ov.seed, "seed for init and sampling");
    app->add_option("--blocks", ov.blocks, "number of residual blocks");
    app->add_option("--channels", ov.channels, "feature channels");
    app->add_option("--scale", ov.scale, "upscale factor (2, 3, 4)");
    app->add_option("--block", ov.block, "Original | FormerResidual | LaterResidual | BiReal");
    app->add_option("--tail", ov.tail, "Original | RepeatShortcut | Lightweight");
    app->add_option("--cutoff", ov.cutoff, "none | tail | body index");
    app->add_option("--quantizer", ov.quantizer, "STE-clip | BiReal-poly");
    app->add_option("--full-precision", ov.full_precision, "float reference network");
    if (with_train) {
      app->add_option("--epochs", ov.epochs);
      app->add_option("--iters", ov.iters, "iterations per epoch");
      app->add_option("--batch", ov.batch);
      app->add_option("--patch", ov.patch, "LR patch size");
      app->add_option("--lr", ov.lr, "initial learning rate");
    }
  }

  cmd::RunConfig resolve(const std::string& default_preset) const {
    if (!config.empty() && !preset.empty()) throw ConfigError("use either --config or --preset, not both");
    cmd::RunConfig rc = !config.empty() ? cmd::load_run_config(config)
                                        : cmd::run_preset(preset.empty() ? default_preset : preset);
    ov.apply(rc);
    return rc;
  }
};

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binarized super-resolution: build, train, evaluate, ablate, benchmark"};
  app.require_subcommand(1);

  // prepare
  auto* prep = app.add_subcommand("prepare", "crop HR PNGs, make bicubic LR pairs and a manifest");
  std::string prep_hr, prep_out;
  int prep_scale = 2;
  prep->add_option("--hr", prep_hr, "directory of HR PNGs")->required();
  prep->add_option("--out", prep_out, "output directory")->required();
  prep->add_option("--scale", prep_scale, "2, 3 or 4")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a network");
  ConfigFlags tr_cfg;
  tr_cfg.add(tr, true);
  std::string tr_data, tr_val, tr_out, tr_resume;
  tr->add_option("--data", tr_data, "training manifest (synthetic desk data if omitted)");
  tr->add_option("--val", tr_val, "validation manifest");
  tr->add_option("--resume", tr_resume, "checkpoint to continue from");
  tr->add_option("--out", tr_out, "output directory")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint on a manifest");
  std::string ev_ckpt, ev_data, ev_csv;
  bool ev_packed = false;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--data", ev_data, "manifest (synthetic desk validation set if omitted)");
  ev->add_option("--csv", ev_csv, "also write the report here");
  ev->add_flag("--packed", ev_packed, "use the XNOR-popcount kernel");

  // infer
  auto* inf = app.add_subcommand("infer", "super-resolve one PNG");
  std::string inf_ckpt, inf_lr, inf_out;
  bool inf_packed = false;
  inf->add_option("--ckpt", inf_ckpt)->required();
  inf->add_option("--lr", inf_lr, "input PNG")->required();
  inf->add_option("--out", inf_out, "output PNG")->required();
  inf->add_flag("--packed", inf_packed, "use the XNOR-popcount kernel");

  // ablations
  struct AblateCli {
    CLI::App* app = nullptr;
    ConfigFlags cfg;
    int seeds = 3;
    std::string data, val, out;
    std::vector<std::string> positions;
  };
  AblateCli ab_blocks, ab_tails, ab_cutoff;
  auto setup_ablate = [&](AblateCli& a, const char* name, const char* desc) {
    a.app = app.add_subcommand(name, desc);
    a.cfg.add(a.app, true);
    a.app->add_option("--seeds", a.seeds, "runs per variant");
    a.app->add_option("--data", a.data, "training manifest (synthetic desk data if omitted)");
    a.app->add_option("--val", a.val, "validation manifest");
    a.out = std::string("runs/") + name;
    a.app->add_option("--out", a.out, "output directory");
  };
  setup_ablate(ab_blocks, "ablate-blocks", "Original / Former / Later / Bi-Real blocks");
  setup_ablate(ab_tails, "ablate-tails", "Original / Repeat-Shortcut / Lightweight tails");
  setup_ablate(ab_cutoff, "ablate-cutoff", "bypass cutoff at body positions and the tail");
  ab_cutoff.app->add_option("--positions", ab_cutoff.positions, "indices or 0, mid, last, tail");

  // bench-packed
  auto* bench = app.add_subcommand("bench-packed", "XNOR-popcount vs dense float binarized conv");
  int b_c = 64, b_hw = 64, b_k = 3, b_iters = 20;
  bench->add_option("--c", b_c, "channels");
  bench->add_option("--hw", b_hw, "spatial size");
  bench->add_option("--k", b_k, "kernel size");
  bench->add_option("--iters", b_iters);

  // analyze
  auto* an = app.add_subcommand("analyze", "information-flow report for a network");
  ConfigFlags an_cfg;
  an_cfg.add(an, false);
  bool an_dump = false;
  an->add_flag("--dump", an_dump, "print the graph edge list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*prep) {
      const auto s = cmd::prepare(prep_hr, prep_out, prep_scale);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << s.pairs << " pairs written; manifest " << s.manifest.string();
      if (!s.warnings.empty()) std::cout << " (" << s.warnings.size() << " warnings)";
      std::cout << "\n";
      return 0;
    }
    if (*tr) {
      cmd::TrainArgs a;
      a.config = tr_cfg.resolve("desk");
      a.data = opt_path(tr_data);
      a.val = opt_path(tr_val);
      a.resume = opt_path(tr_resume);
      a.out = tr_out;
      return cmd::train(a, std::cout);
    }
    if (*ev) return cmd::eval(ev_ckpt, opt_path(ev_data), opt_path(ev_csv), ev_packed, std::cout);
    if (*inf) return cmd::infer(inf_ckpt, inf_lr, inf_out, inf_packed);
    for (AblateCli* a : {&ab_blocks, &ab_tails, &ab_cutoff}) {
      if (!*a->app) continue;
      cmd::AblationArgs args;
      args.base = a->cfg.resolve("desk");
      args.seeds = a->seeds;
      args.data = opt_path(a->data);
      args.val = opt_path(a->val);
      args.out = a->out;
      args.positions = a->positions;
      args.progress = &std::cerr;
      const cmd::AblationResult r = a == &ab_blocks ? cmd::ablate_blocks(args)
                                    : a == &ab_tails ? cmd::ablate_tails(args)
                                                     : cmd::ablate_cutoff(args);
      r.write_csv(std::cout);
      std::cout << "# bicubic baseline PSNR " << r.bicubic_psnr << " SSIM " << r.bicubic_ssim << "\n";
      std::cout << "# " << r.seconds << " s; CSV in " << (fs::path(a->out) / (r.kind + ".csv")).string() << "\n";
      return 0;
    }
    if (*bench) {
      cmd::print_bench(cmd::bench_packed(b_c, b_hw, b_k, b_iters), std::cout);
      return 0;
    }
    if (*an) return cmd::analyze(an_cfg.resolve("desk").network, an_dump, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
