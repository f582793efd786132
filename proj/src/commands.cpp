#include "binsr/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "binsr/bitplane.hpp"
#include "binsr/checkpoint.hpp"
#include "binsr/error.hpp"
#include "binsr/graph.hpp"
#include "binsr/image.hpp"
#include "binsr/metrics.hpp"
#include "binsr/trainer.hpp"

namespace binsr::cmd {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

RunConfig run_preset(const std::string& name) {
  return {network_preset(name), train_preset(name)};
}

RunConfig load_run_config(const fs::path& path) {
  const nlohmann::json j = read_json(path);
  if (!j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
  RunConfig rc;
  for (const auto& [key, v] : j.items())
    if (key != "preset" && key != "network" && key != "train") {
      throw ConfigError(path.string() + ": unknown key '" + key + "'");
    }
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw ConfigError("preset must be a string");
    rc = run_preset(j["preset"].get<std::string>());
  }
  // Start from the preset and let explicit fields win.
  if (j.contains("network")) {
    nlohmann::json merged = binsr::to_json(rc.network);
    if (!j["network"].is_object()) throw ConfigError("\"network\" must be an object");
    merged.update(j["network"]);
    rc.network = network_config_from_json(merged);
  }
  if (j.contains("train")) {
    nlohmann::json merged = binsr::to_json(rc.train);
    if (!j["train"].is_object()) throw ConfigError("\"train\" must be an object");
    merged.update(j["train"]);
    rc.train = train_config_from_json(merged);
  }
  return rc;
}

nlohmann::json to_json(const RunConfig& rc) {
  return {{"network", binsr::to_json(rc.network)}, {"train", binsr::to_json(rc.train)}};
}

Cutoff parse_cutoff(const std::string& s) {
  if (s == "none" || s.empty()) return Cutoff::none();
  if (s == "tail" || s == "Tail") return Cutoff::tail();
  try {
    std::size_t used = 0;
    const int i = std::stoi(s, &used);
    if (used == s.size()) return Cutoff::body(i);
  } catch (const std::exception&) {
  }
  throw ConfigError("cutoff must be 'none', 'tail' or a body index, got '" + s + "'");
}

void Overrides::apply(RunConfig& rc) const {
  if (seed) {
    rc.network.seed = *seed;
    rc.train.seed = *seed;
  }
  if (epochs) rc.train.epochs = *epochs;
  if (iters) rc.train.iters_per_epoch = *iters;
  if (batch) rc.train.batch = *batch;
  if (patch) rc.train.patch = *patch;
  if (lr) rc.train.lr0 = *lr;
  if (blocks) rc.network.num_blocks = *blocks;
  if (channels) rc.network.channels = *channels;
  if (scale) rc.network.scale = *scale;
  if (block) rc.network.block = parse_block(*block);
  if (tail) rc.network.tail = parse_tail(*tail);
  if (cutoff) rc.network.cutoff = parse_cutoff(*cutoff);
  if (quantizer) rc.network.quantizer = parse_quantizer(*quantizer);
  if (full_precision) rc.network.full_precision = *full_precision;
  rc.network.validate();
  rc.train.validate();
}

PrepareSummary prepare(const fs::path& hr_dir, const fs::path& out_dir, int scale) {
  if (scale < 2 || scale > 4) throw ConfigError("scale must be 2, 3 or 4");
  if (!fs::is_directory(hr_dir)) throw DataError("not a directory: " + hr_dir.string());
  Dataset d = make_pairs(hr_dir, scale);

  const std::string lr_sub = "lr_x" + std::to_string(scale);
  fs::create_directories(out_dir / "hr");
  fs::create_directories(out_dir / lr_sub);
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& p : d.pairs) {
    const std::string hr_rel = "hr/" + p.name + ".png";
    const std::string lr_rel = lr_sub + "/" + p.name + ".png";
    write_png(out_dir / hr_rel, p.hr);
    write_png(out_dir / lr_rel, p.lr);
    entries.emplace_back(hr_rel, lr_rel);
  }
  PrepareSummary s;
  s.pairs = d.pairs.size();
  s.warnings = std::move(d.warnings);
  s.manifest = out_dir / ("manifest_x" + std::to_string(scale) + ".txt");
  write_manifest(s.manifest, entries);
  return s;
}

Dataset desk_train_data(int scale) { return synthetic_dataset(16, 128, scale, 2024, "train"); }
Dataset desk_val_data(int scale) { return synthetic_dataset(4, 128, scale, 7001, "val"); }

namespace {

Dataset load_or_desk(const std::optional<fs::path>& manifest, int scale, bool val) {
  if (!manifest) return val ? desk_val_data(scale) : desk_train_data(scale);
  Dataset d = load_manifest(*manifest);
  if (!d.pairs.empty() && d.pairs.front().scale != scale) {
    throw ConfigError(manifest->string() + " holds x" + std::to_string(d.pairs.front().scale) +
                      " pairs but the network is x" + std::to_string(scale));
  }
  return d;
}

}  // namespace

int train(const TrainArgs& args, std::ostream& out) {
  RunConfig rc = args.config;
  std::optional<Checkpoint> resume;
  if (args.resume) {
    resume = load_checkpoint(*args.resume);
    rc.network = resume->network;
  }
  rc.network.validate();
  rc.train.validate();
  const Dataset data = load_or_desk(args.data, rc.network.scale, false);
  if (data.pairs.empty()) throw DataError("training dataset is empty");
  const bool have_val = args.val.has_value() || !args.data.has_value();
  const Dataset val = have_val ? load_or_desk(args.val, rc.network.scale, true) : Dataset{};

  fs::create_directories(args.out);
  write_text(args.out / "config.json", to_json(rc).dump(2) + "\n");

  Model model = Model::create(rc.network);
  TrainOptions opt;
  opt.out_dir = args.out;
  opt.echo = &out;
  opt.val = have_val ? &val : nullptr;
  opt.resume = resume ? &*resume : nullptr;
  const TrainResult r = binsr::train(model, rc.train, data, opt);
  save_checkpoint(args.out / "model.e2fc",
                  make_checkpoint(model, rc.train, nullptr, static_cast<std::uint32_t>(rc.train.epochs)));
  out << "saved " << (args.out / "model.e2fc").string() << "\n";
  if (r.last_val) {
    out << "final validation: PSNR " << format_psnr(r.last_val->mean_psnr) << " dB, SSIM "
        << fmt("%.4f", r.last_val->mean_ssim) << "\n";
  }
  return 0;
}

int eval(const fs::path& ckpt, const std::optional<fs::path>& data, const std::optional<fs::path>& csv,
         bool packed, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const Model model = restore_model(ck);
  const Dataset d = load_or_desk(data, model.config.scale, true);
  if (d.pairs.empty()) throw DataError("evaluation dataset is empty");
  const int crop = metric_crop(ck.train, model.config.scale);
  const MetricsReport rep = evaluate(model, d, crop, packed);
  const MetricsReport bic = evaluate_bicubic(d, crop);
  rep.write_csv(out);
  out << "# bicubic baseline: PSNR " << format_psnr(bic.mean_psnr) << " SSIM " << fmt("%.6f", bic.mean_ssim)
      << " (crop " << crop << ", Y channel)\n";
  if (csv) {
    if (csv->has_parent_path()) fs::create_directories(csv->parent_path());
    std::ofstream f(*csv);
    if (!f) throw DataError("cannot write " + csv->string());
    rep.write_csv(f);
  }
  return 0;
}

int infer(const fs::path& ckpt, const fs::path& lr_png, const fs::path& out_png, bool packed) {
  const Model model = restore_model(load_checkpoint(ckpt));
  const ImageU8 lr = read_png(lr_png);
  const ImageU8 sr = super_resolve(model, lr, packed);
  if (out_png.has_parent_path()) fs::create_directories(out_png.parent_path());
  write_png(out_png, sr);
  return 0;
}

const AblationRow& AblationResult::row(const std::string& label) const {
  for (const auto& r : rows)
    if (r.label == label) return r;
  throw ConfigError("no ablation row '" + label + "'");
}

void AblationResult::write_csv(std::ostream& os) const {
  const std::size_t seeds = rows.empty() ? 0 : rows.front().psnr.size();
  if (kind == "tails") {
    os << "tail,params,psnr,ssim";
    for (std::size_t s = 0; s < seeds; ++s) os << ",psnr_seed" << s;
    for (std::size_t s = 0; s < seeds; ++s) os << ",ssim_seed" << s;
    os << '\n';
    for (const auto& r : rows) {
      os << r.label << ',' << r.params << ',' << fmt("%.4f", r.median_psnr) << ','
         << fmt("%.6f", r.median_ssim);
      for (double v : r.psnr) os << ',' << fmt("%.4f", v);
      for (double v : r.ssim) os << ',' << fmt("%.6f", v);
      os << '\n';
    }
    return;
  }
  os << "metric";
  for (const auto& r : rows) os << ',' << r.label;
  os << '\n';
  os << "PSNR";
  for (const auto& r : rows) os << ',' << fmt("%.4f", r.median_psnr);
  os << "\nSSIM";
  for (const auto& r : rows) os << ',' << fmt("%.6f", r.median_ssim);
  os << "\nparams";
  for (const auto& r : rows) os << ',' << r.params;
  os << '\n';
  for (std::size_t s = 0; s < seeds; ++s) {
    os << "PSNR_seed" << s;
    for (const auto& r : rows) os << ',' << fmt("%.4f", r.psnr[s]);
    os << '\n';
  }
  for (std::size_t s = 0; s < seeds; ++s) {
    os << "SSIM_seed" << s;
    for (const auto& r : rows) os << ',' << fmt("%.6f", r.ssim[s]);
    os << '\n';
  }
}

namespace {

struct Variant {
  std::string label;
  NetworkConfig net;
};

std::string dir_name(const std::string& label) {
  std::string s = label;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') c = '_';
  return s;
}

AblationResult run_ablation(const std::string& kind, const std::vector<Variant>& variants,
                            const AblationArgs& args) {
  if (args.seeds < 1) throw ConfigError("--seeds must be >= 1");
  for (const auto& v : variants) v.net.validate();
  args.base.train.validate();
  const int scale = args.base.network.scale;
  const Dataset data = load_or_desk(args.data, scale, false);
  if (args.data && !args.val) throw ConfigError("--data needs a matching --val manifest");
  const Dataset val = load_or_desk(args.val, scale, true);
  if (data.pairs.empty()) throw DataError("training dataset is empty");
  if (val.pairs.empty()) throw DataError("validation dataset is empty");

  const auto t0 = std::chrono::steady_clock::now();
  AblationResult res;
  res.kind = kind;
  const int crop = metric_crop(args.base.train, scale);
  const MetricsReport bic = evaluate_bicubic(val, crop);
  res.bicubic_psnr = bic.mean_psnr;
  res.bicubic_ssim = bic.mean_ssim;

  fs::create_directories(args.out);
  nlohmann::json effective = to_json(args.base);
  effective["seeds"] = args.seeds;
  effective["variants"] = nlohmann::json::array();
  for (const auto& v : variants) effective["variants"].push_back({{"label", v.label}, {"network", binsr::to_json(v.net)}});
  write_text(args.out / "config.json", effective.dump(2) + "\n");

  for (const auto& v : variants) {
    AblationRow row;
    row.label = v.label;
    for (int s = 0; s < args.seeds; ++s) {
      NetworkConfig net = v.net;
      TrainConfig tc = args.base.train;
      net.seed = args.base.network.seed + static_cast<std::uint64_t>(s);
      tc.seed = args.base.train.seed + static_cast<std::uint64_t>(s);
      tc.val_every = 0;
      Model model = Model::create(net);
      row.params = model.params.trainable_count();
      TrainOptions opt;
      opt.out_dir = args.out / dir_name(v.label) / ("seed" + std::to_string(s));
      binsr::train(model, tc, data, opt);
      const MetricsReport rep = evaluate(model, val, crop, false);
      row.psnr.push_back(rep.mean_psnr);
      row.ssim.push_back(rep.mean_ssim);
      if (args.progress) {
        *args.progress << kind << ": " << v.label << " seed " << s << " PSNR " << format_psnr(rep.mean_psnr)
                       << " SSIM " << fmt("%.4f", rep.mean_ssim) << '\n'
                       << std::flush;
      }
    }
    row.median_psnr = median(row.psnr);
    row.median_ssim = median(row.ssim);
    res.rows.push_back(std::move(row));
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ofstream csv(args.out / (kind + ".csv"));
  if (!csv) throw DataError("cannot write " + (args.out / (kind + ".csv")).string());
  res.write_csv(csv);
  return res;
}

NetworkConfig full_precision_of(NetworkConfig net) {
  net.full_precision = true;
  net.cutoff = Cutoff::none();
  return net;
}

}  // namespace

AblationResult ablate_blocks(const AblationArgs& args) {
  std::vector<Variant> vs;
  for (auto b : {BlockVariant::Original, BlockVariant::FormerResidual, BlockVariant::LaterResidual,
                 BlockVariant::BiReal}) {
    NetworkConfig net = args.base.network;
    net.block = b;
    net.tail = TailVariant::Lightweight;
    net.cutoff = Cutoff::none();
    vs.push_back({block_label(b), net});
  }
  return run_ablation("blocks", vs, args);
}

AblationResult ablate_tails(const AblationArgs& args) {
  std::vector<Variant> vs;
  for (auto t : {TailVariant::Original, TailVariant::RepeatShortcut, TailVariant::Lightweight}) {
    NetworkConfig net = args.base.network;
    net.block = BlockVariant::BiReal;
    net.tail = t;
    net.cutoff = Cutoff::none();
    vs.push_back({tail_label(t), net});
  }
  NetworkConfig fp = args.base.network;
  fp.block = BlockVariant::BiReal;
  fp.tail = TailVariant::Original;
  vs.push_back({"FullPrecision", full_precision_of(fp)});
  return run_ablation("tails", vs, args);
}

AblationResult ablate_cutoff(const AblationArgs& args) {
  const int n = 2 * args.base.network.num_blocks;
  std::vector<std::string> positions = args.positions;
  if (positions.empty()) positions = {"0", "mid", "last", "tail"};
  std::vector<Variant> vs;
  for (const auto& p : positions) {
    NetworkConfig net = args.base.network;
    net.block = BlockVariant::BiReal;
    net.tail = TailVariant::Lightweight;
    std::string label;
    if (p == "tail" || p == "Tail") {
      net.cutoff = Cutoff::tail();
      label = "Tail";
    } else {
      int idx = 0;
      if (p == "mid") idx = n / 2;
      else if (p == "last") idx = n - 1;
      else {
        const Cutoff c = parse_cutoff(p);
        if (c.kind != Cutoff::Kind::Body) throw ConfigError("bad cutoff position '" + p + "'");
        idx = c.index;
      }
      net.cutoff = Cutoff::body(idx);
      label = std::to_string(idx);
    }
    net.validate();
    vs.push_back({label, net});
  }
  return run_ablation("cutoff", vs, args);
}

BenchReport bench_packed(int channels, int hw, int kernel, int iters, std::uint64_t seed) {
  if (channels < 1 || hw < 1 || kernel < 1 || kernel % 2 == 0 || iters < 1) {
    throw ConfigError("bench-packed needs C >= 1, hw >= 1, odd k >= 1, iters >= 1");
  }
  const int pad = kernel / 2;
  std::mt19937_64 rng(seed);
  const Tensor x = random_signs({1, channels, hw, hw}, rng);
  const Tensor latent = random_normal({channels, channels, kernel, kernel}, 0.1f, rng);
  const BinWeights bw = binarize_weights(latent);
  const PackedWeights pw = pack_weights(bw);

  BenchReport r;
  r.channels = channels;
  r.hw = hw;
  r.kernel = kernel;
  r.iters = iters;
  const Tensor dense = binconv_forward(x, bw, 1, pad);
  const XnorDots dots = xnor_conv_dots(pack_bits(x, pad), pw, 1, pad);
  const Tensor packed = xnor_conv(pack_bits(x, pad), pw, 1, pad);
  r.equal = dense.storage() == packed.storage();
  if (!r.equal) {
    throw NumericError("bench-packed: packed output differs from the dense binarized conv (max abs diff " +
                       std::to_string(max_abs_diff(dense, packed)) + "); benchmark invalid");
  }
  const auto [mn, mx] = std::minmax_element(dots.n_valid.begin(), dots.n_valid.end());
  r.n_valid_min = *mn;
  r.n_valid_max = *mx;

  using clock = std::chrono::steady_clock;
  volatile float sink = 0.0f;
  auto t0 = clock::now();
  for (int i = 0; i < iters; ++i) sink = sink + binconv_forward(x, bw, 1, pad)[0];
  auto t1 = clock::now();
  for (int i = 0; i < iters; ++i) sink = sink + xnor_conv(pack_bits(x, pad), pw, 1, pad)[0];
  auto t2 = clock::now();
  r.dense_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
  r.packed_ms = std::chrono::duration<double, std::milli>(t2 - t1).count() / iters;
  r.speedup = r.dense_ms / r.packed_ms;
  return r;
}

void print_bench(const BenchReport& r, std::ostream& out) {
  out << "geometry: C=" << r.channels << " " << r.hw << "x" << r.hw << " k=" << r.kernel
      << " stride=1 pad=" << r.kernel / 2 << "\n";
  out << "equality precheck: " << (r.equal ? "exact match" : "MISMATCH") << "\n";
  out << "n_valid per output: min " << r.n_valid_min << ", max " << r.n_valid_max << " (interior = k*k*C = "
      << r.kernel * r.kernel * r.channels << ")\n";
  out << "dense float binconv: " << fmt("%.3f", r.dense_ms) << " ms/call\n";
  out << "xnor-popcount:       " << fmt("%.3f", r.packed_ms) << " ms/call (activation packing included)\n";
  out << "speedup: " << fmt("%.2f", r.speedup) << "x over " << r.iters << " iters\n";
}

int analyze(const NetworkConfig& cfg, bool dump, std::ostream& out) {
  const LayerGraph g = build_network(cfg);
  const FlowReport rep = analyze_flow(g);
  out << "network: " << backbone_tag(cfg.backbone) << ", " << cfg.num_blocks << " x " << block_label(cfg.block)
      << " blocks, C=" << cfg.channels << ", x" << cfg.scale << ", tail " << tail_label(cfg.effective_tail())
      << ", cutoff " << cfg.cutoff.str() << (cfg.full_precision ? ", full precision" : "") << "\n";
  out << rep.str(g);
  if (dump) out << g.dump();
  return 0;
}

}  // namespace binsr::cmd
