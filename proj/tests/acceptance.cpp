// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// only if a hard criterion fails; soft criteria report margins.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "binsr/bitplane.hpp"
#include "binsr/checkpoint.hpp"
#include "binsr/commands.hpp"
#include "binsr/error.hpp"
#include "binsr/graph.hpp"
#include "binsr/metrics.hpp"
#include "binsr/quantize.hpp"
#include "binsr/trainer.hpp"
#include "test_util.hpp"

using namespace binsr;
using clock_type = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr int kGeometries = 1200;
constexpr double kTimeLimitS = 60.0;
constexpr double kGradRelTol = 1e-2;
constexpr double kPsnrUniform10 = 28.13;
constexpr double kPsnrUniformTol = 0.01;
constexpr double kSsimSelfTol = 1e-9;
constexpr double kPsnrOracleTol = 1e-9;
constexpr double kSsimOracleTol = 1e-6;
constexpr int kMetricPairs = 50;
constexpr double kAblationLimitS = 15 * 60.0;
constexpr int kSeeds = 3;

bool hard_ok = true;
std::ofstream report_file;

void say(const std::string& line) {
  std::cout << line << std::endl;
  if (report_file) report_file << line << std::endl;
}

void report(int id, bool hard, bool pass, const std::string& detail) {
  say("criterion " + std::to_string(id) + " [" + (hard ? "hard" : "soft") + "] " + (pass ? "PASS" : "FAIL") + ": " +
      detail);
  if (hard && !pass) hard_ok = false;
}

double since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void kernel_equivalence() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> cd(1, 64), kd(0, 2), sd(1, 2), pd(0, 2), ed(0, 7), od(1, 6), nd(1, 2);
  int mismatches = 0;
  long outputs = 0;
  for (int t = 0; t < kGeometries; ++t) {
    const int c = cd(rng), k = 2 * kd(rng) + 1, stride = sd(rng), pad = pd(rng);
    const int base = std::max(1, k - 2 * pad);
    const Tensor x = random_signs({nd(rng), c, base + ed(rng), base + ed(rng)}, rng);
    const BinWeights w = binarize_weights(random_normal({od(rng), c, k, k}, 1.0f, rng));
    const BitPlane bits = pack_bits(x, pad);
    const PackedWeights pw = pack_weights(w);
    const XnorDots d = xnor_conv_dots(bits, pw, stride, pad);
    const auto ref = oracle::sign_dots(x, w.signs, stride, pad);
    bool ok = d.dot.size() == ref.size();
    for (std::size_t i = 0; ok && i < ref.size(); ++i) ok = d.dot[i] == ref[i];
    ok = ok && xnor_conv(bits, pw, stride, pad).storage() == binconv_forward(x, w, stride, pad).storage();
    outputs += static_cast<long>(ref.size());
    if (!ok) ++mismatches;
  }
  const double s = since(t0);
  report(1, true, mismatches == 0 && s < kTimeLimitS,
         std::to_string(kGeometries) + " geometries, " + std::to_string(outputs) + " outputs, " +
             std::to_string(mismatches) + " mismatches, " + fmt("%.1f", s) + " s");
}

double ste_closed(double x) { return std::fabs(x) <= 1.0 ? 1.0 : 0.0; }
double poly_closed(double x) {
  if (x >= -1.0 && x < 0.0) return 2.0 + 2.0 * x;
  if (x >= 0.0 && x < 1.0) return 2.0 - 2.0 * x;
  return 0.0;
}

void gradient_correctness() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(5);
  double worst = 0.0;

  Tensor x = random_uniform({2, 3, 7, 7}, -1, 1, rng);
  Tensor w = random_uniform({4, 3, 3, 3}, -0.5, 0.5, rng);
  Tensor b = random_uniform({4, 1, 1, 1}, -0.5, 0.5, rng);
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      worst = std::max(worst, testutil::max_gradient_error(
                                  [&](Tape& t, std::vector<VarId>& in) {
                                    in = {t.input(x), t.input(w), t.input(b)};
                                    return ops::conv2d(t, in[0], in[1], in[2], stride, pad);
                                  },
                                  {&x, &w, &b}));
    }
  const double conv_err = worst;

  Tensor bx = random_normal({2, 4, 6, 6}, 1.0f, rng);
  Tensor gamma = random_uniform({4, 1, 1, 1}, 0.5, 1.5, rng);
  Tensor beta = random_uniform({4, 1, 1, 1}, -0.5, 0.5, rng);
  double bn_err = 0.0;
  for (auto mode : {ops::BnMode::Train, ops::BnMode::Eval}) {
    const Tensor rm({4, 1, 1, 1}, 0.1f), rv({4, 1, 1, 1}, 0.9f);
    bn_err = std::max(bn_err, testutil::max_gradient_error(
                                  [&](Tape& t, std::vector<VarId>& in) {
                                    in = {t.input(bx), t.input(gamma), t.input(beta)};
                                    Tensor m = rm, v = rv;
                                    return ops::batchnorm(t, in[0], in[1], in[2], m, v, mode);
                                  },
                                  {&bx, &gamma, &beta}));
  }

  // Residuals of 0.3 keep h = 1e-3 probes off the kink.
  Tensor pred = random_uniform({1, 3, 5, 5}, -1, 1, rng);
  Tensor target(pred.shape());
  for (std::size_t i = 0; i < pred.size(); ++i) target[i] = pred[i] + ((rng() & 1) ? 0.3f : -0.3f);
  const double l1_err = testutil::max_gradient_error(
      [&](Tape& t, std::vector<VarId>& in) {
        in = {t.input(pred)};
        return ops::l1_loss(t, in[0], t.constant(target));
      },
      {&pred});

  std::vector<float> pts = {-1.0f, 0.0f, 1.0f, -1.5f, 1.5f, -0.5f, 0.5f, -0.999f, 0.999f, 1e-3f, -1e-3f};
  std::uniform_real_distribution<float> u(-2, 2);
  for (int i = 0; i < 200; ++i) pts.push_back(u(rng));
  int quant_bad = 0;
  for (auto q : {QuantizerKind::SteClip, QuantizerKind::BiRealPoly}) {
    Tape tape;
    const VarId v = tape.input(Tensor::vector(pts));
    const VarId s = ops::sign(tape, v, q);
    // Far target: the L1 upstream gradient is exactly 1/n everywhere.
    tape.backward(ops::l1_loss(tape, s, tape.constant(Tensor(tape.value(s).shape(), -5.0f))));
    const auto g = tape.grad(v);
    const float up = 1.0f / static_cast<float>(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double closed = q == QuantizerKind::SteClip ? ste_closed(pts[i]) : poly_closed(pts[i]);
      if (g[i] != static_cast<float>(up * static_cast<float>(closed))) ++quant_bad;
    }
  }
  const double s = since(t0);
  const bool pass = conv_err < kGradRelTol && bn_err < kGradRelTol && l1_err < kGradRelTol && quant_bad == 0 &&
                    s < kTimeLimitS;
  report(2, true, pass,
         "max rel error conv " + fmt("%.2e", conv_err) + ", bn " + fmt("%.2e", bn_err) + ", l1 " +
             fmt("%.2e", l1_err) + " (tol " + fmt("%.0e", kGradRelTol) + "); quantizer mismatches " +
             std::to_string(quant_bad) + " of " + std::to_string(2 * pts.size()) + "; " + fmt("%.1f", s) + " s");
}

void metric_oracles() {
  ImageF a(64, 64, 1), b(64, 64, 1);
  std::fill(a.data.begin(), a.data.end(), 100.0);
  std::fill(b.data.begin(), b.data.end(), 110.0);
  const double p10 = psnr(a, b, 0);

  std::mt19937_64 rng(31);
  const ImageF r = oracle::random_plane(48, 40, rng);
  const double self = ssim(r, r, 0);

  double psnr_dev = 0.0, ssim_dev = 0.0;
  std::uniform_int_distribution<int> sz(24, 64), cr(0, 4);
  std::normal_distribution<double> noise(0.0, 12.0);
  for (int i = 0; i < kMetricPairs; ++i) {
    const int w = sz(rng), h = sz(rng), crop = cr(rng);
    const ImageF x = oracle::random_plane(w, h, rng);
    ImageF y = x;
    for (double& v : y.data) v = std::clamp(v + noise(rng), 0.0, 255.0);
    psnr_dev = std::max(psnr_dev, std::fabs(psnr(x, y, crop) - oracle::psnr(x, y, crop)));
    ssim_dev = std::max(ssim_dev, std::fabs(ssim(x, y, crop) - oracle::ssim(x, y, crop)));
  }
  const bool pass = std::fabs(p10 - kPsnrUniform10) <= kPsnrUniformTol && std::fabs(self - 1.0) <= kSsimSelfTol &&
                    psnr_dev <= kPsnrOracleTol && ssim_dev <= kSsimOracleTol;
  report(3, true, pass,
         "psnr(diff 10) " + fmt("%.4f", p10) + " dB; ssim(a,a)-1 = " + fmt("%.1e", self - 1.0) + "; " +
             std::to_string(kMetricPairs) + " pairs: max |psnr-oracle| " + fmt("%.1e", psnr_dev) +
             ", max |ssim-oracle| " + fmt("%.1e", ssim_dev));
}

void flow_properties() {
  int checked = 0, bad = 0;
  for (const char* preset : {"desk", "reference"}) {
    for (auto v : {BlockVariant::Original, BlockVariant::FormerResidual, BlockVariant::LaterResidual,
                   BlockVariant::BiReal}) {
      for (auto t : {TailVariant::Original, TailVariant::RepeatShortcut, TailVariant::Lightweight}) {
        NetworkConfig cfg = network_preset(preset);
        cfg.block = v;
        cfg.tail = t;
        const FlowReport r = analyze_flow(build_network(cfg));
        ++checked;
        if (r.has_fp_path != (t != TailVariant::Original)) ++bad;
        for (const auto& bc : r.binconvs) {
          if (bc.index >= 2 * cfg.num_blocks) continue;
          // Bi-Real property under tails with an FP path.
          if (v == BlockVariant::BiReal && t != TailVariant::Original &&
              !(bc.receives_fp_input && bc.receives_accurate_grad))
            ++bad;
          if (v == BlockVariant::Original && bc.receives_fp_input != (bc.index % 2 == 0)) ++bad;
        }
      }
    }
  }
  report(4, true, bad == 0, std::to_string(checked) + " configurations, " + std::to_string(bad) + " violations");
}

std::vector<std::string> log_lines(const TrainResult& r) {
  std::vector<std::string> out;
  for (const auto& e : r.log) out.push_back(e.line());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const auto t0 = clock_type::now();
  const cmd::RunConfig rc = cmd::run_preset("desk");
  TrainConfig cfg = rc.train;
  cfg.epochs = 3;
  cfg.iters_per_epoch = 10;
  cfg.seed = 11;
  const Dataset data = cmd::desk_train_data(rc.network.scale);
  const Dataset val = cmd::desk_val_data(rc.network.scale);

  const auto dir_a = testutil::temp_dir("accept_a"), dir_b = testutil::temp_dir("accept_b"),
             dir_c = testutil::temp_dir("accept_c");
  TrainOptions oa, ob, oc;
  oa.out_dir = dir_a;
  ob.out_dir = dir_b;
  oc.out_dir = dir_c;
  oa.val = ob.val = oc.val = &val;
  Model a = Model::create(rc.network), b = Model::create(rc.network);
  const TrainResult ra = train(a, cfg, data, oa);
  const TrainResult rb = train(b, cfg, data, ob);
  const bool same_logs = log_lines(ra) == log_lines(rb) && slurp(dir_a / "train.log") == slurp(dir_b / "train.log");

  TrainConfig first = cfg;
  first.epochs = 1;
  Model c = Model::create(rc.network);
  const TrainResult r1 = train(c, first, data, oc);
  Checkpoint ck = load_checkpoint(r1.last_checkpoint);
  const bool roundtrip = encode_checkpoint(decode_checkpoint(slurp(r1.last_checkpoint))) == slurp(r1.last_checkpoint);
  ck.train.epochs = cfg.epochs;
  oc.resume = &ck;
  Model resumed = Model::create(rc.network);
  train(resumed, cfg, data, oc);
  const bool resume_ok = slurp(dir_a / "train.log") == slurp(dir_c / "train.log") &&
                         slurp(dir_a / "ckpt_e0003.e2fc") == slurp(dir_c / "ckpt_e0003.e2fc");

  report(5, true, same_logs && roundtrip && resume_ok,
         std::string("same-seed logs ") + (same_logs ? "identical" : "DIFFER") + " (" +
             std::to_string(ra.log.size()) + " lines); checkpoint roundtrip " + (roundtrip ? "exact" : "DIFFERS") +
             "; resume after epoch 1 " + (resume_ok ? "matches" : "DIFFERS") + " the uninterrupted log and final checkpoint; " +
             fmt("%.1f", since(t0)) + " s");
}

std::string medians(const cmd::AblationResult& r) {
  std::string s;
  for (const auto& row : r.rows) s += (s.empty() ? "" : ", ") + row.label + " " + fmt("%.2f", row.median_psnr);
  return s;
}

void desk_trends() {
  const auto root = testutil::temp_dir("accept_ablate");
  cmd::AblationArgs args;
  args.base = cmd::run_preset("desk");
  args.seeds = kSeeds;
  args.progress = &std::cout;

  args.out = root / "tails";
  const cmd::AblationResult tails = cmd::ablate_tails(args);
  args.out = root / "blocks";
  const cmd::AblationResult blocks = cmd::ablate_blocks(args);
  args.out = root / "cutoff";
  const cmd::AblationResult cut = cmd::ablate_cutoff(args);

  const double m_tail = tails.row("Lightweight").median_psnr - tails.row("Original").median_psnr;
  const double m_block = blocks.row("Bi-Real").median_psnr - blocks.row("Original").median_psnr;
  double best_body = 1e9;
  for (const auto& row : cut.rows)
    if (row.label != "Tail") best_body = std::min(best_body, row.median_psnr);
  const double m_cut = best_body - cut.row("Tail").median_psnr;
  const bool timely = tails.seconds <= kAblationLimitS && blocks.seconds <= kAblationLimitS &&
                      cut.seconds <= kAblationLimitS;

  say("  tails  (" + fmt("%.0f", tails.seconds) + " s): " + medians(tails));
  say("  blocks (" + fmt("%.0f", blocks.seconds) + " s): " + medians(blocks));
  say("  cutoff (" + fmt("%.0f", cut.seconds) + " s): " + medians(cut));
  say("  bicubic: " + fmt("%.2f", tails.bicubic_psnr) + " dB");
  report(6, false, m_tail >= 0 && m_block >= 0 && m_cut >= 0 && timely,
         "median PSNR margins over " + std::to_string(kSeeds) + " seeds: Lightweight-Original tail " +
             fmt("%+.2f", m_tail) + " dB, Bi-Real-Original block " + fmt("%+.2f", m_block) +
             " dB, worst body cutoff minus Tail cutoff " + fmt("%+.2f", m_cut) + " dB; each ablation <= 15 min: " +
             (timely ? "yes" : "no"));
}

void packed_throughput() {
  try {
    const cmd::BenchReport r = cmd::bench_packed(64, 64, 3, 20);
    report(7, false, r.equal && r.speedup > 1.0,
           "C=64 3x3 64x64: dense " + fmt("%.3f", r.dense_ms) + " ms, packed " + fmt("%.3f", r.packed_ms) +
               " ms, speedup " + fmt("%.2f", r.speedup) + "x after exact equality precheck");
  } catch (const NumericError& e) {
    report(7, false, false, e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  // --fast skips the multi-minute trend runs; --report also writes the lines to a file.
  bool fast = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--fast") fast = true;
    else if (a == "--report" && i + 1 < argc) report_file.open(argv[++i]);
  }
  kernel_equivalence();
  gradient_correctness();
  metric_oracles();
  flow_properties();
  determinism();
  if (fast) say("criterion 6 [soft] SKIPPED: --fast");
  else desk_trends();
  packed_throughput();
  say(std::string("hard criteria: ") + (hard_ok ? "all pass" : "FAILURES"));
  return hard_ok ? 0 : 1;
}
