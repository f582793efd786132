#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "binsr/checkpoint.hpp"
#include "binsr/error.hpp"
#include "binsr/interpreter.hpp"
#include "binsr/ops.hpp"
#include "binsr/optim.hpp"
#include "binsr/trainer.hpp"
#include "test_util.hpp"

using namespace binsr;

namespace {

NetworkConfig tiny_net(std::uint64_t seed = 1) {
  NetworkConfig n;
  n.channels = 8;
  n.num_blocks = 2;
  n.seed = seed;
  return n;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 3;
  t.iters_per_epoch = 4;
  t.batch = 2;
  t.patch = 8;
  t.seed = 7;
  t.val_every = 1;
  return t;
}

std::vector<std::string> lines(const std::vector<LogEntry>& log) {
  std::vector<std::string> out;
  for (const auto& e : log) out.push_back(e.line());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("adam first step moves by lr against the gradient sign") {
  ParamStore p;
  Parameter& w = p.add("w", Tensor::vector({1.0f, -2.0f, 0.5f}));
  w.value.enable_grad();
  w.value.grad()[0] = 3.0f;
  w.value.grad()[1] = -0.01f;
  Adam adam;
  adam.step(p, 2e-4);
  CHECK(w.value[0] == doctest::Approx(1.0 - 2e-4).epsilon(1e-6));
  CHECK(w.value[1] == doctest::Approx(-2.0 + 2e-4).epsilon(1e-6));
  CHECK(w.value[2] == 0.5f);
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam decreases a quadratic") {
  ParamStore p;
  Parameter& w = p.add("w", Tensor::vector({2.0f, -3.0f}));
  w.value.enable_grad();
  Adam adam;
  double prev = 1e9;
  for (int i = 0; i < 100; ++i) {
    for (std::size_t k = 0; k < 2; ++k) w.value.grad()[k] = 2.0f * w.value[k];
    adam.step(p, 0.05);
    if (i % 10 == 9) {
      const double norm = std::hypot(w.value[0], w.value[1]);
      CHECK(norm < prev);
      prev = norm;
    }
  }
}

TEST_CASE("adam refuses non-finite gradients") {
  ParamStore p;
  Parameter& a = p.add("alpha", Tensor::vector({1.0f}));
  Parameter& b = p.add("beta", Tensor::vector({1.0f}));
  a.value.enable_grad();
  b.value.enable_grad();
  b.value.grad()[0] = std::nanf("");
  Adam adam;
  try {
    adam.step(p, 1e-3);
    FAIL("no error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
  CHECK(a.value[0] == 1.0f);
  CHECK(adam.steps() == 0);
}

TEST_CASE("learning rate schedule") {
  TrainConfig c;
  CHECK(lr_at(0, c) == 2e-4);
  CHECK(lr_at(199, c) == 2e-4);
  CHECK(lr_at(200, c) == 1e-4);
  CHECK(lr_at(450, c) == 5e-5);
}

TEST_CASE("train config json and presets") {
  TrainConfig c = tiny_train();
  c.lr0 = 1e-3;
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(train_config_from_json(nlohmann::json{{"loss", "L1"}}).epochs == 300);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"loss", "L2"}}), ConfigError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
  TrainConfig bad;
  bad.batch = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(train_preset("desk").epochs == 10);
  CHECK(train_preset("reference").iters_per_epoch == 1000);
  CHECK_THROWS_AS(train_preset("weekend"), ConfigError);
}

TEST_CASE("checkpoint roundtrip is byte-identical") {
  Model m = Model::create(tiny_net());
  const Dataset data = synthetic_dataset(2, 32, 2, 3, "t");
  TrainConfig t = tiny_train();
  t.epochs = 1;
  train(m, t, data);
  Adam adam;
  adam.set_steps(4);
  adam.moments()["head.weight"] = {std::vector<float>(m.params.at("head.weight").value.size(), 0.25f),
                                  std::vector<float>(m.params.at("head.weight").value.size(), 0.5f)};
  const Checkpoint ck = make_checkpoint(m, t, &adam, 1);
  const std::string bytes = encode_checkpoint(ck);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.epoch == 1);
  CHECK(back.step == 4);

  const auto dir = testutil::temp_dir("ckpt");
  save_checkpoint(dir / "a.e2fc", ck);
  CHECK(slurp(dir / "a.e2fc") == bytes);

  const Model r = restore_model(load_checkpoint(dir / "a.e2fc"));
  for (const auto& [name, prm] : m.params) CHECK(r.params.at(name).value.storage() == prm.value.storage());
  Adam ra;
  restore_adam(back, ra);
  CHECK(ra.steps() == 4);
  CHECK(ra.moments().at("head.weight").v[0] == 0.5f);
}

TEST_CASE("corrupt checkpoints") {
  const Checkpoint ck = make_checkpoint(Model::create(tiny_net()), tiny_train(), nullptr, 0);
  const std::string bytes = encode_checkpoint(ck);

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(magic), DataError);
  std::string version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(version), DataError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.e2fc"), DataError);
}

TEST_CASE("same seed gives identical logs") {
  const Dataset data = synthetic_dataset(2, 32, 2, 3, "t");
  const Dataset val = synthetic_dataset(1, 32, 2, 4, "v");
  TrainOptions opt;
  opt.val = &val;
  Model a = Model::create(tiny_net()), b = Model::create(tiny_net());
  const TrainResult ra = train(a, tiny_train(), data, opt);
  const TrainResult rb = train(b, tiny_train(), data, opt);
  CHECK(lines(ra.log) == lines(rb.log));
  REQUIRE(ra.log.back().val_psnr.has_value());
  for (const auto& [name, prm] : a.params) CHECK(b.params.at(name).value.storage() == prm.value.storage());

  Model c = Model::create(tiny_net());
  TrainConfig other = tiny_train();
  other.seed = 8;
  CHECK(lines(train(c, other, data, opt).log) != lines(ra.log));
}

TEST_CASE("resume repeats the uninterrupted run") {
  const Dataset data = synthetic_dataset(2, 32, 2, 3, "t");
  const auto full_dir = testutil::temp_dir("full"), part_dir = testutil::temp_dir("part");
  const TrainConfig cfg = tiny_train();

  Model full = Model::create(tiny_net());
  TrainOptions fo;
  fo.out_dir = full_dir;
  const TrainResult rf = train(full, cfg, data, fo);

  TrainConfig first = cfg;
  first.epochs = 2;
  Model part = Model::create(tiny_net());
  TrainOptions po;
  po.out_dir = part_dir;
  const TrainResult r1 = train(part, first, data, po);
  CHECK(r1.last_checkpoint.filename() == "ckpt_e0002.e2fc");

  Checkpoint ck = load_checkpoint(r1.last_checkpoint);
  ck.train.epochs = cfg.epochs;
  Model resumed = Model::create(tiny_net(99));
  po.resume = &ck;
  const TrainResult r2 = train(resumed, cfg, data, po);

  std::vector<std::string> joined = lines(r1.log);
  for (const auto& l : lines(r2.log)) joined.push_back(l);
  CHECK(joined == lines(rf.log));
  CHECK(slurp(full_dir / "train.log") == slurp(part_dir / "train.log"));
  for (const auto& [name, prm] : full.params)
    CHECK(resumed.params.at(name).value.storage() == prm.value.storage());
}

TEST_CASE("training fits a constant image") {
  ImageU8 flat(32, 32);
  std::fill(flat.rgb.begin(), flat.rgb.end(), std::uint8_t{150});
  Dataset data;
  data.pairs.push_back(make_pair("flat", flat, 2));
  TrainConfig cfg = tiny_train();
  cfg.epochs = 1;
  cfg.iters_per_epoch = 50;
  cfg.lr0 = 1e-2;
  Model m = Model::create(tiny_net());
  const TrainResult r = train(m, cfg, data);
  CHECK(r.log.back().loss <= 0.5f * r.log.front().loss);
}

TEST_CASE("full-precision reference loss falls on a fixed batch") {
  NetworkConfig n = tiny_net();
  n.full_precision = true;
  Model m = Model::create(n);
  const Dataset data = synthetic_dataset(1, 32, 2, 5, "f");
  Tensor lr, hr;
  std::mt19937_64 rng(2);
  sample_batch(data.pairs, 2, 8, rng, lr, hr);
  Adam adam;
  float prev = 1e9f;
  for (int i = 0; i < 10; ++i) {
    m.params.zero_grad();
    Tape tape;
    const VarId out = forward_train(tape, m.graph, m.params, tape.input(lr, false), ops::BnMode::Train);
    const VarId loss = ops::l1_loss(tape, out, tape.constant(hr));
    const float v = tape.value(loss)[0];
    CHECK(v < prev);
    prev = v;
    tape.backward(loss);
    adam.step(m.params, 2e-4);
  }
}

TEST_CASE("evaluation") {
  const Model m = Model::create(tiny_net());
  const Dataset val = synthetic_dataset(2, 32, 2, 4, "v");
  const MetricsReport a = evaluate(m, val, 2), b = evaluate(m, val, 2);
  REQUIRE(a.images.size() == 2);
  CHECK(a.mean_psnr == b.mean_psnr);
  CHECK(a.mean_ssim == b.mean_ssim);
  CHECK(std::fabs(evaluate(m, val, 2, true).mean_psnr - a.mean_psnr) < 1e-2);
  CHECK_THROWS_AS(evaluate(m, synthetic_dataset(1, 36, 3, 4, "x"), 2), ConfigError);
  CHECK(evaluate_bicubic(val, 2).mean_psnr > 20.0);
  CHECK(super_resolve(m, val.pairs[0].lr).width == 32);

  TrainConfig t;
  CHECK(metric_crop(t, 4) == 4);
  t.crop = 0;
  CHECK(metric_crop(t, 4) == 0);
}
