#include <doctest.h>

#include "binsr/error.hpp"
#include "binsr/kernels.hpp"
#include "binsr/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace binsr;

TEST_CASE("conv2d small cases") {
  Tensor x({1, 1, 1, 1}, 2.0f), w({1, 1, 1, 1}, 3.0f);
  CHECK(kernels::conv2d_forward(x, w, nullptr, 1, 0)[0] == 6.0f);

  Tensor c({1, 1, 5, 5}, 0.75f), ones({1, 1, 3, 3}, 1.0f);
  const Tensor y = kernels::conv2d_forward(c, ones, nullptr, 1, 1);
  CHECK(y.shape() == Shape{1, 1, 5, 5});
  CHECK(y.at(0, 0, 2, 2) == doctest::Approx(9 * 0.75));
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4 * 0.75));
}

TEST_CASE("conv2d matches the direct loop") {
  std::mt19937_64 rng(11);
  Tensor x = random_uniform({1, 2, 5, 5}, -1, 1, rng);
  Tensor w = random_uniform({3, 2, 3, 3}, -1, 1, rng);
  CHECK(max_abs_diff(kernels::conv2d_forward(x, w, nullptr, 1, 1), oracle::conv2d(x, w, nullptr, 1, 1)) < 1e-5f);

  for (int t = 0; t < 40; ++t) {
    std::uniform_int_distribution<int> d(1, 4);
    const int k = 2 * (d(rng) % 2) + 1, stride = d(rng) % 2 + 1, pad = d(rng) % 3;
    Tensor xi = random_uniform({d(rng), d(rng), k + d(rng), k + d(rng)}, -1, 1, rng);
    Tensor wi = random_uniform({d(rng), xi.shape().c, k, k}, -1, 1, rng);
    Tensor b = random_uniform({wi.shape().n, 1, 1, 1}, -1, 1, rng);
    CHECK(max_abs_diff(kernels::conv2d_forward(xi, wi, &b, stride, pad), oracle::conv2d(xi, wi, &b, stride, pad)) <
          1e-5f);
  }
}

TEST_CASE("conv2d rejects mismatched channels") {
  Tensor x({1, 2, 5, 5}), w({3, 4, 3, 3});
  try {
    kernels::conv2d_forward(x, w, nullptr, 1, 1);
    FAIL("no error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("input channels 2 != weight Cin 4") != std::string::npos);
  }
  CHECK_THROWS_AS(kernels::conv2d_forward(Tensor({1, 1, 2, 2}), Tensor({1, 1, 5, 5}), nullptr, 1, 0), ConfigError);
}

TEST_CASE("conv2d backward matches finite differences") {
  std::mt19937_64 rng(5);
  Tensor x = random_uniform({2, 3, 6, 6}, -1, 1, rng);
  Tensor w = random_uniform({4, 3, 3, 3}, -0.5, 0.5, rng);
  Tensor b = random_uniform({4, 1, 1, 1}, -0.5, 0.5, rng);
  for (int stride : {1, 2}) {
    auto build = [&](Tape& tape, std::vector<VarId>& in) {
      in = {tape.input(x), tape.input(w), tape.input(b)};
      return ops::conv2d(tape, in[0], in[1], in[2], stride, 1);
    };
    CHECK(testutil::max_gradient_error(build, {&x, &w, &b}) < 1e-2);
  }
}

TEST_CASE("batchnorm train mode normalizes per channel") {
  std::mt19937_64 rng(2);
  Tensor x = random_normal({4, 3, 5, 5}, 3.0f, rng);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 7.0f;
  Tensor rm({3, 1, 1, 1}, 0.0f), rv({3, 1, 1, 1}, 1.0f);
  Tape tape;
  const VarId y = ops::batchnorm(tape, tape.input(x), tape.input(Tensor({3, 1, 1, 1}, 1.0f)),
                                 tape.input(Tensor({3, 1, 1, 1}, 0.0f)), rm, rv, ops::BnMode::Train);
  const auto stats = testutil::channel_stats(tape.value(y));
  for (const auto& [mean, var] : stats) {
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK(rm[0] != 0.0f);

  Tape t2;
  const VarId z = ops::batchnorm(t2, t2.input(tape.value(y)), t2.input(Tensor({3, 1, 1, 1}, 2.0f)),
                                 t2.input(Tensor({3, 1, 1, 1}, 3.0f)), rm, rv, ops::BnMode::Train);
  for (const auto& [mean, var] : testutil::channel_stats(t2.value(z))) {
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-5));
    CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(1e-3));
  }
}

TEST_CASE("batchnorm eval mode uses running statistics") {
  Tensor x({1, 2, 1, 2}, std::vector<float>{1, 3, 5, 7});
  Tensor rm = Tensor::vector({2, 6}), rv = Tensor::vector({4, 1});
  const Tensor y = ops::batchnorm_eval(x, Tensor::vector({1, 2}), Tensor::vector({0, 1}), rm, rv, 0.0f);
  CHECK(y[0] == doctest::Approx(-0.5));
  CHECK(y[1] == doctest::Approx(0.5));
  CHECK(y[2] == doctest::Approx(-1.0));
  CHECK(y[3] == doctest::Approx(3.0));
  CHECK_THROWS_AS(ops::batchnorm_eval(x, Tensor::vector({1, 2, 3}), Tensor::vector({0, 1}), rm, rv), ConfigError);
}

TEST_CASE("batchnorm backward matches finite differences") {
  std::mt19937_64 rng(9);
  Tensor x = random_normal({2, 4, 6, 6}, 1.0f, rng);
  Tensor gamma = random_uniform({4, 1, 1, 1}, 0.5, 1.5, rng);
  Tensor beta = random_uniform({4, 1, 1, 1}, -0.5, 0.5, rng);
  for (auto mode : {ops::BnMode::Train, ops::BnMode::Eval}) {
    Tensor rm({4, 1, 1, 1}, 0.1f), rv({4, 1, 1, 1}, 0.9f);
    auto build = [&, mode](Tape& tape, std::vector<VarId>& in) {
      in = {tape.input(x), tape.input(gamma), tape.input(beta)};
      Tensor m = rm, v = rv;  // keep the running stats fixed across probes
      return ops::batchnorm(tape, in[0], in[1], in[2], m, v, mode);
    };
    CHECK(testutil::max_gradient_error(build, {&x, &gamma, &beta}) < 1e-2);
  }
}

TEST_CASE("add") {
  Tensor a = Tensor::vector({1, 2}), b = Tensor::vector({3, 4});
  const Tensor s = kernels::add(a, b);
  CHECK(s[0] == 4.0f);
  CHECK(s[1] == 6.0f);
  CHECK(max_abs_diff(kernels::add(a, Tensor(a.shape())), a) == 0.0f);
  CHECK_THROWS_AS(kernels::add(a, Tensor::vector({1, 2, 3})), ConfigError);
}

TEST_CASE("pixel_shuffle layout") {
  std::mt19937_64 rng(1);
  const Tensor x = random_uniform({1, 12, 5, 5}, -1, 1, rng);
  CHECK(kernels::pixel_shuffle(x, 2).shape() == Shape{1, 3, 10, 10});
  CHECK(max_abs_diff(kernels::pixel_shuffle(x, 1), x) == 0.0f);
  CHECK(max_abs_diff(kernels::pixel_unshuffle(kernels::pixel_shuffle(x, 2), 2), x) == 0.0f);

  const Tensor abcd({1, 4, 1, 1}, std::vector<float>{1, 2, 3, 4});
  const Tensor m = kernels::pixel_shuffle(abcd, 2);
  CHECK(m.at(0, 0, 0, 0) == 1.0f);
  CHECK(m.at(0, 0, 0, 1) == 2.0f);
  CHECK(m.at(0, 0, 1, 0) == 3.0f);
  CHECK(m.at(0, 0, 1, 1) == 4.0f);
  CHECK_THROWS_AS(kernels::pixel_shuffle(Tensor({1, 6, 2, 2}), 2), ConfigError);
}

TEST_CASE("pixel_shuffle backward is the inverse permutation") {
  std::mt19937_64 rng(3);
  Tensor x = random_uniform({2, 8, 3, 4}, -1, 1, rng);
  auto build = [&](Tape& tape, std::vector<VarId>& in) {
    in = {tape.input(x)};
    return ops::pixel_shuffle(tape, in[0], 2);
  };
  CHECK(testutil::max_gradient_error(build, {&x}) < 1e-2);
}

TEST_CASE("repeat_channels") {
  const Tensor ab({1, 2, 1, 1}, std::vector<float>{1, 2});
  const Tensor r = kernels::repeat_channels(ab, 2);
  CHECK(r.storage() == std::vector<float>{1, 2, 1, 2});
  CHECK(max_abs_diff(kernels::repeat_channels(ab, 1), ab) == 0.0f);
  CHECK_THROWS_AS(kernels::repeat_channels(ab, 0), ConfigError);

  Tape tape;
  const VarId x = tape.input(Tensor({1, 2, 2, 2}, 0.5f));
  const VarId y = ops::repeat_channels(tape, x, 3);
  // L1 against a far-away target gives a uniform upstream gradient 1/count.
  const VarId loss = ops::l1_loss(tape, y, tape.constant(Tensor(tape.value(y).shape(), -10.0f)));
  tape.backward(loss);
  const float g = 1.0f / static_cast<float>(tape.value(y).size());
  for (float v : tape.grad(x)) CHECK(v == doctest::Approx(3 * g));
}

TEST_CASE("l1_loss") {
  Tensor p = Tensor::vector({1, 2, 3, 4});
  CHECK(ops::l1_value(p, p) == 0.0f);
  Tensor t = Tensor::vector({0.5, 1.5, 2.5, 3.5});
  CHECK(ops::l1_value(p, t) == doctest::Approx(0.5));
  CHECK_THROWS_AS(ops::l1_value(p, Tensor::vector({1})), ConfigError);

  Tape tape;
  const VarId vp = tape.input(p);
  const VarId loss = ops::l1_loss(tape, vp, tape.constant(Tensor::vector({-1, 2, 3, 5})));
  tape.backward(loss);
  const auto g = tape.grad(vp);
  CHECK(g[0] == doctest::Approx(0.25));
  CHECK(g[1] == 0.0f);
  CHECK(g[3] == doctest::Approx(-0.25));
}

TEST_CASE("tape accumulates into bound parameters") {
  Parameter w{Tensor({1, 1, 1, 1}, 2.0f), true};
  w.value.enable_grad();
  Tape tape;
  const VarId x = tape.constant(Tensor({1, 1, 1, 1}, 3.0f));
  const VarId y = ops::conv2d(tape, x, tape.param(w), std::nullopt, 1, 0);
  const VarId loss = ops::l1_loss(tape, y, tape.constant(Tensor({1, 1, 1, 1}, 0.0f)));
  tape.backward(loss);
  CHECK(w.value.grad()[0] == doctest::Approx(3.0));
  tape.backward(loss);
  CHECK(w.value.grad()[0] == doctest::Approx(6.0));
}
