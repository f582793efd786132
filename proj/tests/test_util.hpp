#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "binsr/ops.hpp"
#include "oracles.hpp"

namespace testutil {

using binsr::Tape;
using binsr::Tensor;
using binsr::VarId;

// Records an op on `tape`, appending its differentiable inputs to `in`.
using Builder = std::function<VarId(Tape& tape, std::vector<VarId>& in)>;

// Projects the output onto fixed random signs s and compares the tape's
// gradient of mean(s * out) against central differences in double.
inline double max_gradient_error(const Builder& build, const std::vector<Tensor*>& tensors) {
  Tape tape;
  std::vector<VarId> in;
  const VarId out = build(tape, in);
  const Tensor& y = tape.value(out);
  std::mt19937_64 rng(77);
  std::vector<float> s(y.size());
  Tensor target(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    s[i] = (rng() & 1) ? 1.0f : -1.0f;
    target[i] = y[i] - 5.0f * s[i];
  }
  tape.backward(binsr::ops::l1_loss(tape, out, tape.constant(target)));

  auto projected = [&] {
    Tape t;
    std::vector<VarId> unused;
    const Tensor& v = t.value(build(t, unused));
    double acc = 0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += s[i] * static_cast<double>(v[i]);
    return acc / static_cast<double>(v.size());
  };
  double worst = 0;
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto numeric = oracle::numeric_grad(*tensors[k], projected);
    worst = std::max(worst, oracle::rel_error(numeric, tape.grad(in[k])));
  }
  return worst;
}

// (mean, biased variance) per channel.
inline std::vector<std::pair<double, double>> channel_stats(const Tensor& t) {
  const auto& s = t.shape();
  std::vector<std::pair<double, double>> out;
  for (int c = 0; c < s.c; ++c) {
    double sum = 0, sq = 0;
    long count = 0;
    for (int n = 0; n < s.n; ++n)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const double v = t.at(n, c, y, x);
          sum += v;
          sq += v * v;
          ++count;
        }
    const double mean = sum / count;
    out.emplace_back(mean, sq / count - mean * mean);
  }
  return out;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("binsr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
