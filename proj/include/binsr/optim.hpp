#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "binsr/tape.hpp"

namespace binsr {

struct AdamMoments {
  std::vector<float> m;
  std::vector<float> v;
};

/// Adam with bias correction over every trainable entry of a ParamStore.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Throws NumericError naming the first tensor with a non-finite gradient;
  /// nothing is updated in that case.
  void step(ParamStore& params, double lr);

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  std::map<std::string, AdamMoments>& moments() { return moments_; }
  const std::map<std::string, AdamMoments>& moments() const { return moments_; }

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::map<std::string, AdamMoments> moments_;
};

}  // namespace binsr
