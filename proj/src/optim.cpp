#include "binsr/optim.hpp"

#include <cmath>
#include <utility>

#include "binsr/error.hpp"

namespace binsr {

void Adam::step(ParamStore& params, double lr) {
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    for (float g : p.value.grad())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + name + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    AdamMoments& mom = moments_[name];
    const std::size_t n = p.value.size();
    if (mom.m.size() != n) {
      mom.m.assign(n, 0.0f);
      mom.v.assign(n, 0.0f);
    }
    std::span<const float> g = std::as_const(p.value).grad();
    std::span<float> w = p.value.data();
    for (std::size_t i = 0; i < n; ++i) {
      mom.m[i] = b1 * mom.m[i] + (1.0f - b1) * g[i];
      mom.v[i] = b2 * mom.v[i] + (1.0f - b2) * g[i] * g[i];
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

}  // namespace binsr
