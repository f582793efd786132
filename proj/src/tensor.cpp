#include "binsr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "binsr/error.hpp"

namespace binsr {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) +
         ", " + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ConfigError("negative tensor extent " + shape.str());
  }
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match shape " + shape_.str());
  }
}

Tensor Tensor::vector(std::vector<float> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({n, 1, 1, 1}, std::move(values));
}

void Tensor::enable_grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0f);
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0f);
}

std::span<float> Tensor::grad() {
  enable_grad();
  return *grad_;
}

std::span<const float> Tensor::grad() const {
  if (!grad_) throw ConfigError("tensor has no gradient buffer");
  return *grad_;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor random_uniform(Shape shape, float lo, float hi, std::mt19937_64& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<float> dist(lo, hi);
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

Tensor random_normal(Shape shape, float stddev, std::mt19937_64& rng) {
  Tensor t(shape);
  std::normal_distribution<float> dist(0.0f, stddev);
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

Tensor random_signs(Shape shape, std::mt19937_64& rng) {
  Tensor t(shape);
  for (auto& v : t.storage()) v = (rng() & 1u) ? 1.0f : -1.0f;
  return t;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ConfigError("shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace binsr
