#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace binsr {

/// NCHW extents. Weights reuse the same 4-tuple as (Cout, Cin, kh, kw) and
/// per-channel vectors are stored as (C, 1, 1, 1).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::array<int, 4> dims() const { return {n, c, h, w}; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major NCHW float tensor with an optional gradient buffer of the
/// same shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor vector(std::vector<float> values);
  static Tensor scalar(float v) { return Tensor({1, 1, 1, 1}, std::vector<float>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }
  const std::vector<float>& storage() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  bool has_grad() const { return grad_.has_value(); }
  /// Allocates a zeroed gradient buffer if none exists.
  void enable_grad();
  void zero_grad();
  std::span<float> grad();
  std::span<const float> grad() const;

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<float> data_;
  std::optional<std::vector<float>> grad_;
};

Tensor random_uniform(Shape shape, float lo, float hi, std::mt19937_64& rng);
Tensor random_normal(Shape shape, float stddev, std::mt19937_64& rng);
/// Entries drawn uniformly from {-1, +1}.
Tensor random_signs(Shape shape, std::mt19937_64& rng);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace binsr
