#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "binsr/tensor.hpp"

namespace binsr {

/// A named tensor owned by a model. Trainable parameters accumulate gradients
/// into value.grad(); non-trainable entries (BN running statistics) do not.
struct Parameter {
  Tensor value;
  bool trainable = true;
};

class ParamStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  /// Number of scalar trainable parameters.
  std::size_t trainable_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Parameter> params_;
};

using VarId = std::size_t;

enum class OpKind { Leaf, Conv2d, BatchNorm, Add, PixelShuffle, RepeatChannels, L1Loss, Sign, BinConv };

const char* op_kind_name(OpKind kind);

/// Receives dL/d(output) and one accumulate-only span per input. Spans for
/// inputs that do not require a gradient are empty.
using BackwardFn =
    std::function<void(std::span<const float> grad_out, std::span<const std::span<float>> grad_in)>;

struct TapeNode {
  OpKind kind = OpKind::Leaf;
  std::vector<VarId> inputs;
  VarId output = 0;
  BackwardFn backward;
};

/// Sequential reverse-mode tape for one training step.
///
/// backward() computes gradients of intermediate values into fresh scratch
/// buffers and then adds leaf gradients into the bound parameters, so running
/// it twice from the same loss doubles every parameter gradient.
class Tape {
 public:
  VarId constant(Tensor value);
  VarId input(Tensor value, bool requires_grad = true);
  VarId param(Parameter& p);

  VarId record(OpKind kind, Tensor value, std::vector<VarId> inputs, BackwardFn backward);

  const Tensor& value(VarId v) const { return values_.at(v); }
  bool requires_grad(VarId v) const { return requires_grad_.at(v) != 0; }
  /// Gradient from the most recent backward(); zeros if no gradient reached v.
  std::vector<float> grad(VarId v) const;

  void backward(VarId loss);

  std::size_t num_values() const { return values_.size(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }

 private:
  VarId push(Tensor value, bool requires_grad, Parameter* bound);

  std::vector<Tensor> values_;
  std::vector<char> requires_grad_;
  std::vector<Parameter*> bound_;
  std::vector<TapeNode> nodes_;
  std::vector<std::vector<float>> grads_;
};

}  // namespace binsr
