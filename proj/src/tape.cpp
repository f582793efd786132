#include "binsr/tape.hpp"

#include <algorithm>

#include "binsr/error.hpp"

namespace binsr {

Parameter& ParamStore::add(const std::string& name, Tensor value, bool trainable) {
  auto [it, inserted] = params_.try_emplace(name, Parameter{std::move(value), trainable});
  if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
  if (trainable) it->second.value.enable_grad();
  return it->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) p.value.zero_grad();
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

const char* op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "Leaf";
    case OpKind::Conv2d: return "Conv2d";
    case OpKind::BatchNorm: return "BatchNorm";
    case OpKind::Add: return "Add";
    case OpKind::PixelShuffle: return "PixelShuffle";
    case OpKind::RepeatChannels: return "RepeatChannels";
    case OpKind::L1Loss: return "L1Loss";
    case OpKind::Sign: return "Sign";
    case OpKind::BinConv: return "BinConv";
  }
  return "?";
}

VarId Tape::push(Tensor value, bool requires_grad, Parameter* bound) {
  values_.push_back(std::move(value));
  requires_grad_.push_back(requires_grad ? 1 : 0);
  bound_.push_back(bound);
  return values_.size() - 1;
}

VarId Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

VarId Tape::input(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

VarId Tape::param(Parameter& p) {
  // The tape keeps its own copy of the value; gradients flow back to p.
  return push(p.value, p.trainable, p.trainable ? &p : nullptr);
}

VarId Tape::record(OpKind kind, Tensor value, std::vector<VarId> inputs, BackwardFn backward) {
  bool needs = false;
  for (VarId in : inputs) {
    if (in >= values_.size()) throw ConfigError("tape: input refers to a future value");
    needs = needs || requires_grad_[in];
  }
  const VarId out = push(std::move(value), needs, nullptr);
  if (needs) nodes_.push_back({kind, std::move(inputs), out, std::move(backward)});
  return out;
}

std::vector<float> Tape::grad(VarId v) const {
  if (v < grads_.size() && !grads_[v].empty()) return grads_[v];
  return std::vector<float>(values_.at(v).size(), 0.0f);
}

void Tape::backward(VarId loss) {
  if (values_.at(loss).size() != 1) {
    throw ConfigError("backward: loss must be a single element, got shape " +
                      values_[loss].shape().str());
  }
  grads_.assign(values_.size(), {});
  grads_[loss].assign(1, 1.0f);

  std::vector<std::span<float>> spans;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const auto& g_out = grads_[it->output];
    if (g_out.empty()) continue;
    spans.clear();
    for (VarId in : it->inputs) {
      if (!requires_grad_[in]) {
        spans.emplace_back();
        continue;
      }
      auto& g = grads_[in];
      if (g.empty()) g.assign(values_[in].size(), 0.0f);
      spans.emplace_back(g);
    }
    it->backward(g_out, spans);
  }

  for (VarId v = 0; v < values_.size(); ++v) {
    if (!bound_[v] || grads_[v].empty()) continue;
    auto dst = bound_[v]->value.grad();
    const auto& src = grads_[v];
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace binsr
