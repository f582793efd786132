#include "binsr/interpreter.hpp"

#include <optional>
#include <string>

#include "binsr/bitplane.hpp"
#include "binsr/error.hpp"
#include "binsr/kernels.hpp"
#include "binsr/quantize.hpp"

namespace binsr {

namespace {

std::string where(const Node& n) {
  return "node " + std::to_string(n.id) + " (" + node_kind_name(n.kind) +
         (n.name.empty() ? "" : " " + n.name) + ")";
}

template <class Fn>
auto at_node(const Node& n, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(where(n) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(where(n) + ": " + e.what());
  }
}

void check_input(const Node& n, const Shape& s) {
  if (n.in_channels > 0 && s.c != n.in_channels) {
    throw ConfigError("expected " + std::to_string(n.in_channels) + " channels, got " + s.str());
  }
}

void check_conv(const Node& n, const Tensor& w) {
  const Shape s = w.shape();
  if (s.n != n.out_channels || s.c != n.in_channels || s.h != n.kernel || s.w != n.kernel) {
    throw ConfigError("weight " + s.str() + " does not match node geometry");
  }
}

}  // namespace

Tensor forward_eval(const LayerGraph& g, const ParamStore& params, const Tensor& x, bool packed) {
  g.validate();
  std::vector<std::optional<Tensor>> vals(g.size());
  for (NodeId id : g.topological_order()) {
    const Node& n = g.node(id);
    vals[id] = at_node(n, [&]() -> Tensor {
      const auto in = [&](std::size_t i) -> const Tensor& { return *vals[n.inputs[i]]; };
      switch (n.kind) {
        case NodeKind::Input:
          check_input(n, x.shape());
          return x;
        case NodeKind::Sign:
          return sign_forward(in(0));
        case NodeKind::BinConv: {
          const Tensor& w = params.at(n.name + ".weight").value;
          check_conv(n, w);
          const BinWeights bw = binarize_weights(w);
          if (packed) return xnor_conv(pack_bits(in(0), n.pad), pack_weights(bw), n.stride, n.pad);
          return binconv_forward(in(0), bw, n.stride, n.pad);
        }
        case NodeKind::FPConv: {
          const Tensor& w = params.at(n.name + ".weight").value;
          check_conv(n, w);
          const Tensor* b = n.bias ? &params.at(n.name + ".bias").value : nullptr;
          return kernels::conv2d_forward(in(0), w, b, n.stride, n.pad);
        }
        case NodeKind::BN:
          return ops::batchnorm_eval(in(0), params.at(n.name + ".weight").value,
                                     params.at(n.name + ".bias").value,
                                     params.at(n.name + ".running_mean").value,
                                     params.at(n.name + ".running_var").value);
        case NodeKind::Add:
          return kernels::add(in(0), in(1));
        case NodeKind::Repeat:
          return kernels::repeat_channels(in(0), n.factor);
        case NodeKind::PixelShuffle:
          return kernels::pixel_shuffle(in(0), n.factor);
        case NodeKind::Output:
          return in(0);
      }
      throw ConfigError("unhandled node kind");
    });
  }
  return *vals[g.output_id()];
}

VarId forward_train(Tape& tape, const LayerGraph& g, ParamStore& params, VarId x,
                    ops::BnMode bn_mode) {
  g.validate();
  std::vector<VarId> vars(g.size(), 0);
  for (NodeId id : g.topological_order()) {
    const Node& n = g.node(id);
    vars[id] = at_node(n, [&]() -> VarId {
      const auto in = [&](std::size_t i) { return vars[n.inputs[i]]; };
      switch (n.kind) {
        case NodeKind::Input:
          check_input(n, tape.value(x).shape());
          return x;
        case NodeKind::Sign:
          return ops::sign(tape, in(0), n.quantizer);
        case NodeKind::BinConv: {
          Parameter& w = params.at(n.name + ".weight");
          check_conv(n, w.value);
          return ops::binconv(tape, in(0), tape.param(w), n.stride, n.pad);
        }
        case NodeKind::FPConv: {
          Parameter& w = params.at(n.name + ".weight");
          check_conv(n, w.value);
          std::optional<VarId> b;
          if (n.bias) b = tape.param(params.at(n.name + ".bias"));
          return ops::conv2d(tape, in(0), tape.param(w), b, n.stride, n.pad);
        }
        case NodeKind::BN:
          return ops::batchnorm(tape, in(0), tape.param(params.at(n.name + ".weight")),
                                tape.param(params.at(n.name + ".bias")),
                                params.at(n.name + ".running_mean").value,
                                params.at(n.name + ".running_var").value, bn_mode);
        case NodeKind::Add:
          return ops::add(tape, in(0), in(1));
        case NodeKind::Repeat:
          return ops::repeat_channels(tape, in(0), n.factor);
        case NodeKind::PixelShuffle:
          return ops::pixel_shuffle(tape, in(0), n.factor);
        case NodeKind::Output:
          return in(0);
      }
      throw ConfigError("unhandled node kind");
    });
  }
  return vars[g.output_id()];
}

}  // namespace binsr
