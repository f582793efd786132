#pragma once

#include "binsr/graph.hpp"
#include "binsr/ops.hpp"
#include "binsr/tape.hpp"

namespace binsr {

/// Inference pass in topological order. BN uses running statistics. With
/// `packed`, every BinConv runs through pack_bits + xnor_conv instead of the
/// dense float kernel. Errors name the failing node.
Tensor forward_eval(const LayerGraph& g, const ParamStore& params, const Tensor& x,
                    bool packed = false);

/// Records the graph on `tape` and returns the output value. In BnMode::Train
/// the BN running statistics in `params` are updated.
VarId forward_train(Tape& tape, const LayerGraph& g, ParamStore& params, VarId x,
                    ops::BnMode bn_mode = ops::BnMode::Train);

}  // namespace binsr
