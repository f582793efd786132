#pragma once

#include <optional>

#include "binsr/tape.hpp"

// Differentiable operations recorded on a Tape.
namespace binsr::ops {

struct BatchNormOptions {
  float momentum = 0.9f;  // running = momentum * running + (1 - momentum) * batch
  float eps = 1e-5f;
};

enum class BnMode {
  Train,  // batch statistics, running statistics updated
  Eval,   // running statistics, treated as constants
};

VarId conv2d(Tape& tape, VarId x, VarId weight, std::optional<VarId> bias, int stride, int pad);

VarId batchnorm(Tape& tape, VarId x, VarId gamma, VarId beta, Tensor& running_mean,
                Tensor& running_var, BnMode mode, const BatchNormOptions& opts = {});

/// Inference-only batch norm with running statistics.
Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const Tensor& running_mean, const Tensor& running_var, float eps = 1e-5f);

VarId add(Tape& tape, VarId a, VarId b);
VarId pixel_shuffle(Tape& tape, VarId x, int r);
VarId repeat_channels(Tape& tape, VarId x, int k);

/// Mean absolute error; subgradient sign(pred - target) / count with 0 at ties.
VarId l1_loss(Tape& tape, VarId pred, VarId target);
float l1_value(const Tensor& pred, const Tensor& target);

}  // namespace binsr::ops
