#pragma once

#include <cstddef>

#include "dualscope/autodiff.hpp"

namespace dualscope {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// One bias-corrected Adam update of `param` from its current gradient.
/// Moments are updated in double and stored back in the element type.
template <typename T>
void adam_step(Parameter<T>& param, double lr, const AdamConfig& config = {});

/// Learning rate for a 0-based epoch: geometric interpolation from
/// `warm_lr` at epoch 0 to `fixed_lr` at `decay_epochs`, constant after.
///
///   lr(e) = warm_lr * (fixed_lr / warm_lr)^(e / decay_epochs)
///
/// Throws std::invalid_argument if decay_epochs is 0 or a rate is not positive.
double lr_schedule(std::size_t epoch, double warm_lr = 1e-2, double fixed_lr = 1e-5, std::size_t decay_epochs = 10);

extern template void adam_step(Parameter<float>&, double, const AdamConfig&);
extern template void adam_step(Parameter<double>&, double, const AdamConfig&);

}  // namespace dualscope
