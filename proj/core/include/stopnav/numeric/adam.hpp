#pragma once

#include <span>

#include "stopnav/numeric/param_store.hpp"

namespace stopnav::numeric {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const AdamConfig& config);

/// One bias-corrected adaptive-moment step. `grads` is indexed like the
/// store's entries; an empty span means a zero gradient for that entry.
void adam_step(ParamStore& params, std::span<const std::span<const double>> grads, const AdamConfig& config);

/// Convenience overload keyed by parameter name; missing names count as zero.
void adam_step(ParamStore& params, const Gradients& grads, const AdamConfig& config);

}  // namespace stopnav::numeric
