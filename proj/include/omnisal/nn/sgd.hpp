#pragma once

#include <cstdint>
#include <span>

#include "omnisal/nn/network.hpp"

namespace omnisal::nn {

struct SgdConfig {
  double base_lr = 1.3e-7;
  double lr_gamma = 0.7;
  std::int64_t lr_step = 500;
  double weight_decay = 5e-4;
  std::size_t batch_size = 5;
  std::int64_t iterations = 22000;

  /// Throws InvalidArgument unless base_lr > 0, 0 < lr_gamma <= 1,
  /// lr_step >= 1, batch_size >= 1 and iterations >= 0.
  void validate() const;
};

/// Step schedule: base_lr * lr_gamma ^ floor(iteration / lr_step).
double learning_rate(const SgdConfig& cfg, std::int64_t iteration);

/// p <- p - lr(t) * (g + weight_decay * p) for every parameter.
void sgd_step(std::span<const ParamRef> params, const SgdConfig& cfg, std::int64_t iteration);

}  // namespace omnisal::nn
