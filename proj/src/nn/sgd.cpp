#include "omnisal/nn/sgd.hpp"

#include <cmath>

#include "omnisal/error.hpp"

namespace omnisal::nn {

void SgdConfig::validate() const {
  if (!(base_lr > 0.0)) throw Error(Errc::InvalidArgument, "base_lr must be positive");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw Error(Errc::InvalidArgument, "lr_gamma must lie in (0, 1]");
  if (lr_step < 1) throw Error(Errc::InvalidArgument, "lr_step must be >= 1");
  if (batch_size < 1) throw Error(Errc::InvalidArgument, "batch_size must be >= 1");
  if (iterations < 0) throw Error(Errc::InvalidArgument, "iterations must be >= 0");
  if (weight_decay < 0.0) throw Error(Errc::InvalidArgument, "weight_decay must be >= 0");
}

double learning_rate(const SgdConfig& cfg, std::int64_t iteration) {
  return cfg.base_lr * std::pow(cfg.lr_gamma, static_cast<double>(iteration / cfg.lr_step));
}

void sgd_step(std::span<const ParamRef> params, const SgdConfig& cfg, std::int64_t iteration) {
  const double lr = learning_rate(cfg, iteration);
  for (const ParamRef& p : params) {
    require_same_shape(*p.value, *p.grad, "sgd_step");
    Tensor& v = *p.value;
    const Tensor& g = *p.grad;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * (g[i] + cfg.weight_decay * v[i]);
  }
}

}  // namespace omnisal::nn
