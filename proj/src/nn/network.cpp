#include "omnisal/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "omnisal/error.hpp"

namespace omnisal::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::deconv: return "deconv";
    case LayerKind::relu: return "relu";
    case LayerKind::merge: return "merge";
  }
  return "?";
}

const char* to_string(Activation act) { return act == Activation::relu ? "relu" : "none"; }

void LayerSpec::validate() const {
  if (kernel < 1 || stride < 1 || padding < 0)
    throw Error(Errc::InvalidArgument, name + ": kernel and stride must be >= 1, padding >= 0");
  if (has_weights() && (in_depth < 1 || out_depth < 1))
    throw Error(Errc::InvalidArgument, name + ": depths must be positive");
}

std::vector<std::size_t> LayerSpec::weight_shape() const {
  return {static_cast<std::size_t>(out_depth), static_cast<std::size_t>(in_depth),
          static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)};
}

std::vector<std::size_t> LayerSpec::bias_shape() const { return {static_cast<std::size_t>(out_depth)}; }

Sequential::Sequential(std::vector<LayerSpec> specs) {
  for (auto& spec : specs) {
    spec.validate();
    if (spec.kind == LayerKind::merge)
      throw Error(Errc::InvalidArgument, "merge rows cannot live inside a Sequential");
    Layer layer{spec, {}, {}, {}, {}};
    if (spec.has_weights()) {
      layer.weight = Tensor(spec.weight_shape());
      layer.bias = Tensor(spec.bias_shape());
      layer.grad_weight = Tensor(spec.weight_shape());
      layer.grad_bias = Tensor(spec.bias_shape());
    }
    layers_.push_back(std::move(layer));
  }
}

void Sequential::init_he_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    if (!layer.spec.has_weights()) continue;
    // Fan-in of a transposed convolution: each output sees in_depth * (k / s)^2 inputs.
    double fan_in = static_cast<double>(layer.spec.in_depth) * layer.spec.kernel * layer.spec.kernel;
    if (layer.spec.kind == LayerKind::deconv)
      fan_in /= static_cast<double>(layer.spec.stride) * layer.spec.stride;
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : layer.weight.values()) v = dist(rng);
    layer.bias.fill(0.0);
  }
}

Tensor Sequential::forward(const Tensor& x) const {
  Trace trace;
  return forward(x, trace);
}

Tensor Sequential::forward(const Tensor& x, Trace& trace) const {
  trace.inputs.clear();
  trace.pre_act.assign(layers_.size(), Tensor());
  trace.pools.assign(layers_.size(), PoolResult());
  Tensor cur = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    trace.inputs.push_back(cur);
    switch (l.spec.kind) {
      case LayerKind::conv:
      case LayerKind::deconv: {
        Tensor y = l.spec.kind == LayerKind::conv
                       ? conv2d_forward(cur, l.weight, l.bias, l.spec.stride, l.spec.padding)
                       : deconv2d_forward(cur, l.weight, l.bias, l.spec.stride, l.spec.padding);
        if (l.spec.activation == Activation::relu) {
          trace.pre_act[i] = y;
          cur = relu(y);
        } else {
          cur = std::move(y);
        }
        break;
      }
      case LayerKind::maxpool:
        trace.pools[i] = maxpool_forward(cur, l.spec.kernel, l.spec.stride);
        cur = trace.pools[i].out;
        break;
      case LayerKind::relu:
        cur = relu(cur);
        break;
      case LayerKind::merge:
        break;
    }
  }
  trace.output = cur;
  return cur;
}

Tensor Sequential::backward(const Trace& trace, const Tensor& grad_output) {
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Layer& l = layers_[i];
    switch (l.spec.kind) {
      case LayerKind::conv:
      case LayerKind::deconv: {
        if (l.spec.activation == Activation::relu) g = relu_backward(trace.pre_act[i], g);
        ParamGrads pg = l.spec.kind == LayerKind::conv
                            ? conv2d_backward(trace.inputs[i], l.weight, g, l.spec.stride, l.spec.padding)
                            : deconv2d_backward(trace.inputs[i], l.weight, g, l.spec.stride, l.spec.padding);
        for (std::size_t k = 0; k < pg.grad_w.size(); ++k) l.grad_weight[k] += pg.grad_w[k];
        for (std::size_t k = 0; k < pg.grad_b.size(); ++k) l.grad_bias[k] += pg.grad_b[k];
        g = std::move(pg.grad_x);
        break;
      }
      case LayerKind::maxpool:
        g = maxpool_backward(trace.pools[i], g);
        break;
      case LayerKind::relu:
        g = relu_backward(trace.inputs[i], g);
        break;
      case LayerKind::merge:
        break;
    }
  }
  return g;
}

void Sequential::zero_grad() {
  for (auto& l : layers_) {
    if (!l.spec.has_weights()) continue;
    l.grad_weight.fill(0.0);
    l.grad_bias.fill(0.0);
  }
}

std::vector<ParamRef> Sequential::parameters() {
  std::vector<ParamRef> params;
  for (auto& l : layers_) {
    if (!l.spec.has_weights()) continue;
    params.push_back({l.spec.name + ".w", &l.weight, &l.grad_weight});
    params.push_back({l.spec.name + ".b", &l.bias, &l.grad_bias});
  }
  return params;
}

double SequentialLoss::loss() { return euclidean_loss(net_.forward(input_), target_).loss; }

double SequentialLoss::loss_and_gradients() {
  Sequential::Trace trace;
  const Tensor out = net_.forward(input_, trace);
  LossResult r = euclidean_loss(out, target_);
  net_.zero_grad();
  net_.backward(trace, r.grad);
  return r.loss;
}

GradientCheckResult gradient_check(Differentiable& model, const GradientCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw Error(Errc::InvalidArgument, "gradient check needs epsilon > 0");
  model.loss_and_gradients();
  std::vector<ParamRef> params = model.parameters();
  // Snapshot analytic gradients; probing perturbs values only.
  std::vector<Tensor> analytic;
  for (const auto& p : params) analytic.push_back(*p.grad);

  std::mt19937_64 rng(options.seed);
  GradientCheckResult result;
  const double eps = options.epsilon;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& value = *params[t].value;
    const std::size_t probes = std::min(options.samples_per_tensor, value.size());
    std::vector<std::size_t> idx(value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t s = 0; s < probes; ++s) {
      const std::size_t i = idx[s];
      const double saved = value[i];
      const double f0 = model.loss();
      value[i] = saved + eps;
      const double fp = model.loss();
      value[i] = saved - eps;
      const double fm = model.loss();
      value[i] = saved;

      const double forward = (fp - f0) / eps;
      const double backward = (f0 - fm) / eps;
      const double scale = std::max({std::abs(forward), std::abs(backward), options.abs_floor});
      if (std::abs(forward - backward) / scale > options.kink_tolerance) {
        ++result.skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[t][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = params[t].name;
      }
    }
  }
  return result;
}

}  // namespace omnisal::nn
