#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnisal/nn/layers.hpp"
#include "omnisal/nn/tensor.hpp"

namespace omnisal::nn {

enum class LayerKind { conv, maxpool, deconv, relu, merge };
enum class Activation { none, relu };

const char* to_string(LayerKind kind);
const char* to_string(Activation act);

/// One row of a layer table. Pooling and merge rows carry their actual
/// channel counts; merge rows are bookkeeping only and never instantiated
/// inside a Sequential.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  int in_depth = 0;
  int out_depth = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  Activation activation = Activation::none;

  /// Throws InvalidArgument unless kernel, stride >= 1 and padding >= 0.
  void validate() const;
  bool has_weights() const { return kind == LayerKind::conv || kind == LayerKind::deconv; }
  std::vector<std::size_t> weight_shape() const;
  std::vector<std::size_t> bias_shape() const;

  bool operator==(const LayerSpec&) const = default;
};

struct Layer {
  LayerSpec spec;
  Tensor weight;
  Tensor bias;
  Tensor grad_weight;
  Tensor grad_bias;
};

/// Non-owning view of a trainable tensor and its gradient.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// Feed-forward chain of conv / pool / deconv / relu layers.
class Sequential {
 public:
  /// Per-layer inputs and intermediate values recorded by forward().
  struct Trace {
    std::vector<Tensor> inputs;      // input of each layer
    std::vector<Tensor> pre_act;     // conv/deconv output before activation
    std::vector<PoolResult> pools;   // one slot per layer, used by pools only
    Tensor output;
  };

  Sequential() = default;
  explicit Sequential(std::vector<LayerSpec> specs);

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  void init_he_uniform(std::uint64_t seed);

  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Trace& trace) const;
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
  Tensor backward(const Trace& trace, const Tensor& grad_output);

  void zero_grad();
  std::vector<ParamRef> parameters();
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  std::vector<Layer> layers_;
};

/// Anything exposing a scalar loss, its analytic gradients and parameters.
class Differentiable {
 public:
  virtual ~Differentiable() = default;
  virtual double loss() = 0;
  /// Recomputes the loss and overwrites every parameter gradient.
  virtual double loss_and_gradients() = 0;
  virtual std::vector<ParamRef> parameters() = 0;
};

struct GradientCheckOptions {
  double epsilon = 1e-6;
  std::size_t samples_per_tensor = 6;
  std::uint64_t seed = 7;
  /// Denominator floor of the relative error.
  double abs_floor = 1e-8;
  /// Skips probes whose one-sided differences disagree by more than this
  /// relative amount, i.e. probes straddling a ReLU kink or pooling tie.
  double kink_tolerance = 1e-2;
};

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central-difference check of sampled parameters:
/// |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
/// Throws InvalidArgument when epsilon <= 0.
GradientCheckResult gradient_check(Differentiable& model, const GradientCheckOptions& options = {});

/// Sequential network followed by a Euclidean loss against a fixed target.
class SequentialLoss : public Differentiable {
 public:
  SequentialLoss(Sequential& net, Tensor input, Tensor target)
      : net_(net), input_(std::move(input)), target_(std::move(target)) {}
  double loss() override;
  double loss_and_gradients() override;
  std::vector<ParamRef> parameters() override { return net_.parameters(); }

 private:
  Sequential& net_;
  Tensor input_;
  Tensor target_;
};

}  // namespace omnisal::nn
