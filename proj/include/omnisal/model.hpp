#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omnisal/geometry.hpp"
#include "omnisal/nn/network.hpp"

namespace omnisal::model {

using nn::Tensor;

/// Layer tables of the two network stages.
///
/// The base stage is a VGG_CNN_M style front (conv1..conv3) followed by four
/// wide convolutions and an x4 transposed convolution. The refinement stage
/// sees the base output merged with two coordinate channels. Pooling rows
/// carry their real channel counts and conv9 uses padding 1 so the refinement
/// stage keeps its spatial size.
struct SalNetArchitecture {
  std::vector<nn::LayerSpec> base_layers;
  std::vector<nn::LayerSpec> refine_layers;
  nn::LayerSpec merge;  // base output (1) + theta + phi -> 3 channels

  static SalNetArchitecture standard();
  /// Every row in order: base stack, merge, refine stack.
  std::vector<nn::LayerSpec> table() const;
};

/// Per-pixel spherical coordinates rescaled to [-1, 1]:
/// theta in [-pi/2, 3pi/2) -> [-1, 1), phi in [-pi/2, pi/2] -> [-1, 1].
struct CoordChannels {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> theta_map;
  std::vector<double> phi_map;

  static CoordChannels from_coords(std::span<const geometry::SphericalCoord> coords, std::size_t width,
                                   std::size_t height);
  /// 1 x 2 x height x width tensor (theta channel first).
  Tensor to_tensor() const;
};

double rescale_theta(double theta);
double rescale_phi(double phi);

struct ShapeStep {
  std::string layer;
  std::size_t channels, height, width;
};

/// Symbolic activation shapes for an input of the given size, including the
/// raw deconvolution outputs and the resize steps back to the input size.
std::vector<ShapeStep> shape_chain(const SalNetArchitecture& arch, std::size_t height, std::size_t width);

class SalNet {
 public:
  SalNet();

  /// Random He-uniform initialisation. When `pretrained` names a weights
  /// directory, any conv1..conv3 tensors found there replace the random ones.
  static SalNet build(std::uint64_t seed, const std::optional<std::filesystem::path>& pretrained = {});

  const SalNetArchitecture& architecture() const { return arch_; }
  nn::Sequential& base() { return base_; }
  const nn::Sequential& base() const { return base_; }
  nn::Sequential& refine() { return refine_; }
  const nn::Sequential& refine() const { return refine_; }

  double image_mean() const { return image_mean_; }
  void set_image_mean(double mean) { image_mean_ = mean; }

  /// Base stage on normalized images (N x 3 x H x W): raw transposed
  /// convolution output resized to H x W and clamped at 0.
  Tensor forward_base(const Tensor& x) const;

  /// Full two-stage network. Output is N x 1 x H x W, clamped at 0 and
  /// divided by its per-sample maximum when that maximum is positive.
  Tensor forward_full(const Tensor& x, const Tensor& coords) const;
  Tensor forward_full(const Tensor& x, const CoordChannels& coords) const;

  /// The 3-channel tensor fed to the refinement stage.
  Tensor merge_input(const Tensor& x, const Tensor& coords) const;

  // Unclamped outputs plus the traces needed for backpropagation.
  struct BaseTrace {
    nn::Sequential::Trace base;
    std::size_t raw_h = 0, raw_w = 0;
  };
  struct FullTrace {
    BaseTrace base;
    nn::Sequential::Trace refine;
    std::size_t raw_h = 0, raw_w = 0;
  };
  Tensor base_raw(const Tensor& x, BaseTrace& trace) const;
  Tensor full_raw(const Tensor& x, const Tensor& coords, FullTrace& trace) const;
  void base_backward(const BaseTrace& trace, const Tensor& grad_out);
  void full_backward(const FullTrace& trace, const Tensor& grad_out);

  void zero_grad();
  std::vector<nn::ParamRef> parameters();
  std::vector<nn::ParamRef> base_parameters() { return base_.parameters(); }

 private:
  SalNetArchitecture arch_;
  nn::Sequential base_;
  nn::Sequential refine_;
  double image_mean_ = 127.5;
};

/// Writes manifest.txt plus one TEN1 file per weight tensor.
void save_weights(const SalNet& net, const std::filesystem::path& dir);
/// Throws IoError when the directory or manifest is missing, CorruptFile on
/// malformed content and ArchitectureMismatch when shapes disagree with the
/// standard architecture.
SalNet load_weights(const std::filesystem::path& dir);

/// Euclidean loss of the base stage against fixed targets.
class BaseStageLoss : public nn::Differentiable {
 public:
  BaseStageLoss(SalNet& net, Tensor input, Tensor target)
      : net_(net), input_(std::move(input)), target_(std::move(target)) {}
  double loss() override;
  double loss_and_gradients() override;
  std::vector<nn::ParamRef> parameters() override { return net_.base_parameters(); }

 private:
  SalNet& net_;
  Tensor input_, target_;
};

/// Euclidean loss at the refinement output; gradients flow through both stages.
class FullNetworkLoss : public nn::Differentiable {
 public:
  FullNetworkLoss(SalNet& net, Tensor input, Tensor coords, Tensor target)
      : net_(net), input_(std::move(input)), coords_(std::move(coords)), target_(std::move(target)) {}
  double loss() override;
  double loss_and_gradients() override;
  std::vector<nn::ParamRef> parameters() override { return net_.parameters(); }

 private:
  SalNet& net_;
  Tensor input_, coords_, target_;
};

}  // namespace omnisal::model
