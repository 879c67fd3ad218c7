#include "omnisal/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "omnisal/error.hpp"
#include "omnisal/nn/tensor_io.hpp"

namespace omnisal::model {

using nn::Activation;
using nn::LayerKind;
using nn::LayerSpec;

SalNetArchitecture SalNetArchitecture::standard() {
  const auto conv = [](const char* name, int in, int out, int k, int p) {
    return LayerSpec{name, LayerKind::conv, in, out, k, 1, p, Activation::relu};
  };
  const auto pool = [](const char* name, int depth) {
    return LayerSpec{name, LayerKind::maxpool, depth, depth, 3, 2, 0, Activation::none};
  };
  const auto deconv = [](const char* name, int k, int s, int p) {
    return LayerSpec{name, LayerKind::deconv, 1, 1, k, s, p, Activation::none};
  };
  SalNetArchitecture a;
  a.base_layers = {conv("conv1", 3, 96, 7, 3),    pool("pool1", 96),
                   conv("conv2", 96, 256, 5, 2),  pool("pool2", 256),
                   conv("conv3", 256, 512, 3, 1), conv("conv4", 512, 256, 5, 2),
                   conv("conv5", 256, 128, 7, 3), conv("conv6", 128, 32, 11, 5),
                   conv("conv7", 32, 1, 13, 6),   deconv("deconv1", 8, 4, 2)};
  a.merge = LayerSpec{"merge", LayerKind::merge, 3, 3, 1, 1, 0, Activation::none};
  a.refine_layers = {conv("conv8", 3, 32, 5, 2),   pool("pool3", 32),
                     conv("conv9", 32, 64, 3, 1),  conv("conv10", 64, 32, 5, 2),
                     conv("conv11", 32, 1, 7, 3),  deconv("deconv2", 4, 2, 1)};
  return a;
}

std::vector<LayerSpec> SalNetArchitecture::table() const {
  std::vector<LayerSpec> rows = base_layers;
  rows.push_back(merge);
  rows.insert(rows.end(), refine_layers.begin(), refine_layers.end());
  return rows;
}

double rescale_theta(double theta) { return (theta + geometry::kPi / 2) / geometry::kPi - 1.0; }
double rescale_phi(double phi) { return phi / (geometry::kPi / 2); }

CoordChannels CoordChannels::from_coords(std::span<const geometry::SphericalCoord> coords, std::size_t width,
                                         std::size_t height) {
  if (coords.size() != width * height)
    throw Error(Errc::ShapeMismatch, "coordinate raster does not match the patch size");
  CoordChannels c{width, height, {}, {}};
  c.theta_map.reserve(coords.size());
  c.phi_map.reserve(coords.size());
  for (const auto& s : coords) {
    c.theta_map.push_back(rescale_theta(s.theta));
    c.phi_map.push_back(rescale_phi(s.phi));
  }
  return c;
}

Tensor CoordChannels::to_tensor() const {
  Tensor t({1, 2, height, width});
  std::copy(theta_map.begin(), theta_map.end(), t.data());
  std::copy(phi_map.begin(), phi_map.end(), t.data() + width * height);
  return t;
}

std::vector<ShapeStep> shape_chain(const SalNetArchitecture& arch, std::size_t height, std::size_t width) {
  std::vector<ShapeStep> chain;
  std::size_t c = 3, h = height, w = width;
  const auto run = [&](const std::vector<LayerSpec>& layers) {
    for (const auto& l : layers) {
      switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::maxpool:
          h = static_cast<std::size_t>(nn::conv_out_size(static_cast<int>(h), l.kernel, l.stride, l.padding));
          w = static_cast<std::size_t>(nn::conv_out_size(static_cast<int>(w), l.kernel, l.stride, l.padding));
          break;
        case LayerKind::deconv:
          h = static_cast<std::size_t>(nn::deconv_out_size(static_cast<int>(h), l.kernel, l.stride, l.padding));
          w = static_cast<std::size_t>(nn::deconv_out_size(static_cast<int>(w), l.kernel, l.stride, l.padding));
          break;
        default:
          break;
      }
      c = static_cast<std::size_t>(l.out_depth);
      chain.push_back({l.name, c, h, w});
    }
  };
  run(arch.base_layers);
  chain.push_back({"resize1", 1, height, width});
  chain.push_back({arch.merge.name, 3, height, width});
  c = 3, h = height, w = width;
  run(arch.refine_layers);
  chain.push_back({"resize2", 1, height, width});
  return chain;
}

SalNet::SalNet()
    : arch_(SalNetArchitecture::standard()), base_(arch_.base_layers), refine_(arch_.refine_layers) {}

namespace {

struct ManifestEntry {
  std::string kind;
  std::vector<std::size_t> shape;
};

struct Manifest {
  double image_mean = 127.5;
  std::map<std::string, ManifestEntry> tensors;
};

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> shape;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw Error(Errc::CorruptFile, "bad shape '" + s + "' in manifest");
    shape.push_back(std::stoul(part));
  }
  return shape;
}

Manifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "omnisal-weights 1")
    throw Error(Errc::CorruptFile, path.string() + ": unrecognised header");
  Manifest m;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "image_mean") {
      if (!(ls >> m.image_mean)) throw Error(Errc::CorruptFile, "bad image_mean line");
    } else if (key == "tensor") {
      std::string name, kind, shape;
      if (!(ls >> name >> kind >> shape)) throw Error(Errc::CorruptFile, "bad tensor line: " + line);
      m.tensors[name] = {kind, parse_shape(shape)};
    } else {
      throw Error(Errc::CorruptFile, "unknown manifest key '" + key + "'");
    }
  }
  return m;
}

const char* kind_of(const std::string& param_name, const SalNet& net) {
  const std::string layer = param_name.substr(0, param_name.find('.'));
  for (const auto& spec : net.architecture().table())
    if (spec.name == layer) return nn::to_string(spec.kind);
  return "?";
}

// Copies manifest tensors into `net`. With `required` every parameter must
// be present; otherwise only parameters accepted by `wanted` and present
// in the manifest are replaced.
template <typename Pred>
void load_into(SalNet& net, const std::filesystem::path& dir, bool required, Pred wanted) {
  const Manifest m = read_manifest(dir);
  for (const nn::ParamRef& p : net.parameters()) {
    if (!wanted(p.name)) continue;
    auto it = m.tensors.find(p.name);
    if (it == m.tensors.end()) {
      if (required) throw Error(Errc::ArchitectureMismatch, "manifest lacks " + p.name);
      continue;
    }
    if (it->second.shape != p.value->shape() || it->second.kind != kind_of(p.name, net))
      throw Error(Errc::ArchitectureMismatch,
                  p.name + ": manifest has " + it->second.kind + " " + nn::shape_string(it->second.shape) +
                      ", architecture expects " + kind_of(p.name, net) + " " +
                      nn::shape_string(p.value->shape()));
    Tensor t = nn::read_tensor(dir / (p.name + ".ten"));
    if (t.shape() != p.value->shape())
      throw Error(Errc::CorruptFile, p.name + ": tensor file disagrees with manifest");
    *p.value = std::move(t);
  }
  if (required) net.set_image_mean(m.image_mean);
}

}  // namespace

SalNet SalNet::build(std::uint64_t seed, const std::optional<std::filesystem::path>& pretrained) {
  SalNet net;
  net.base_.init_he_uniform(seed);
  net.refine_.init_he_uniform(seed ^ 0x9e3779b97f4a7c15ULL);
  if (pretrained) {
    load_into(net, *pretrained, false, [](const std::string& name) {
      return name.rfind("conv1.", 0) == 0 || name.rfind("conv2.", 0) == 0 || name.rfind("conv3.", 0) == 0;
    });
  }
  return net;
}

Tensor SalNet::base_raw(const Tensor& x, BaseTrace& trace) const {
  nn::require_rank4(x, "forward_base");
  if (x.c() != 3) throw Error(Errc::ShapeMismatch, "base stage expects 3 input channels");
  Tensor raw = base_.forward(x, trace.base);
  trace.raw_h = raw.h();
  trace.raw_w = raw.w();
  return nn::resize_bilinear(raw, x.h(), x.w());
}

Tensor SalNet::full_raw(const Tensor& x, const Tensor& coords, FullTrace& trace) const {
  nn::require_rank4(coords, "forward_full");
  if (coords.c() != 2 || coords.n() != x.n() || coords.h() != x.h() || coords.w() != x.w())
    throw Error(Errc::ShapeMismatch, "coordinate channels " + nn::shape_string(coords.shape()) +
                                         " do not match input " + nn::shape_string(x.shape()));
  const Tensor b = base_raw(x, trace.base);
  Tensor raw = refine_.forward(nn::concat_channels(b, coords), trace.refine);
  trace.raw_h = raw.h();
  trace.raw_w = raw.w();
  return nn::resize_bilinear(raw, x.h(), x.w());
}

void SalNet::base_backward(const BaseTrace& trace, const Tensor& grad_out) {
  base_.backward(trace.base, nn::resize_bilinear_backward(grad_out, trace.raw_h, trace.raw_w));
}

void SalNet::full_backward(const FullTrace& trace, const Tensor& grad_out) {
  const Tensor g_merge =
      refine_.backward(trace.refine, nn::resize_bilinear_backward(grad_out, trace.raw_h, trace.raw_w));
  // Channel 0 of the merge input is the base output; the coordinate channels are constants.
  Tensor g_base({g_merge.n(), 1, g_merge.h(), g_merge.w()});
  const std::size_t plane = g_merge.h() * g_merge.w();
  for (std::size_t n = 0; n < g_merge.n(); ++n)
    std::copy_n(g_merge.data() + n * g_merge.c() * plane, plane, g_base.data() + n * plane);
  base_backward(trace.base, g_base);
}

Tensor SalNet::forward_base(const Tensor& x) const {
  BaseTrace trace;
  Tensor out = base_raw(x, trace);
  for (double& v : out.values()) v = std::max(v, 0.0);
  return out;
}

Tensor SalNet::merge_input(const Tensor& x, const Tensor& coords) const {
  BaseTrace trace;
  return nn::concat_channels(base_raw(x, trace), coords);
}

Tensor SalNet::forward_full(const Tensor& x, const Tensor& coords) const {
  FullTrace trace;
  Tensor out = full_raw(x, coords, trace);
  const std::size_t plane = out.h() * out.w();
  for (std::size_t n = 0; n < out.n(); ++n) {
    double* p = out.data() + n * plane;
    double peak = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      p[i] = std::max(p[i], 0.0);
      peak = std::max(peak, p[i]);
    }
    if (peak > 0.0)
      for (std::size_t i = 0; i < plane; ++i) p[i] /= peak;
  }
  return out;
}

Tensor SalNet::forward_full(const Tensor& x, const CoordChannels& coords) const {
  return forward_full(x, coords.to_tensor());
}

void SalNet::zero_grad() {
  base_.zero_grad();
  refine_.zero_grad();
}

std::vector<nn::ParamRef> SalNet::parameters() {
  std::vector<nn::ParamRef> params = base_.parameters();
  for (auto& p : refine_.parameters()) params.push_back(p);
  return params;
}

void save_weights(const SalNet& net, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string());
  std::ostringstream manifest;
  char mean[64];
  std::snprintf(mean, sizeof mean, "%.17g", net.image_mean());
  manifest << "omnisal-weights 1\n" << "image_mean " << mean << "\n";
  for (const nn::Sequential* stage : {&net.base(), &net.refine()}) {
    for (const nn::Layer& l : stage->layers()) {
      if (!l.spec.has_weights()) continue;
      for (const auto& [suffix, tensor] : {std::pair{".w", &l.weight}, std::pair{".b", &l.bias}}) {
        const std::string name = l.spec.name + suffix;
        manifest << "tensor " << name << " " << nn::to_string(l.spec.kind) << " "
                 << nn::shape_string(tensor->shape()) << "\n";
        nn::write_tensor(dir / (name + ".ten"), *tensor);
      }
    }
  }
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write manifest in " + dir.string());
  out << manifest.str();
}

SalNet load_weights(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(Errc::IoError, "no weights directory " + dir.string());
  SalNet net;
  load_into(net, dir, true, [](const std::string&) { return true; });
  return net;
}

double BaseStageLoss::loss() {
  SalNet::BaseTrace trace;
  return nn::euclidean_loss(net_.base_raw(input_, trace), target_).loss;
}

double BaseStageLoss::loss_and_gradients() {
  SalNet::BaseTrace trace;
  nn::LossResult r = nn::euclidean_loss(net_.base_raw(input_, trace), target_);
  net_.base().zero_grad();
  net_.base_backward(trace, r.grad);
  return r.loss;
}

double FullNetworkLoss::loss() {
  SalNet::FullTrace trace;
  return nn::euclidean_loss(net_.full_raw(input_, coords_, trace), target_).loss;
}

double FullNetworkLoss::loss_and_gradients() {
  SalNet::FullTrace trace;
  nn::LossResult r = nn::euclidean_loss(net_.full_raw(input_, coords_, trace), target_);
  net_.zero_grad();
  net_.full_backward(trace, r.grad);
  return r.loss;
}

}  // namespace omnisal::model
