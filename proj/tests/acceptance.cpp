// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented
// underneath. Tolerances and runtime budgets are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "omnisal/cli.hpp"
#include "omnisal/config.hpp"
#include "omnisal/data.hpp"
#include "omnisal/geometry.hpp"
#include "omnisal/metrics.hpp"
#include "omnisal/model.hpp"
#include "omnisal/nn/layers.hpp"
#include "omnisal/nn/sgd.hpp"
#include "omnisal/raster_io.hpp"
#include "omnisal/train.hpp"

using namespace omnisal;
namespace fs = std::filesystem;
using nn::Tensor;

namespace {

constexpr double kPi = geometry::kPi;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok   " : "MISS ") + what);
  }
  void info(const std::string& what) { notes.push_back("info " + what); }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); }

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// Central differences of <g, op(t)> with respect to every element of t.
Tensor numeric_grad(Tensor t, const Tensor& g, const std::function<Tensor(const Tensor&)>& op, double eps = 1e-6) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double keep = t[i];
    t[i] = keep + eps;
    const Tensor plus = op(t);
    t[i] = keep - eps;
    const Tensor minus = op(t);
    t[i] = keep;
    double d = 0;
    for (std::size_t j = 0; j < g.size(); ++j) d += g[j] * (plus[j] - minus[j]);
    out[i] = d / (2 * eps);
  }
  return out;
}

double worst(const Tensor& analytic, const Tensor& numeric) {
  double m = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) m = std::max(m, rel_err(analytic[i], numeric[i]));
  return m;
}

struct Workspace {
  fs::path root;
  Workspace() : root(fs::temp_directory_path() / ("omnisal_acceptance_" + std::to_string(::getpid()))) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
};

// ---------------------------------------------------------------------------

Outcome projection_exactness() {
  Outcome o;
  struct Case {
    double theta, phi;
    int w, h;
    double x, y;
  };
  // The third point follows from the formula: 100 * (0 + pi/2) / (2 pi) = 25.
  const Case cases[] = {{-kPi / 2, kPi / 2, 360, 180, 0, 0},
                        {kPi / 2, 0, 360, 180, 180, 90},
                        {0, -kPi / 2, 100, 50, 25, 50}};
  double err = 0;
  for (const auto& c : cases) {
    const auto p = geometry::sphere_to_equirect({c.theta, c.phi}, c.w, c.h);
    err = std::max({err, std::abs(p.x - c.x), std::abs(p.y - c.y)});
  }
  o.require(err < 1e-12, fmt("substitution examples, max error %.3g px (< 1e-12)", err));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ut(-kPi / 2, 3 * kPi / 2), up(-kPi / 2 + 1e-6, kPi / 2 - 1e-6);
  double round_trip = 0;
  for (int i = 0; i < 10000; ++i) {
    const int w = 512, h = 256;
    const geometry::SphericalCoord c{ut(rng), up(rng)};
    const auto p = geometry::sphere_to_equirect(c, w, h);
    const auto back = geometry::sphere_to_equirect(geometry::equirect_to_sphere(p.x, p.y, w, h), w, h);
    double dx = std::abs(back.x - p.x);
    dx = std::min(dx, w - dx);
    round_trip = std::max({round_trip, dx, std::abs(back.y - p.y)});
  }
  o.require(round_trip < 1e-9, fmt("sphere/pixel round trip over 1e4 points, max error %.3g px (< 1e-9)", round_trip));
  return o;
}

Outcome coverage() {
  Outcome o;
  const int w = 512, h = 256, patch = 512;
  const auto views = geometry::six_fixed_frustums(kPi / 2, patch, patch);
  std::size_t uncovered = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto c = geometry::pixel_center_direction(x, y, w, h);
      if (std::none_of(views.begin(), views.end(), [&](const auto& f) { return geometry::contains(f, c); }))
        ++uncovered;
    }
  o.require(uncovered == 0, fmt("pixels of a 512x256 panorama outside all six 90 deg views: %.0f (== 0)", uncovered));

  geometry::SplatCanvas canvas(w, h);
  for (const auto& f : views) {
    const Raster ones(f.out_w, f.out_h, 1, 1.0f);
    canvas.splat(ones, geometry::patch_pixel_directions(f));
  }
  const auto map = canvas.resolve();
  const std::size_t holes = map.hole_count();
  double min_hole_lat = 90;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!map.valid[static_cast<std::size_t>(y) * w + x])
        min_hole_lat = std::min(min_hole_lat, std::abs(geometry::pixel_center_direction(x, y, w, h).phi) * 180 / kPi);
  o.require(holes == 0, fmt("holes after splatting six 512x512 patches: %.0f (== 0)", holes));
  if (holes > 0)
    o.info(fmt("every hole lies at |latitude| >= %.2f deg, where equirect cells shrink with cos(latitude)",
               min_hole_lat));
  return o;
}

Outcome shape_conformance() {
  Outcome o;
  using nn::Activation;
  using nn::LayerKind;
  struct Row {
    const char* name;
    LayerKind kind;
    int in, out, k, s, p;
    Activation act;
  };
  const Row rows[] = {
      {"conv1", LayerKind::conv, 3, 96, 7, 1, 3, Activation::relu},
      {"pool1", LayerKind::maxpool, 96, 96, 3, 2, 0, Activation::none},
      {"conv2", LayerKind::conv, 96, 256, 5, 1, 2, Activation::relu},
      {"pool2", LayerKind::maxpool, 256, 256, 3, 2, 0, Activation::none},
      {"conv3", LayerKind::conv, 256, 512, 3, 1, 1, Activation::relu},
      {"conv4", LayerKind::conv, 512, 256, 5, 1, 2, Activation::relu},
      {"conv5", LayerKind::conv, 256, 128, 7, 1, 3, Activation::relu},
      {"conv6", LayerKind::conv, 128, 32, 11, 1, 5, Activation::relu},
      {"conv7", LayerKind::conv, 32, 1, 13, 1, 6, Activation::relu},
      {"deconv1", LayerKind::deconv, 1, 1, 8, 4, 2, Activation::none},
      {"merge", LayerKind::merge, 3, 3, 1, 1, 0, Activation::none},
      {"conv8", LayerKind::conv, 3, 32, 5, 1, 2, Activation::relu},
      {"pool3", LayerKind::maxpool, 32, 32, 3, 2, 0, Activation::none},
      {"conv9", LayerKind::conv, 32, 64, 3, 1, 1, Activation::relu},
      {"conv10", LayerKind::conv, 64, 32, 5, 1, 2, Activation::relu},
      {"conv11", LayerKind::conv, 32, 1, 7, 1, 3, Activation::relu},
      {"deconv2", LayerKind::deconv, 1, 1, 4, 2, 1, Activation::none},
  };
  const model::SalNet net;
  const auto table = net.architecture().table();
  std::size_t matched = 0;
  for (std::size_t i = 0; i < std::size(rows) && i < table.size(); ++i) {
    const auto& r = rows[i];
    const auto& t = table[i];
    if (t.name == r.name && t.kind == r.kind && t.in_depth == r.in && t.out_depth == r.out && t.kernel == r.k &&
        t.stride == r.s && t.padding == r.p && t.activation == r.act)
      ++matched;
    else
      o.info(std::string("row mismatch at ") + r.name);
  }
  o.require(table.size() == std::size(rows) && matched == std::size(rows),
            fmt("layer rows matching the table: %.0f of %.0f", matched, std::size(rows)));

  // Instantiated weight shapes follow the rows as well.
  bool weights_ok = true;
  for (const auto* stage : {&net.base(), &net.refine()})
    for (const auto& l : stage->layers())
      if (l.spec.has_weights())
        weights_ok = weights_ok && l.weight.shape() == l.spec.weight_shape() && l.bias.size() == std::size_t(l.spec.out_depth);
  o.require(weights_ok, "instantiated weight tensors match their rows");

  const auto chain = model::shape_chain(net.architecture(), 240, 360);
  const auto at = [&](const char* name) {
    for (const auto& s : chain)
      if (s.layer == name) return std::pair<std::size_t, std::size_t>{s.height, s.width};
    return std::pair<std::size_t, std::size_t>{0, 0};
  };
  const auto p1 = at("pool1"), p2 = at("pool2"), d1 = at("deconv1");
  o.require(p1 == std::pair<std::size_t, std::size_t>{119, 179}, fmt("pool1 %.0fx%.0f (119x179)", p1.first, p1.second));
  o.require(p2 == std::pair<std::size_t, std::size_t>{59, 89}, fmt("pool2 %.0fx%.0f (59x89)", p2.first, p2.second));
  o.require(d1 == std::pair<std::size_t, std::size_t>{236, 356},
            fmt("deconv1 raw %.0fx%.0f (236x356)", d1.first, d1.second));
  return o;
}

Outcome gradient_correctness() {
  Outcome o;
  constexpr double kTol = 1e-4;
  double e;

  {
    const Tensor x = random_tensor({2, 3, 7, 6}, 1), w = random_tensor({4, 3, 3, 3}, 2), b = random_tensor({4}, 3);
    const Tensor g = random_tensor({2, 4, 4, 3}, 4);
    const auto an = nn::conv2d_backward(x, w, g, 2, 1);
    e = std::max({worst(an.grad_x, numeric_grad(x, g, [&](const Tensor& t) { return nn::conv2d_forward(t, w, b, 2, 1); })),
                  worst(an.grad_w, numeric_grad(w, g, [&](const Tensor& t) { return nn::conv2d_forward(x, t, b, 2, 1); })),
                  worst(an.grad_b, numeric_grad(b, g, [&](const Tensor& t) { return nn::conv2d_forward(x, w, t, 2, 1); }))});
    o.require(e < kTol, fmt("conv       max rel error %.3g", e));
  }
  {
    const Tensor x = random_tensor({1, 2, 4, 5}, 5), w = random_tensor({3, 2, 4, 4}, 6), b = random_tensor({3}, 7);
    const Tensor g = random_tensor({1, 3, 8, 10}, 8);
    const auto an = nn::deconv2d_backward(x, w, g, 2, 1);
    e = std::max(
        {worst(an.grad_x, numeric_grad(x, g, [&](const Tensor& t) { return nn::deconv2d_forward(t, w, b, 2, 1); })),
         worst(an.grad_w, numeric_grad(w, g, [&](const Tensor& t) { return nn::deconv2d_forward(x, t, b, 2, 1); })),
         worst(an.grad_b, numeric_grad(b, g, [&](const Tensor& t) { return nn::deconv2d_forward(x, w, t, 2, 1); }))});
    o.require(e < kTol, fmt("deconv     max rel error %.3g", e));
  }
  {
    // Distinct values at least 0.01 apart keep every probe away from ties.
    Tensor x({1, 2, 7, 7});
    std::vector<double> v(x.size());
    std::iota(v.begin(), v.end(), 0.0);
    std::shuffle(v.begin(), v.end(), std::mt19937_64(9));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * v[i];
    const auto fwd = nn::maxpool_forward(x, 3, 2);
    const Tensor g = random_tensor(fwd.out.shape(), 10);
    e = worst(nn::maxpool_backward(fwd, g),
              numeric_grad(x, g, [&](const Tensor& t) { return nn::maxpool_forward(t, 3, 2).out; }));
    o.require(e < kTol, fmt("maxpool    max rel error %.3g", e));
  }
  {
    Tensor x = random_tensor({1, 2, 5, 5}, 11);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (std::abs(x[i]) < 0.01) x[i] = 0.5;
    const Tensor g = random_tensor(x.shape(), 12);
    e = worst(nn::relu_backward(x, g), numeric_grad(x, g, [](const Tensor& t) { return nn::relu(t); }));
    o.require(e < kTol, fmt("relu       max rel error %.3g", e));
  }
  {
    const Tensor x = random_tensor({1, 1, 5, 6}, 13);
    const Tensor g = random_tensor({1, 1, 9, 4}, 14);
    e = worst(nn::resize_bilinear_backward(g, 5, 6),
              numeric_grad(x, g, [](const Tensor& t) { return nn::resize_bilinear(t, 9, 4); }));
    o.require(e < kTol, fmt("resize     max rel error %.3g", e));
  }
  {
    const Tensor p = random_tensor({2, 1, 4, 4}, 15), target = random_tensor({2, 1, 4, 4}, 16);
    const Tensor one({1}, 1.0);
    e = worst(nn::euclidean_loss(p, target).grad, numeric_grad(p, one, [&](const Tensor& t) {
                return Tensor({1}, nn::euclidean_loss(t, target).loss);
              }));
    o.require(e < kTol, fmt("euclidean  max rel error %.3g", e));
  }
  {
    model::SalNet net = model::SalNet::build(5);
    model::FullNetworkLoss loss(net, random_tensor({1, 3, 16, 16}, 6), random_tensor({1, 2, 16, 16}, 7),
                                random_tensor({1, 1, 16, 16}, 8, 0, 1));
    // Step 1e-4: many gradients are near 1e-6, where a 1e-6 step is
    // dominated by round-off in the loss.
    nn::GradientCheckOptions opt;
    opt.epsilon = 1e-4;
    opt.samples_per_tensor = 6;
    const auto r = nn::gradient_check(loss, opt);
    o.require(r.max_rel_error < kTol && r.checked >= 100,
              fmt("full network at 16x16, max rel error %.3g over %.0f probes (%.0f skipped at kinks)",
                  r.max_rel_error, r.checked, r.skipped) +
                  " worst " + r.worst_param);
  }
  return o;
}

// Shared between criteria 5 and 8.
struct ToyRun {
  fs::path corpus;
  fs::path stage2_weights;
  bool trained = false;
};

Outcome training_sanity(const Workspace& ws, ToyRun& toy) {
  Outcome o;
  toy.corpus = ws.root / "toy";
  cli::cmd_synth(toy.corpus, 2, 128, 64, 0);

  // Learning rate scaled for tiny inputs; the default 1.3e-7 is tuned for
  // full-size training and barely moves the weights in 1500 steps.
  Config cfg;
  cfg.lr = 3e-3;
  cfg.batch_size = 2;
  cfg.test_interval = 100;
  cfg.train_w = 64;
  cfg.train_h = 32;
  cfg.iterations = 500;
  const auto s1 = cli::cmd_train(toy.corpus / "manifest.csv", 1, std::nullopt, ws.root / "stage1", std::nullopt, cfg);

  cfg.iterations = 1000;
  cfg.patch_w = cfg.patch_h = 16;
  cfg.n_per_odi = 4;
  toy.stage2_weights = ws.root / "stage2";
  const auto s2 =
      cli::cmd_train(toy.corpus / "manifest.csv", 2, ws.root / "stage1", toy.stage2_weights, std::nullopt, cfg);
  toy.trained = true;

  const double r1 = s1.final_train_loss / s1.initial_train_loss;
  const double r2 = s2.final_train_loss / s2.initial_train_loss;
  o.require(r1 <= 0.1, fmt("stage 1: loss %.4g -> %.4g, ratio %.3g (<= 0.1)", s1.initial_train_loss,
                           s1.final_train_loss, r1));
  o.require(r2 <= 0.1, fmt("stage 2: loss %.4g -> %.4g, ratio %.3g (<= 0.1)", s2.initial_train_loss,
                           s2.final_train_loss, r2));

  // A constant map equal to the mean target is the best flat prediction;
  // reaching it means the network only learned the average.
  const auto patches_mean_floor = [&] {
    const auto pairs = data::load_pairs(data::read_manifest(toy.corpus / "manifest.csv"));
    data::PatchDatasetOptions po;
    po.n_per_odi = static_cast<std::size_t>(cfg.n_per_odi);
    po.out_w = po.out_h = 16;
    po.seed = cfg.seed;
    const auto [train, test] = data::split<data::SamplePair>(pairs, cfg.test_fraction, cfg.seed);
    const auto samples = data::stage2_samples(data::build_patch_dataset(train, po));
    double loss = 0;
    for (const auto& s : samples) {
      double mean = 0;
      for (std::size_t i = 0; i < s.target.size(); ++i) mean += s.target[i];
      mean /= static_cast<double>(s.target.size());
      loss += nn::euclidean_loss(Tensor(s.target.shape(), mean), s.target).loss;
    }
    return loss / static_cast<double>(samples.size());
  };
  const double floor2 = patches_mean_floor();
  o.info(fmt("stage 2 best constant-map loss on its training patches %.4g, final loss is %.3g x that", floor2,
             s2.final_train_loss / floor2));
  if (s2.final_train_loss < 1.1 * floor2 && r2 <= 0.1)
    o.info("stage 2 meets the ratio only by removing the untrained refinement offset; it ends at the constant fit");

  bool cadence = true;
  for (const auto* log : {&s1.log, &s2.log}) {
    for (std::size_t i = 0; i + 1 < log->size(); ++i)
      cadence = cadence && (*log)[i].iteration == static_cast<std::int64_t>(100 * i) && std::isfinite((*log)[i].test_loss);
    cadence = cadence && log->size() >= 2;
  }
  const auto on_disk = model::read_training_log(toy.stage2_weights / "train_log.txt");
  o.require(cadence && on_disk.size() == s2.log.size(),
            fmt("test loss logged every 100 iterations (%.0f + %.0f rows, finite)", s1.log.size(), s2.log.size()));
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  using namespace metrics;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0, 1);

  std::vector<double> raw(64 * 32);
  for (double& v : raw) v = u(rng);
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  std::vector<double> p(raw.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = raw[i] / total;
  const double kl = kl_divergence(p, p);
  o.require(kl < 1e-5, fmt("KL(p,p) = %.3g on 64x32 (< 1e-5; floor -N*eps = %.3g)", kl, -2048 * kKlEpsilon));

  std::vector<double> q(p.size()), scaled(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = u(rng);
  for (std::size_t i = 0; i < p.size(); ++i) scaled[i] = 7.5 * q[i] - 2.0;
  const double affine = std::abs(pearson_cc(scaled, p) - pearson_cc(q, p));
  o.require(affine < 1e-9, fmt("CC affine invariance, |difference| %.3g (< 1e-9)", affine));

  {
    const int w = 64, h = 32, k = 13;
    SaliencyMap m(w, h, 1);
    FixationSet fx;
    for (int i = 0; i < k; ++i) {
      fx.push_back({4 * i + 2, 2 * i + 3});
      m.at(4 * i + 2, 2 * i + 3) = 1.0f;
    }
    const double n = w * h, expect = std::sqrt((n - k) / k);
    const double err = std::abs(nss(m, fx) - expect);
    o.require(err < 1e-9, fmt("NSS indicator %.12g vs sqrt((N-k)/k) %.12g, error %.3g (< 1e-9)", nss(m, fx), expect, err));
  }
  {
    SaliencyMap m(40, 20, 1);
    for (float& v : m.data) v = static_cast<float>(0.5 * u(rng));
    const FixationSet fx = {{1, 2}, {30, 5}, {17, 19}, {39, 0}};
    for (const auto& f : fx) m.at(f.x, f.y) = 0.9f;
    const double auc = auc_judd(m, fx);
    o.require(auc == 1.0, fmt("AUC of a perfect separator %.17g (== 1)", auc));
  }
  {
    // 100 fixations per trial: with few fixations the Judd curve itself
    // sits above the diagonal by about 1/(2(k+1)).
    double sum = 0;
    const int trials = 10000;
    std::uniform_int_distribution<int> ux(0, 31), uy(0, 15);
    for (int t = 0; t < trials; ++t) {
      SaliencyMap m(32, 16, 1);
      for (float& v : m.data) v = static_cast<float>(u(rng));
      FixationSet fx(100);
      for (auto& f : fx) f = {ux(rng), uy(rng)};
      sum += auc_judd(m, fx);
    }
    const double mean = sum / trials;
    o.require(mean >= 0.49 && mean <= 0.51, fmt("random-predictor AUC over 1e4 trials %.4f (in [0.49, 0.51])", mean));
  }
  return o;
}

Outcome pipeline_identity(const Workspace& ws) {
  Outcome o;
  const float level = 0.37f;
  const Raster odi(512, 256, 1, level);
  geometry::SplatCanvas canvas(odi.width, odi.height);
  for (const auto& f : geometry::six_fixed_frustums(kPi / 2, 256, 256))
    canvas.splat(geometry::extract_patch(odi, f, geometry::Interpolation::bilinear));
  const Raster filled = geometry::gaussian_fill_and_smooth(canvas.resolve(), 64);
  double dev = 0;
  for (float v : filled.data) dev = std::max(dev, std::abs(static_cast<double>(v) - level));
  o.require(dev < 1e-6, fmt("constant %.2f through extract, splat and fill, max deviation %.3g (< 1e-6)", level, dev));

  cli::cmd_synth(ws.root / "predict", 1, 128, 64, 3);
  Config cfg;
  cfg.seed = 3;
  cli::cmd_init(ws.root / "predict" / "weights", std::nullopt, cfg);
  const auto odi_path = ws.root / "predict" / "synth0.png";
  cli::cmd_predict(odi_path, ws.root / "predict" / "weights", ws.root / "predict" / "a.sal", std::nullopt, cfg);
  cli::cmd_predict(odi_path, ws.root / "predict" / "weights", ws.root / "predict" / "b.sal", std::nullopt, cfg);
  const auto a = read_file_bytes(ws.root / "predict" / "a.sal");
  const auto b = read_file_bytes(ws.root / "predict" / "b.sal");
  o.require(!a.empty() && a == b, fmt("cmd_predict twice with seed 3: %.0f bytes, identical", a.size()));
  return o;
}

Outcome ablation_harness(const Workspace& ws, const ToyRun& toy) {
  Outcome o;
  if (!toy.trained) {
    o.require(false, "needs the trained toy weights from criterion 5");
    return o;
  }
  Config cfg;
  std::ostringstream table;
  const auto csv = ws.root / "ablation.csv";
  const auto rows = cli::cmd_ablate(toy.corpus / "manifest.csv", toy.stage2_weights, csv, std::nullopt, cfg, &table);

  bool finite = rows.size() == 3;
  for (const auto& r : rows)
    for (double v : {r.summary.mean.kl, r.summary.mean.cc, r.summary.mean.nss, r.summary.mean.auc})
      finite = finite && std::isfinite(v);
  std::vector<std::string> lines;
  {
    std::ifstream in(csv);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
  }
  bool shaped = lines.size() == 4 && lines[0] == "scenario,kl,cc,nss,auc";
  for (std::size_t i = 1; shaped && i < lines.size(); ++i)
    shaped = std::count(lines[i].begin(), lines[i].end(), ',') == 4;
  o.require(finite && shaped, fmt("3 scenario rows x 4 metrics, all finite (%.0f CSV lines)", lines.size()));
  std::istringstream t(table.str());
  for (std::string line; std::getline(t, line);) o.info(line);

  if (rows.size() == 3) {
    const double whole = rows[0].summary.mean.cc, full = rows[2].summary.mean.cc;
    o.info(fmt("expected behaviour, full-pipeline CC %.4f vs whole-ODI CC %.4f: ", full, whole) +
           (full >= whole ? "holds" : "does not hold (reported, not gating)"));
  }
  return o;
}

Outcome lr_schedule(const Workspace& ws) {
  Outcome o;
  const auto corpus = ws.root / "schedule";
  cli::cmd_synth(corpus, 2, 64, 32, 1);
  Config cfg;  // default schedule: 1.3e-7, x0.7 every 500 iterations
  cfg.iterations = 1001;
  cfg.batch_size = 1;
  cfg.patch_w = cfg.patch_h = 16;
  cfg.n_per_odi = 2;
  cli::cmd_init(corpus / "w0", std::nullopt, cfg);
  cli::cmd_train(corpus / "manifest.csv", 2, corpus / "w0", corpus / "w1", corpus / "log.txt", cfg);
  const auto log = model::read_training_log(corpus / "log.txt");
  const std::pair<std::int64_t, double> expected[] = {{0, 1.3e-7}, {500, 9.1e-8}, {1000, 6.37e-8}};
  for (const auto& [t, lr] : expected) {
    const auto it = std::find_if(log.begin(), log.end(), [&](const auto& r) { return r.iteration == t; });
    const double got = it == log.end() ? std::nan("") : it->lr;
    const double err = std::abs(got - lr) / lr;
    o.require(err < 1e-12, fmt("lr(%.0f) from the log = %.17g, expected %.4g, rel error %.2g (< 1e-12)",
                               static_cast<double>(t), got, lr, err));
  }
  return o;
}

}  // namespace

int main() {
  Workspace ws;
  ToyRun toy;
  struct Criterion {
    int id;
    const char* title;
    double budget_s;  // runtime limit, 0 = none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "projection exactness", 1, projection_exactness},
      {2, "six-view coverage with zero holes", 10, coverage},
      {3, "architecture and shape chain", 0, shape_conformance},
      {4, "gradient correctness", 120, gradient_correctness},
      {5, "training sanity", 600, [&] { return training_sanity(ws, toy); }},
      {6, "metric oracles", 60, metric_oracles},
      {7, "pipeline identity and determinism", 0, [&] { return pipeline_identity(ws); }},
      {8, "ablation harness", 300, [&] { return ablation_harness(ws, toy); }},
      {9, "learning-rate schedule", 0, [&] { return lr_schedule(ws); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0) o.require(secs < c.budget_s, fmt("runtime %.1f s (< %.0f s)", secs, c.budget_s));
    std::printf("%s  criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, secs);
    for (const auto& n : o.notes) std::printf("      %s\n", n.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
