#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "omnisal/error.hpp"
#include "omnisal/model.hpp"
#include "omnisal/nn/layers.hpp"
#include "omnisal/nn/tensor_io.hpp"
#include "omnisal/raster_io.hpp"
#include "omnisal/train.hpp"

using namespace omnisal;
using namespace omnisal::model;
using nn::Activation;
using nn::LayerKind;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("omnisal_model_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

struct Row {
  const char* name;
  LayerKind kind;
  int in, out, k, s, p;
  Activation act;
};

// Expected layer table, with pool depths following their inputs and conv9
// padded by 1.
const Row kBase[] = {
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
};
const Row kRefine[] = {
    {"conv8", LayerKind::conv, 3, 32, 5, 1, 2, Activation::relu},
    {"pool3", LayerKind::maxpool, 32, 32, 3, 2, 0, Activation::none},
    {"conv9", LayerKind::conv, 32, 64, 3, 1, 1, Activation::relu},
    {"conv10", LayerKind::conv, 64, 32, 5, 1, 2, Activation::relu},
    {"conv11", LayerKind::conv, 32, 1, 7, 1, 3, Activation::relu},
    {"deconv2", LayerKind::deconv, 1, 1, 4, 2, 1, Activation::none},
};

void check_rows(const std::vector<nn::LayerSpec>& got, std::span<const Row> want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CAPTURE(want[i].name);
    CHECK(got[i].name == want[i].name);
    CHECK(got[i].kind == want[i].kind);
    CHECK(got[i].in_depth == want[i].in);
    CHECK(got[i].out_depth == want[i].out);
    CHECK(got[i].kernel == want[i].k);
    CHECK(got[i].stride == want[i].s);
    CHECK(got[i].padding == want[i].p);
    CHECK(got[i].activation == want[i].act);
  }
}

TrainSample toy_sample(std::size_t h, std::size_t w, std::uint64_t seed, const std::string& source) {
  TrainSample s;
  s.image = random_tensor({1, 3, h, w}, seed);
  s.coords = random_tensor({1, 2, h, w}, seed + 100);
  s.target = Tensor({1, 1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double dx = (x - w / 3.0) / w, dy = (y - h / 2.0) / h;
      s.target[y * w + x] = std::exp(-(dx * dx + dy * dy) * 20);
    }
  s.source_id = source;
  return s;
}

std::vector<Tensor> snapshot(SalNet& net) {
  std::vector<Tensor> out;
  for (const auto& p : net.parameters()) out.push_back(*p.value);
  return out;
}

}  // namespace

TEST_CASE("architecture table") {
  const auto arch = SalNetArchitecture::standard();
  check_rows(arch.base_layers, kBase);
  check_rows(arch.refine_layers, kRefine);
  CHECK(arch.merge.name == "merge");
  CHECK(arch.merge.kind == LayerKind::merge);
  CHECK(arch.merge.out_depth == 3);
  const auto table = arch.table();
  REQUIRE(table.size() == 17);
  CHECK(table[10].name == "merge");
  CHECK(table[16].name == "deconv2");
}

TEST_CASE("parameters") {
  SalNet net = SalNet::build(0);
  const auto params = net.parameters();
  CHECK(params.size() == 26);
  CHECK(params[0].name == "conv1.w");
  CHECK(params[0].value->size() + params[1].value->size() == 14208);
  CHECK(params[0].value->shape() == std::vector<std::size_t>{96, 3, 7, 7});

  SalNet again = SalNet::build(0);
  SalNet other = SalNet::build(1);
  const auto a = snapshot(net), b = snapshot(again), c = snapshot(other);
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      identical = identical && a[i][j] == b[i][j];
      differs = differs || a[i][j] != c[i][j];
    }
  CHECK(identical);
  CHECK(differs);
  // Biases start at zero.
  for (std::size_t j = 0; j < params[1].value->size(); ++j) CHECK((*params[1].value)[j] == 0.0);
}

TEST_CASE("shape chain") {
  const auto chain = shape_chain(SalNetArchitecture::standard(), 240, 360);
  const auto find = [&](const std::string& name) {
    for (const auto& s : chain)
      if (s.layer == name) return s;
    FAIL("missing layer " << name);
    return ShapeStep{};
  };
  CHECK(find("conv1").channels == 96);
  CHECK(find("conv1").height == 240);
  CHECK(find("pool1").height == 119);
  CHECK(find("pool1").width == 179);
  CHECK(find("pool2").height == 59);
  CHECK(find("pool2").width == 89);
  CHECK(find("deconv1").height == 236);
  CHECK(find("deconv1").width == 356);
  CHECK(find("merge").channels == 3);
  CHECK(find("merge").height == 240);
  CHECK(find("pool3").height == 119);
  CHECK(find("pool3").width == 179);
  CHECK(find("deconv2").height == 238);
  CHECK(find("deconv2").width == 358);
  CHECK(chain.back().layer == "resize2");
  CHECK(chain.back().height == 240);
  CHECK(chain.back().width == 360);

  const auto small = shape_chain(SalNetArchitecture::standard(), 64, 64);
  for (const auto& s : small)
    if (s.layer == "deconv1") CHECK(s.height == 60);
}

TEST_CASE("coordinate channels") {
  constexpr double pi = geometry::kPi;
  CHECK(rescale_theta(-pi / 2) == doctest::Approx(-1.0));
  CHECK(rescale_theta(pi / 2) == doctest::Approx(0.0));
  CHECK(rescale_theta(3 * pi / 2) == doctest::Approx(1.0));
  CHECK(rescale_phi(-pi / 2) == doctest::Approx(-1.0));
  CHECK(rescale_phi(0) == doctest::Approx(0.0));
  CHECK(rescale_phi(pi / 2) == doctest::Approx(1.0));

  std::vector<geometry::SphericalCoord> coords(6);
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = {0.1 * static_cast<double>(i), -0.05 * i};
  const auto cc = CoordChannels::from_coords(coords, 3, 2);
  const Tensor t = cc.to_tensor();
  CHECK(t.shape() == std::vector<std::size_t>{1, 2, 2, 3});
  CHECK(t[4] == doctest::Approx(rescale_theta(0.4)));
  CHECK(t[6 + 4] == doctest::Approx(rescale_phi(-0.2)));
}

TEST_CASE("coordinate plumbing reaches the merge input") {
  SalNet net = SalNet::build(0);
  const Tensor x = random_tensor({1, 3, 32, 32}, 1);
  Tensor c = random_tensor({1, 2, 32, 32}, 2);
  const Tensor before = net.merge_input(x, c);
  const std::size_t plane = 32 * 32, pixel = 5 * 32 + 7;
  c[pixel] += 0.5;  // theta channel
  const Tensor after = net.merge_input(x, c);
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (i == plane + pixel)
      CHECK(after[i] == doctest::Approx(before[i] + 0.5));
    else
      CHECK(after[i] == before[i]);
  }
  // The phi channel lands in the last plane.
  c[plane + pixel] -= 0.25;
  CHECK(net.merge_input(x, c)[2 * plane + pixel] == doctest::Approx(before[2 * plane + pixel] - 0.25));
}

TEST_CASE("forward passes") {
  SalNet net = SalNet::build(3);
  const Tensor x = random_tensor({1, 3, 40, 48}, 4);
  const Tensor c = random_tensor({1, 2, 40, 48}, 5);
  const Tensor base = net.forward_base(x);
  CHECK(base.shape() == std::vector<std::size_t>{1, 1, 40, 48});
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i] >= 0.0);
  const Tensor full = net.forward_full(x, c);
  CHECK(full.shape() == std::vector<std::size_t>{1, 1, 40, 48});
  double hi = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    CHECK(full[i] >= 0.0);
    CHECK(std::isfinite(full[i]));
    hi = std::max(hi, full[i]);
  }
  CHECK(hi <= 1.0);

  SUBCASE("zero weights give zero saliency") {
    for (auto& p : net.parameters()) *p.value = Tensor(p.value->shape());
    const Tensor zb = net.forward_base(x);
    const Tensor zf = net.forward_full(x, c);
    for (std::size_t i = 0; i < zb.size(); ++i) CHECK(zb[i] == 0.0);
    for (std::size_t i = 0; i < zf.size(); ++i) CHECK(zf[i] == 0.0);
  }
  SUBCASE("zero refine stack ignores coordinates") {
    for (auto& p : net.refine().parameters()) *p.value = Tensor(p.value->shape());
    const Tensor a = net.forward_full(x, c);
    const Tensor b = net.forward_full(x, random_tensor({1, 2, 40, 48}, 9));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("weights round trip") {
  TempDir dir;
  SalNet net = SalNet::build(11);
  net.set_image_mean(100.0);
  save_weights(net, dir.path / "a");
  SalNet back = load_weights(dir.path / "a");
  CHECK(back.image_mean() == 100.0);
  save_weights(back, dir.path / "b");
  for (const auto& entry : fs::directory_iterator(dir.path / "a")) {
    const auto other = dir.path / "b" / entry.path().filename();
    CAPTURE(entry.path().filename().string());
    CHECK(read_file_bytes(entry.path()) == read_file_bytes(other));
  }

  SUBCASE("truncated tensor") {
    const auto f = dir.path / "a" / "conv2.w.ten";
    auto bytes = read_file_bytes(f);
    bytes.resize(bytes.size() / 2);
    write_file_bytes(f, bytes);
    CHECK_THROWS_WITH_AS(load_weights(dir.path / "a"), doctest::Contains("CorruptFile"), Error);
  }
  SUBCASE("wrong conv1 shape") {
    const auto manifest = dir.path / "a" / "manifest.txt";
    std::ifstream in(manifest);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("96x3x7x7");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 8, "96x3x5x5");
    std::ofstream(manifest) << text;
    try {
      load_weights(dir.path / "a");
      FAIL("expected ArchitectureMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ArchitectureMismatch);
    }
  }
  SUBCASE("missing directory") {
    try {
      load_weights(dir.path / "nope");
      FAIL("expected IoError");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::IoError);
    }
  }
  SUBCASE("pretrained front layers") {
    SalNet seeded = SalNet::build(99, dir.path / "a");
    const auto mine = seeded.parameters();
    const auto theirs = back.parameters();
    // Biases start at zero either way, so only weights tell the sources apart.
    for (std::size_t i = 0; i < mine.size(); i += 2) {
      const bool front = i < 6;  // conv1..conv3
      bool same = true;
      for (std::size_t j = 0; j < mine[i].value->size(); ++j) same = same && (*mine[i].value)[j] == (*theirs[i].value)[j];
      CAPTURE(mine[i].name);
      CHECK(same == front);
    }
  }
}

TEST_CASE("gradients of the full network") {
  SalNet net = SalNet::build(5);
  FullNetworkLoss loss(net, random_tensor({1, 3, 16, 16}, 6), random_tensor({1, 2, 16, 16}, 7),
                       random_tensor({1, 1, 16, 16}, 8, 0, 1));
  // Many gradients here are around 1e-6, where round-off in the loss
  // swamps a 1e-6 step; 1e-4 keeps both truncation and round-off small.
  nn::GradientCheckOptions opt;
  opt.epsilon = 1e-4;
  opt.samples_per_tensor = 3;
  const auto r = nn::gradient_check(loss, opt);
  CAPTURE(r.worst_param);
  CHECK(r.checked > 40);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradients of the base stage") {
  SalNet net = SalNet::build(12);
  BaseStageLoss loss(net, random_tensor({1, 3, 20, 24}, 13), random_tensor({1, 1, 20, 24}, 14, 0, 1));
  nn::GradientCheckOptions opt;
  opt.epsilon = 1e-4;
  opt.samples_per_tensor = 3;
  const auto r = nn::gradient_check(loss, opt);
  CAPTURE(r.worst_param);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("training") {
  const std::vector<TrainSample> train = {toy_sample(32, 32, 1, "a"), toy_sample(32, 32, 2, "b")};
  const std::vector<TrainSample> test = {toy_sample(32, 32, 3, "c")};
  TrainOptions opt;
  opt.sgd.base_lr = 0.003;
  opt.sgd.batch_size = 2;
  opt.sgd.weight_decay = 0;
  opt.test_interval = 5;

  SUBCASE("zero iterations leave the weights alone") {
    SalNet net = SalNet::build(0);
    const auto before = snapshot(net);
    opt.sgd.iterations = 0;
    const auto r = train_stage1(net, train, test, opt);
    const auto after = snapshot(net);
    bool same = true;
    for (std::size_t i = 0; i < before.size(); ++i)
      for (std::size_t j = 0; j < before[i].size(); ++j) same = same && before[i][j] == after[i][j];
    CHECK(same);
    CHECK(r.loss_curve.empty());
    CHECK(r.initial_train_loss == r.final_train_loss);
  }
  SUBCASE("stage one lowers the loss and logs on schedule") {
    SalNet net = SalNet::build(0);
    opt.sgd.iterations = 12;
    const auto r = train_stage1(net, train, test, opt);
    CHECK(r.loss_curve.size() == 12);
    CHECK(r.final_train_loss < r.initial_train_loss);
    CHECK(r.initial_train_loss == doctest::Approx(stage1_loss(SalNet::build(0), train)));
    REQUIRE(r.log.size() >= 3);
    CHECK(r.log[0].iteration == 0);
    CHECK(r.log[1].iteration == 5);
    CHECK(r.log[2].iteration == 10);
    for (const auto& row : r.log) CHECK(std::isfinite(row.test_loss));
  }
  SUBCASE("stage two runs end to end") {
    SalNet net = SalNet::build(0);
    opt.sgd.iterations = 6;
    const auto r = train_stage2(net, train, test, opt);
    CHECK(r.loss_curve.size() == 6);
    for (double l : r.loss_curve) CHECK(std::isfinite(l));
    CHECK(r.final_train_loss == doctest::Approx(stage2_loss(net, train)));
  }
  SUBCASE("learning rate column follows the schedule") {
    SalNet net = SalNet::build(0);
    opt.sgd.iterations = 10;
    opt.sgd.base_lr = 1e-3;
    opt.sgd.lr_step = 5;
    opt.sgd.lr_gamma = 0.5;
    const auto r = train_stage1(net, train, {}, opt);
    CHECK(r.log[0].lr == 1e-3);
    CHECK(r.log[1].lr == 5e-4);
    CHECK(std::isnan(r.log[0].test_loss));
  }
  SUBCASE("empty training split") {
    SalNet net = SalNet::build(0);
    CHECK_THROWS_AS(train_stage1(net, {}, test, opt), Error);
  }
  SUBCASE("divergence is reported") {
    SalNet net = SalNet::build(0);
    opt.sgd.base_lr = 1e6;
    opt.sgd.iterations = 20;
    try {
      train_stage2(net, train, test, opt);
      FAIL("expected Diverged");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Diverged);
    }
  }
}

TEST_CASE("training log files") {
  TempDir dir;
  const std::vector<LogRow> rows = {{0, 1.3e-7, 0.5, 0.25}, {100, 1.3e-7, 0.125, std::nan("")},
                                    {500, 1.3e-7 * 0.7, 1.0 / 3, 0.2}};
  write_training_log(dir.path / "log.txt", rows);
  const auto back = read_training_log(dir.path / "log.txt");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].iteration == rows[i].iteration);
    CHECK(back[i].lr == rows[i].lr);
    CHECK(back[i].train_loss == rows[i].train_loss);
    if (std::isnan(rows[i].test_loss))
      CHECK(std::isnan(back[i].test_loss));
    else
      CHECK(back[i].test_loss == rows[i].test_loss);
  }
}
