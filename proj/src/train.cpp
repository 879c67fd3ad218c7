#include "omnisal/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "omnisal/error.hpp"

namespace omnisal::model {

namespace {

enum class Stage { base, full };

constexpr std::size_t kEvalChunk = 8;

Tensor stack_field(std::span<const TrainSample> samples, const std::vector<std::size_t>& idx,
                   Tensor TrainSample::*field) {
  std::vector<const Tensor*> items;
  for (std::size_t i : idx) items.push_back(&(samples[i].*field));
  return nn::stack_batch(items);
}

double batch_loss(const SalNet& net, Stage stage, std::span<const TrainSample> samples,
                  const std::vector<std::size_t>& idx) {
  const Tensor x = stack_field(samples, idx, &TrainSample::image);
  const Tensor t = stack_field(samples, idx, &TrainSample::target);
  if (stage == Stage::base) {
    SalNet::BaseTrace trace;
    return nn::euclidean_loss(net.base_raw(x, trace), t).loss;
  }
  SalNet::FullTrace trace;
  return nn::euclidean_loss(net.full_raw(x, stack_field(samples, idx, &TrainSample::coords), trace), t).loss;
}

double split_loss(const SalNet& net, Stage stage, std::span<const TrainSample> samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t i0 = 0; i0 < samples.size(); i0 += kEvalChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = i0; i < std::min(samples.size(), i0 + kEvalChunk); ++i) idx.push_back(i);
    total += batch_loss(net, stage, samples, idx) * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(samples.size());
}

// Deterministic minibatch stream: walks a shuffled order and reshuffles at
// every epoch boundary.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> idx;
    while (idx.size() < batch) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      idx.push_back(order_[pos_++]);
    }
    return idx;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

TrainResult train(SalNet& net, Stage stage, std::span<const TrainSample> train_set,
                  std::span<const TrainSample> test_set, const TrainOptions& options) {
  if (train_set.empty()) throw Error(Errc::EmptyDataset, "training split is empty");
  options.sgd.validate();
  if (options.test_interval < 1) throw Error(Errc::InvalidArgument, "test_interval must be >= 1");

  TrainResult result;
  result.initial_train_loss = split_loss(net, stage, train_set);
  double best_test = std::numeric_limits<double>::infinity();

  const auto check_test = [&](double test_loss, std::int64_t t) {
    if (stage != Stage::full || std::isnan(test_loss)) return;
    best_test = std::min(best_test, test_loss);
    if (!std::isfinite(test_loss) || test_loss > options.divergence_factor * best_test) {
      std::ostringstream msg;
      msg << "test loss " << test_loss << " at iteration " << t << " exceeds " << options.divergence_factor
          << "x the best test loss " << best_test;
      throw Error(Errc::Diverged, msg.str());
    }
  };

  BatchSampler sampler(train_set.size(), options.seed);
  std::vector<nn::ParamRef> params = stage == Stage::base ? net.base_parameters() : net.parameters();
  for (std::int64_t t = 0; t < options.sgd.iterations; ++t) {
    const std::vector<std::size_t> idx = sampler.next(options.sgd.batch_size);
    const Tensor x = stack_field(train_set, idx, &TrainSample::image);
    const Tensor target = stack_field(train_set, idx, &TrainSample::target);
    double loss = 0.0;
    if (stage == Stage::base) {
      SalNet::BaseTrace trace;
      nn::LossResult r = nn::euclidean_loss(net.base_raw(x, trace), target);
      net.base().zero_grad();
      net.base_backward(trace, r.grad);
      loss = r.loss;
    } else {
      SalNet::FullTrace trace;
      nn::LossResult r =
          nn::euclidean_loss(net.full_raw(x, stack_field(train_set, idx, &TrainSample::coords), trace), target);
      net.zero_grad();
      net.full_backward(trace, r.grad);
      loss = r.loss;
    }
    if (!std::isfinite(loss))
      throw Error(Errc::Diverged, "non-finite training loss at iteration " + std::to_string(t));
    result.loss_curve.push_back(loss);

    if (t % options.test_interval == 0) {
      const double test_loss = split_loss(net, stage, test_set);
      result.log.push_back({t, nn::learning_rate(options.sgd, t), loss, test_loss});
      check_test(test_loss, t);
    }
    nn::sgd_step(params, options.sgd, t);
  }

  result.final_train_loss = split_loss(net, stage, train_set);
  const double final_test = split_loss(net, stage, test_set);
  const std::int64_t end = options.sgd.iterations;
  result.log.push_back({end, nn::learning_rate(options.sgd, end), result.final_train_loss, final_test});
  check_test(final_test, end);
  return result;
}

}  // namespace

TrainResult train_stage1(SalNet& net, std::span<const TrainSample> train_set, std::span<const TrainSample> test_set,
                         const TrainOptions& options) {
  return train(net, Stage::base, train_set, test_set, options);
}

TrainResult train_stage2(SalNet& net, std::span<const TrainSample> train_set, std::span<const TrainSample> test_set,
                         const TrainOptions& options) {
  return train(net, Stage::full, train_set, test_set, options);
}

double stage1_loss(const SalNet& net, std::span<const TrainSample> samples) {
  return split_loss(net, Stage::base, samples);
}

double stage2_loss(const SalNet& net, std::span<const TrainSample> samples) {
  return split_loss(net, Stage::full, samples);
}

void write_training_log(const std::filesystem::path& path, std::span<const LogRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "# iteration lr train_loss test_loss\n";
  char line[160];
  for (const LogRow& r : rows) {
    std::snprintf(line, sizeof line, "%lld %.17g %.17g %.17g\n", static_cast<long long>(r.iteration), r.lr,
                  r.train_loss, r.test_loss);
    out << line;
  }
}

std::vector<LogRow> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<LogRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    LogRow r;
    std::string lr, train, test;
    if (!(ls >> r.iteration >> lr >> train >> test)) throw Error(Errc::CorruptFile, "bad log line: " + line);
    r.lr = std::stod(lr);
    r.train_loss = std::stod(train);
    r.test_loss = std::stod(test);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace omnisal::model
