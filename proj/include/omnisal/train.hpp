#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "omnisal/model.hpp"
#include "omnisal/nn/sgd.hpp"

namespace omnisal::model {

/// One training example; every tensor has a batch dimension of 1.
/// `coords` is only used by the second stage.
struct TrainSample {
  Tensor image;   // 1 x 3 x H x W, normalized
  Tensor coords;  // 1 x 2 x H x W, rescaled coordinates
  Tensor target;  // 1 x 1 x H x W
  std::string source_id;
};

struct TrainOptions {
  nn::SgdConfig sgd;
  std::int64_t test_interval = 100;
  std::uint64_t seed = 0;
  /// Second stage aborts once the test loss exceeds this multiple of the best one.
  double divergence_factor = 10.0;
};

struct LogRow {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;  // NaN without a test split
};

struct TrainResult {
  std::vector<double> loss_curve;  // batch loss of every iteration
  std::vector<LogRow> log;         // every test_interval iterations plus a final row
  double initial_train_loss = 0.0; // whole training split, before the first step
  double final_train_loss = 0.0;   // whole training split, after the last step
};

/// Trains the base stage alone with the loss right after deconv1.
/// Throws EmptyDataset when `train` is empty.
TrainResult train_stage1(SalNet& net, std::span<const TrainSample> train, std::span<const TrainSample> test,
                         const TrainOptions& options);

/// Trains both stages end to end with the loss after deconv2. Throws
/// EmptyDataset when `train` is empty and Diverged when the test loss blows
/// up or any loss turns non-finite.
TrainResult train_stage2(SalNet& net, std::span<const TrainSample> train, std::span<const TrainSample> test,
                         const TrainOptions& options);

/// Mean per-sample loss of a split (0 samples -> NaN).
double stage1_loss(const SalNet& net, std::span<const TrainSample> samples);
double stage2_loss(const SalNet& net, std::span<const TrainSample> samples);

// Whitespace separated columns "iteration lr train_loss test_loss" after a
// '#' header line; values are printed with round-trip precision.
void write_training_log(const std::filesystem::path& path, std::span<const LogRow> rows);
std::vector<LogRow> read_training_log(const std::filesystem::path& path);

}  // namespace omnisal::model
