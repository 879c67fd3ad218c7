#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "omnisal/metrics.hpp"
#include "omnisal/nn/sgd.hpp"
#include "omnisal/pipeline.hpp"
#include "omnisal/train.hpp"

namespace omnisal {

/// Flat key = value settings shared by every subcommand.
struct Config {
  double fov_deg = 90.0;
  int patch_w = 256;
  int patch_h = 256;
  int blur_kernel = 64;
  double lr = 1.3e-7;
  double lr_gamma = 0.7;
  std::int64_t lr_step = 500;
  double weight_decay = 5e-4;
  std::int64_t batch_size = 5;
  std::int64_t iterations = 22000;
  std::uint64_t seed = 0;
  bool latitude_weighted = true;
  double test_fraction = 0.1;

  std::int64_t n_per_odi = 100;
  std::int64_t test_interval = 100;
  double divergence_factor = 10.0;
  int train_w = 360;  // first-stage input size
  int train_h = 240;
  int whole_w = 800;
  int whole_h = 400;
  double fixation_percent = 1.0;
  double image_mean = 127.5;
  std::int64_t threads = 1;

  /// Throws InvalidArgument for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  pipeline::PipelineOptions pipeline_options() const;
  metrics::MetricOptions metric_options() const;
  model::TrainOptions train_options() const;
};

struct ConfigKey {
  const char* name;
  const char* help;
};
const std::vector<ConfigKey>& config_keys();

/// Blank lines and '#' comments are ignored; everything else must be
/// "key = value".
void apply_config_file(Config& cfg, const std::filesystem::path& path);
void write_config(std::ostream& out, const Config& cfg);

}  // namespace omnisal
