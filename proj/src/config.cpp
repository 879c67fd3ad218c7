#include "omnisal/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "omnisal/error.hpp"

namespace omnisal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw Error(Errc::InvalidArgument, "bad value for " + key + ": '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw Error(Errc::InvalidArgument, "bad boolean for " + key + ": '" + text + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"fov_deg", "field of view of each patch in degrees"},
      {"patch_w", "patch width in pixels"},
      {"patch_h", "patch height in pixels"},
      {"blur_kernel", "Gaussian kernel size in pixels used after recombination"},
      {"lr", "base learning rate"},
      {"lr_gamma", "learning-rate decay factor"},
      {"lr_step", "iterations between learning-rate decays"},
      {"weight_decay", "L2 weight decay"},
      {"batch_size", "images per SGD step"},
      {"iterations", "SGD iterations"},
      {"seed", "seed for initialisation, patch sampling and batching"},
      {"latitude_weighted", "weight distribution metrics by cos(latitude)"},
      {"test_fraction", "fraction of source images held out for testing"},
      {"n_per_odi", "random patches drawn per panorama for second-stage training"},
      {"test_interval", "iterations between test-loss evaluations"},
      {"divergence_factor", "abort when the test loss exceeds this multiple of its best value"},
      {"train_w", "first-stage training width"},
      {"train_h", "first-stage training height"},
      {"whole_w", "whole-image baseline width"},
      {"whole_h", "whole-image baseline height"},
      {"fixation_percent", "top percentage of ground-truth pixels used as fixations when none are given"},
      {"image_mean", "mean subtracted from pixel values before the network"},
      {"threads", "worker threads for per-patch inference"},
  };
  return keys;
}

void Config::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "fov_deg") fov_deg = parse_number<double>(key, v);
  else if (key == "patch_w") patch_w = parse_number<int>(key, v);
  else if (key == "patch_h") patch_h = parse_number<int>(key, v);
  else if (key == "blur_kernel") blur_kernel = parse_number<int>(key, v);
  else if (key == "lr") lr = parse_number<double>(key, v);
  else if (key == "lr_gamma") lr_gamma = parse_number<double>(key, v);
  else if (key == "lr_step") lr_step = parse_number<std::int64_t>(key, v);
  else if (key == "weight_decay") weight_decay = parse_number<double>(key, v);
  else if (key == "batch_size") batch_size = parse_number<std::int64_t>(key, v);
  else if (key == "iterations") iterations = parse_number<std::int64_t>(key, v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "latitude_weighted") latitude_weighted = parse_bool(key, v);
  else if (key == "test_fraction") test_fraction = parse_number<double>(key, v);
  else if (key == "n_per_odi") n_per_odi = parse_number<std::int64_t>(key, v);
  else if (key == "test_interval") test_interval = parse_number<std::int64_t>(key, v);
  else if (key == "divergence_factor") divergence_factor = parse_number<double>(key, v);
  else if (key == "train_w") train_w = parse_number<int>(key, v);
  else if (key == "train_h") train_h = parse_number<int>(key, v);
  else if (key == "whole_w") whole_w = parse_number<int>(key, v);
  else if (key == "whole_h") whole_h = parse_number<int>(key, v);
  else if (key == "fixation_percent") fixation_percent = parse_number<double>(key, v);
  else if (key == "image_mean") image_mean = parse_number<double>(key, v);
  else if (key == "threads") threads = parse_number<std::int64_t>(key, v);
  else throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
}

std::string Config::get(const std::string& key) const {
  if (key == "fov_deg") return fmt(fov_deg);
  if (key == "patch_w") return std::to_string(patch_w);
  if (key == "patch_h") return std::to_string(patch_h);
  if (key == "blur_kernel") return std::to_string(blur_kernel);
  if (key == "lr") return fmt(lr);
  if (key == "lr_gamma") return fmt(lr_gamma);
  if (key == "lr_step") return std::to_string(lr_step);
  if (key == "weight_decay") return fmt(weight_decay);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "iterations") return std::to_string(iterations);
  if (key == "seed") return std::to_string(seed);
  if (key == "latitude_weighted") return latitude_weighted ? "true" : "false";
  if (key == "test_fraction") return fmt(test_fraction);
  if (key == "n_per_odi") return std::to_string(n_per_odi);
  if (key == "test_interval") return std::to_string(test_interval);
  if (key == "divergence_factor") return fmt(divergence_factor);
  if (key == "train_w") return std::to_string(train_w);
  if (key == "train_h") return std::to_string(train_h);
  if (key == "whole_w") return std::to_string(whole_w);
  if (key == "whole_h") return std::to_string(whole_h);
  if (key == "fixation_percent") return fmt(fixation_percent);
  if (key == "image_mean") return fmt(image_mean);
  if (key == "threads") return std::to_string(threads);
  throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
}

void Config::validate() const {
  const auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidArgument, what);
  };
  need(fov_deg > 0.0 && fov_deg < 180.0, "fov_deg must lie in (0, 180)");
  need(patch_w > 0 && patch_h > 0, "patch size must be positive");
  need(blur_kernel >= 1, "blur_kernel must be >= 1");
  need(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  need(n_per_odi >= 1, "n_per_odi must be >= 1");
  need(test_interval >= 1, "test_interval must be >= 1");
  need(train_w > 0 && train_h > 0 && whole_w > 0 && whole_h > 0, "image sizes must be positive");
  need(fixation_percent > 0.0 && fixation_percent <= 100.0, "fixation_percent must lie in (0, 100]");
  need(threads >= 1, "threads must be >= 1");
  need(batch_size >= 1, "batch_size must be >= 1");
  train_options().sgd.validate();
}

pipeline::PipelineOptions Config::pipeline_options() const {
  pipeline::PipelineOptions o;
  o.fov = fov_deg * geometry::kPi / 180.0;
  o.patch_w = patch_w;
  o.patch_h = patch_h;
  o.blur_kernel = blur_kernel;
  o.whole_w = whole_w;
  o.whole_h = whole_h;
  o.threads = static_cast<std::size_t>(threads);
  return o;
}

metrics::MetricOptions Config::metric_options() const {
  metrics::MetricOptions o;
  o.latitude_weighted = latitude_weighted;
  o.fixation_percent = fixation_percent;
  return o;
}

model::TrainOptions Config::train_options() const {
  model::TrainOptions o;
  o.sgd.base_lr = lr;
  o.sgd.lr_gamma = lr_gamma;
  o.sgd.lr_step = lr_step;
  o.sgd.weight_decay = weight_decay;
  o.sgd.batch_size = static_cast<std::size_t>(std::max<std::int64_t>(batch_size, 1));
  o.sgd.iterations = iterations;
  o.test_interval = test_interval;
  o.seed = seed;
  o.divergence_factor = divergence_factor;
  return o;
}

void apply_config_file(Config& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::InvalidArgument, path.string() + ":" + std::to_string(number) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void write_config(std::ostream& out, const Config& cfg) {
  for (const auto& k : config_keys()) out << k.name << " = " << cfg.get(k.name) << "\n";
}

}  // namespace omnisal
