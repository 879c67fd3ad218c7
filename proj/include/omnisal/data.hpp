#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "omnisal/error.hpp"
#include "omnisal/geometry.hpp"
#include "omnisal/model.hpp"
#include "omnisal/raster.hpp"
#include "omnisal/train.hpp"

namespace omnisal::data {

inline constexpr double kDefaultMean = 127.5;
inline constexpr double kHalfRange = 127.5;

/// v' = (v - mean) / 127.5, mapping [0, 255] onto [-1, 1] for mean 127.5.
Raster normalize(const Raster& raster, double mean = kDefaultMean);
Raster denormalize(const Raster& raster, double mean = kDefaultMean);

/// Gray rasters are replicated to three channels.
Raster to_rgb(const Raster& raster);

/// Planar 1 x C x H x W tensor from an interleaved raster, and back.
nn::Tensor to_tensor(const Raster& raster);
Raster to_raster(const nn::Tensor& t, std::size_t batch_index = 0);

struct SamplePair {
  Raster image;     // [0, 255], 1 or 3 channels
  Raster saliency;  // single channel, >= 0
  std::string id;

  /// Throws ShapeMismatch / BadImage when the invariants do not hold.
  void validate() const;
};

struct PatchSample {
  Raster image;                 // normalized, 3 channels
  model::CoordChannels coords;
  Raster saliency;              // max-normalized to [0, 1]
  std::string source_id;
  geometry::ViewFrustum frustum;

  model::TrainSample to_train_sample() const;
};

enum class FrustumMode {
  random_sphere,  // view centres uniform on the sphere
  random_angle,   // pitch uniform in angle
  fixed_six,      // the six inference views (n_per_odi is ignored)
};

struct PatchDatasetOptions {
  std::size_t n_per_odi = 100;
  double fov = geometry::kPi / 2;
  int out_w = 256;
  int out_h = 256;
  std::uint64_t seed = 0;
  FrustumMode mode = FrustumMode::random_sphere;
  double mean = kDefaultMean;
};

/// Extracts image and ground-truth patches through the same frustums.
/// Throws EmptyDataset when `pairs` is empty.
std::vector<PatchSample> build_patch_dataset(std::span<const SamplePair> pairs, const PatchDatasetOptions& options);

/// Resizes 2D pairs to a common resolution and converts them into
/// first-stage training samples.
std::vector<model::TrainSample> stage1_samples(std::span<const SamplePair> pairs, int width, int height,
                                               double mean = kDefaultMean);
std::vector<model::TrainSample> stage2_samples(std::span<const PatchSample> patches);

inline const std::string& source_of(const PatchSample& s) { return s.source_id; }
inline const std::string& source_of(const model::TrainSample& s) { return s.source_id; }
inline const std::string& source_of(const SamplePair& s) { return s.id; }

/// Number of held-out sources: round(fraction * sources), kept within [1, sources - 1].
std::size_t test_source_count(std::size_t sources, double test_fraction);

/// Partitions by source so that no source straddles the split. The
/// held-out sources are drawn by a seeded shuffle; relative order is kept
/// inside each part. Throws TooFewSources with fewer than two sources.
template <typename Sample>
std::pair<std::vector<Sample>, std::vector<Sample>> split(std::span<const Sample> dataset, double test_fraction,
                                                          std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(Errc::InvalidArgument, "test fraction must lie in (0, 1)");
  std::vector<std::string> sources;
  for (const Sample& s : dataset) sources.push_back(source_of(s));
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  if (sources.size() < 2) throw Error(Errc::TooFewSources, "need at least two distinct sources to split");

  std::mt19937_64 rng(seed);
  std::shuffle(sources.begin(), sources.end(), rng);
  std::map<std::string, bool> held_out;
  const std::size_t n_test = test_source_count(sources.size(), test_fraction);
  for (std::size_t i = 0; i < sources.size(); ++i) held_out[sources[i]] = i < n_test;

  std::pair<std::vector<Sample>, std::vector<Sample>> parts;
  for (const Sample& s : dataset) (held_out[source_of(s)] ? parts.second : parts.first).push_back(s);
  return parts;
}

struct Blob {
  geometry::SphericalCoord center;
  double sigma = 0.2;   // angular radius in radians
  double weight = 1.0;  // peak saliency
  std::array<float, 3> color{255.f, 220.f, 40.f};
};

struct SyntheticOdi {
  SamplePair pair;
  std::vector<Blob> blobs;
};

/// Procedural equirectangular scenes: a latitude gradient with a faint
/// checkerboard plus bright Gaussian blobs. Ground-truth saliency is the sum
/// of blob profiles, so its peaks sit on the blob centres.
std::vector<SyntheticOdi> synth_corpus_with_blobs(std::size_t n, int width, int height, std::uint64_t seed);
std::vector<SamplePair> synth_corpus(std::size_t n, int width, int height, std::uint64_t seed);

/// Manifest lines "id, image_path, saliency_path"; relative paths resolve
/// against the manifest's directory. Blank lines and '#' comments are skipped.
struct ManifestEntry {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path saliency;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::vector<SamplePair> load_pairs(std::span<const ManifestEntry> entries);

}  // namespace omnisal::data
