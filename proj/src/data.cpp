#include "omnisal/data.hpp"

#include <fstream>
#include <sstream>

#include "omnisal/raster_io.hpp"

namespace omnisal::data {

using geometry::SphericalCoord;

Raster normalize(const Raster& raster, double mean) {
  Raster out = raster;
  for (float& v : out.data) v = static_cast<float>((v - mean) / kHalfRange);
  return out;
}

Raster denormalize(const Raster& raster, double mean) {
  Raster out = raster;
  for (float& v : out.data) v = static_cast<float>(v * kHalfRange + mean);
  return out;
}

Raster to_rgb(const Raster& raster) {
  if (raster.channels == 3) return raster;
  if (raster.channels != 1) throw Error(Errc::BadImage, "expected a 1- or 3-channel image");
  Raster out(raster.width, raster.height, 3);
  for (std::size_t i = 0; i < raster.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = raster.data[i];
  return out;
}

nn::Tensor to_tensor(const Raster& raster) {
  nn::Tensor t({1, static_cast<std::size_t>(raster.channels), static_cast<std::size_t>(raster.height),
                static_cast<std::size_t>(raster.width)});
  const std::size_t plane = raster.pixel_count();
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < raster.channels; ++c) t[c * plane + i] = raster.data[i * raster.channels + c];
  return t;
}

Raster to_raster(const nn::Tensor& t, std::size_t batch_index) {
  nn::require_rank4(t, "to_raster");
  Raster out(static_cast<int>(t.w()), static_cast<int>(t.h()), static_cast<int>(t.c()));
  const std::size_t plane = t.h() * t.w();
  const double* src = t.data() + batch_index * t.c() * plane;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < t.c(); ++c) out.data[i * t.c() + c] = static_cast<float>(src[c * plane + i]);
  return out;
}

void SamplePair::validate() const {
  if (image.width != saliency.width || image.height != saliency.height)
    throw Error(Errc::ShapeMismatch, id + ": image and saliency differ in size");
  if (saliency.channels != 1) throw Error(Errc::BadImage, id + ": saliency must have one channel");
  for (float v : saliency.data)
    if (!(v >= 0.0f) || !std::isfinite(v)) throw Error(Errc::BadImage, id + ": saliency must be finite and >= 0");
}

model::TrainSample PatchSample::to_train_sample() const {
  return {to_tensor(image), coords.to_tensor(), to_tensor(saliency), source_id};
}

std::vector<PatchSample> build_patch_dataset(std::span<const SamplePair> pairs, const PatchDatasetOptions& options) {
  if (pairs.empty()) throw Error(Errc::EmptyDataset, "no source images");
  std::vector<PatchSample> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const SamplePair& pair = pairs[i];
    pair.validate();
    const std::uint64_t seed = options.seed + 0x9e3779b97f4a7c15ULL * (i + 1);
    std::vector<geometry::ViewFrustum> views;
    switch (options.mode) {
      case FrustumMode::fixed_six:
        views = geometry::six_fixed_frustums(options.fov, options.out_w, options.out_h);
        break;
      case FrustumMode::random_sphere:
      case FrustumMode::random_angle:
        views = geometry::random_frustums(options.n_per_odi, options.fov, options.out_w, options.out_h, seed,
                                          options.mode == FrustumMode::random_sphere
                                              ? geometry::PitchSampling::sphere_uniform
                                              : geometry::PitchSampling::angle_uniform);
        break;
    }
    const Raster rgb = to_rgb(pair.image);
    for (const auto& f : views) {
      geometry::Patch img = geometry::extract_patch(rgb, f);
      geometry::Patch sal = geometry::extract_patch(pair.saliency, f);
      out.push_back({normalize(img.image, options.mean),
                     model::CoordChannels::from_coords(img.coords, static_cast<std::size_t>(f.out_w),
                                                       static_cast<std::size_t>(f.out_h)),
                     normalize_max(sal.image), pair.id, f});
    }
  }
  return out;
}

std::vector<model::TrainSample> stage1_samples(std::span<const SamplePair> pairs, int width, int height,
                                               double mean) {
  if (pairs.empty()) throw Error(Errc::EmptyDataset, "no training pairs");
  std::vector<model::TrainSample> out;
  for (const SamplePair& p : pairs) {
    p.validate();
    const Raster img = normalize(resize_bilinear(to_rgb(p.image), width, height), mean);
    const Raster sal = normalize_max(resize_bilinear(p.saliency, width, height));
    out.push_back({to_tensor(img), nn::Tensor(), to_tensor(sal), p.id});
  }
  return out;
}

std::vector<model::TrainSample> stage2_samples(std::span<const PatchSample> patches) {
  std::vector<model::TrainSample> out;
  out.reserve(patches.size());
  for (const PatchSample& p : patches) out.push_back(p.to_train_sample());
  return out;
}

std::size_t test_source_count(std::size_t sources, double test_fraction) {
  const auto n = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(sources)));
  return std::clamp<std::size_t>(n, 1, sources - 1);
}

std::vector<SyntheticOdi> synth_corpus_with_blobs(std::size_t n, int width, int height, std::uint64_t seed) {
  if (width < 2 || height < 1) throw Error(Errc::InvalidArgument, "synthetic ODI too small");
  std::vector<SyntheticOdi> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(seed * 1000003ULL + i);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    SyntheticOdi odi;
    const int blob_count = 1 + static_cast<int>(u(rng) * 3.0);
    for (int attempt = 0; static_cast<int>(odi.blobs.size()) < blob_count && attempt < 200; ++attempt) {
      Blob b;
      b.center = {2.0 * geometry::kPi * u(rng) - geometry::kPi / 2, std::asin(1.6 * u(rng) - 0.8)};
      b.sigma = 0.15 + 0.15 * u(rng);
      b.weight = 0.5 + 0.5 * u(rng);
      b.color = {static_cast<float>(180 + 75 * u(rng)), static_cast<float>(120 + 135 * u(rng)),
                 static_cast<float>(40 * u(rng))};
      const bool clear = std::all_of(odi.blobs.begin(), odi.blobs.end(), [&](const Blob& o) {
        return geometry::angular_distance(o.center, b.center) > 4.0 * std::max(o.sigma, b.sigma);
      });
      if (clear) odi.blobs.push_back(b);
    }

    const std::array<double, 3> sky{40 + 40 * u(rng), 60 + 40 * u(rng), 90 + 50 * u(rng)};
    const std::array<double, 3> ground{50 + 40 * u(rng), 50 + 30 * u(rng), 30 + 30 * u(rng)};
    const int checks = 8 + static_cast<int>(u(rng) * 8);

    Raster image(width, height, 3);
    Raster saliency(width, height, 1);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const SphericalCoord c = geometry::pixel_center_direction(x, y, width, height);
        const double t = 0.5 + 0.5 * std::sin(c.phi);
        const int cx = static_cast<int>(std::floor((c.theta + geometry::kPi / 2) / (2 * geometry::kPi) * checks));
        const int cy = static_cast<int>(std::floor((c.phi + geometry::kPi / 2) / geometry::kPi * checks / 2));
        const double check = ((cx + cy) % 2 == 0) ? 8.0 : -8.0;

        double alpha = 0.0, sal = 0.0;
        const Blob* top = nullptr;
        for (const Blob& b : odi.blobs) {
          const double d = geometry::angular_distance(c, b.center);
          const double g = std::exp(-0.5 * (d / b.sigma) * (d / b.sigma));
          sal += b.weight * g;
          if (g > alpha) {
            alpha = g;
            top = &b;
          }
        }
        for (int ch = 0; ch < 3; ++ch) {
          const double bg = t * sky[ch] + (1 - t) * ground[ch] + check;
          const double fg = top ? top->color[ch] : 0.0;
          image.at(x, y, ch) = static_cast<float>(std::clamp((1 - alpha) * bg + alpha * fg, 0.0, 255.0));
        }
        saliency.at(x, y) = static_cast<float>(sal);
      }
    }
    odi.pair = {std::move(image), std::move(saliency), "synth" + std::to_string(i)};
    corpus.push_back(std::move(odi));
  }
  return corpus;
}

std::vector<SamplePair> synth_corpus(std::size_t n, int width, int height, std::uint64_t seed) {
  std::vector<SamplePair> pairs;
  for (auto& odi : synth_corpus_with_blobs(n, width, height, seed)) pairs.push_back(std::move(odi.pair));
  return pairs;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + path.string());
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 3) throw Error(Errc::CorruptFile, "manifest line needs 3 fields: " + line);
    const auto resolve = [&](const std::string& p) {
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    entries.push_back({fields[0], resolve(fields[1]), resolve(fields[2])});
  }
  return entries;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write manifest " + path.string());
  for (const auto& e : entries) out << e.id << ", " << e.image.string() << ", " << e.saliency.string() << "\n";
}

std::vector<SamplePair> load_pairs(std::span<const ManifestEntry> entries) {
  std::vector<SamplePair> pairs;
  for (const auto& e : entries) {
    SamplePair p{read_png(e.image), read_saliency(e.saliency), e.id};
    p.validate();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace omnisal::data
