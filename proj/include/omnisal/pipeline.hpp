#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "omnisal/geometry.hpp"
#include "omnisal/metrics.hpp"
#include "omnisal/model.hpp"
#include "omnisal/raster.hpp"

namespace omnisal::pipeline {

struct PipelineOptions {
  double fov = geometry::kPi / 2;
  int patch_w = 256;
  int patch_h = 256;
  int blur_kernel = 64;
  int whole_w = 800;  // whole-image baseline resolution
  int whole_h = 400;
  std::size_t threads = 1;
};

enum class PatchStage { base, full };

/// Saliency for each of the six fixed views. Each returned patch holds a
/// single-channel map together with the sphere direction of every pixel.
std::vector<geometry::Patch> predict_patches(const model::SalNet& net, const EquirectImage& odi,
                                             const PipelineOptions& opts, PatchStage stage = PatchStage::full);

/// Splat, fill the holes with the Gaussian normalized convolution and
/// rescale to a maximum of 1.
SaliencyMap recombine(std::span<const geometry::Patch> patches, int width, int height, int blur_kernel);

/// Full pipeline: six views through both stages, then recombine.
SaliencyMap predict_odi(const model::SalNet& net, const EquirectImage& odi, const PipelineOptions& opts);

/// Six views through the base stage only, then recombine.
SaliencyMap predict_six_base(const model::SalNet& net, const EquirectImage& odi, const PipelineOptions& opts);

/// The whole panorama downscaled to whole_w x whole_h through the base
/// stage, upscaled back and rescaled to a maximum of 1.
SaliencyMap predict_whole_base(const model::SalNet& net, const EquirectImage& odi, const PipelineOptions& opts);

struct EvalItem {
  std::string id;
  EquirectImage odi;
  SaliencyMap gt;
  metrics::FixationSet fixations;  // empty -> synthesized from gt
};

struct AblationRow {
  std::string scenario;
  std::vector<metrics::MetricReport> per_image;
  metrics::Aggregate summary;
};

inline constexpr const char* kScenarioNames[3] = {"Base CNN (whole ODI)", "Base CNN + six patches",
                                                  "Above + spherical coords"};

/// Three rows in fixed order: whole-image baseline, six-patch base stage,
/// full pipeline. Throws EmptyDataset without items.
std::vector<AblationRow> ablation_report(const model::SalNet& net, std::span<const EvalItem> items,
                                         const PipelineOptions& opts, const metrics::MetricOptions& mopts);

/// "scenario,kl,cc,nss,auc" with the per-scenario means.
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);
void write_ablation_table(std::ostream& out, std::span<const AblationRow> rows);

}  // namespace omnisal::pipeline
