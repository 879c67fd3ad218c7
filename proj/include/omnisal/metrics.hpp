#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "omnisal/raster.hpp"

namespace omnisal::metrics {

struct Fixation {
  int x = 0;
  int y = 0;
  bool operator==(const Fixation&) const = default;
};
using FixationSet = std::vector<Fixation>;

inline constexpr double kKlEpsilon = 1e-7;

/// cos(latitude) of the pixel-centre row y in a raster of the given height.
double row_weight(int y, int height);

/// p_i = w_i m_i / sum_j w_j m_j, w = cos(latitude) when weighted, else 1.
/// Throws AllZero when the weighted mass is not positive.
std::vector<double> to_distribution(const SaliencyMap& m, bool latitude_weighted);

/// sum gt_i ln(gt_i / (pred_i + eps) + eps).
double kl_divergence(std::span<const double> pred, std::span<const double> gt, double eps = kKlEpsilon);

/// Pearson correlation over all pixels. Throws ConstantInput when either side
/// has zero variance.
double pearson_cc(std::span<const double> pred, std::span<const double> gt);
double pearson_cc(const SaliencyMap& pred, const SaliencyMap& gt);

/// Mean z-score of `pred` at the fixations (population std). A constant map
/// scores 0.
double nss(const SaliencyMap& pred, const FixationSet& fx);

/// AUC-Judd: one threshold per distinct value found at a fixation, a pixel
/// counts as positive when its value is >= the threshold. Fixated pixels are
/// positives, all remaining pixels negatives. Trapezoidal area.
double auc_judd(const SaliencyMap& pred, const FixationSet& fx);

/// The top `percent` % of pixels (at least one), highest first; ties keep
/// raster order.
FixationSet synthesize_fixations(const SaliencyMap& gt, double percent = 1.0);

/// Text file of "x y" lines; '#' starts a comment.
FixationSet read_fixations(const std::string& path);

struct MetricOptions {
  bool latitude_weighted = true;
  double eps = kKlEpsilon;
  double fixation_percent = 1.0;
};

struct MetricReport {
  std::string image_id;
  double kl = 0.0;
  double cc = 0.0;
  double nss = 0.0;
  double auc = 0.0;
  bool synthesized_fixations = false;
  bool constant_prediction = false;  // CC reported as 0
};

/// All four metrics. KL and CC compare to_distribution of both maps. An
/// empty `fx` is replaced by synthesize_fixations(gt). A constant prediction
/// has no correlation to report; its CC is 0, mirroring the NSS convention.
MetricReport evaluate(const SaliencyMap& pred, const SaliencyMap& gt, const FixationSet& fx,
                      const MetricOptions& opts = {});

struct Aggregate {
  MetricReport mean;
  MetricReport stddev;  // population form
};

/// Throws EmptyDataset on an empty table.
Aggregate aggregate(std::span<const MetricReport> rows);

/// "image_id,kl,cc,nss,auc", one row per image, then "mean" and "std" rows.
void write_csv(std::ostream& out, std::span<const MetricReport> rows, bool with_summary = true);
void write_table(std::ostream& out, std::span<const MetricReport> rows, bool with_summary = true);

}  // namespace omnisal::metrics
