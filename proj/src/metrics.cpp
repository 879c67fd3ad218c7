#include "omnisal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "omnisal/error.hpp"
#include "omnisal/geometry.hpp"

namespace omnisal::metrics {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(Errc::ShapeMismatch, std::string(what) + ": sizes differ");
}

void require_fixations(const SaliencyMap& m, const FixationSet& fx) {
  if (fx.empty()) throw Error(Errc::EmptyFixations, "no fixations");
  for (const Fixation& f : fx)
    if (f.x < 0 || f.y < 0 || f.x >= m.width || f.y >= m.height)
      throw Error(Errc::OutOfRange, "fixation outside the raster");
}

std::pair<double, double> mean_std(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

std::vector<double> widen(const SaliencyMap& m) { return {m.data.begin(), m.data.end()}; }

}  // namespace

double row_weight(int y, int height) {
  return std::cos(geometry::kPi / 2 - (y + 0.5) * geometry::kPi / height);
}

std::vector<double> to_distribution(const SaliencyMap& m, bool latitude_weighted) {
  if (m.channels != 1) throw Error(Errc::InvalidArgument, "saliency map must have one channel");
  std::vector<double> p(m.data.size());
  double total = 0.0;
  for (int y = 0; y < m.height; ++y) {
    const double w = latitude_weighted ? row_weight(y, m.height) : 1.0;
    for (int x = 0; x < m.width; ++x) {
      const std::size_t i = m.index(x, y);
      p[i] = w * m.data[i];
      total += p[i];
    }
  }
  if (!(total > 0.0)) throw Error(Errc::AllZero, "saliency map has no positive mass");
  for (double& v : p) v /= total;
  return p;
}

double kl_divergence(std::span<const double> pred, std::span<const double> gt, double eps) {
  require_same(pred.size(), gt.size(), "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) kl += gt[i] * std::log(gt[i] / (pred[i] + eps) + eps);
  return kl;
}

double pearson_cc(std::span<const double> pred, std::span<const double> gt) {
  require_same(pred.size(), gt.size(), "pearson_cc");
  if (pred.empty()) throw Error(Errc::InvalidArgument, "empty maps");
  const auto [mp, sp] = mean_std(pred);
  const auto [mg, sg] = mean_std(gt);
  if (sp == 0.0 || sg == 0.0) throw Error(Errc::ConstantInput, "CC undefined for a constant map");
  double cov = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) cov += (pred[i] - mp) * (gt[i] - mg);
  cov /= static_cast<double>(pred.size());
  return std::clamp(cov / (sp * sg), -1.0, 1.0);
}

double pearson_cc(const SaliencyMap& pred, const SaliencyMap& gt) {
  if (!pred.same_dims(gt)) throw Error(Errc::ShapeMismatch, "pearson_cc: raster dims differ");
  const auto p = widen(pred), g = widen(gt);
  return pearson_cc(p, g);
}

double nss(const SaliencyMap& pred, const FixationSet& fx) {
  require_fixations(pred, fx);
  const auto v = widen(pred);
  const auto [mean, sd] = mean_std(v);
  if (sd == 0.0) return 0.0;
  double sum = 0.0;
  for (const Fixation& f : fx) sum += (v[pred.index(f.x, f.y)] - mean) / sd;
  return sum / static_cast<double>(fx.size());
}

double auc_judd(const SaliencyMap& pred, const FixationSet& fx) {
  require_fixations(pred, fx);
  std::vector<std::uint8_t> fixated(pred.data.size(), 0);
  std::vector<double> pos;
  pos.reserve(fx.size());
  for (const Fixation& f : fx) {
    const std::size_t i = pred.index(f.x, f.y);
    fixated[i] = 1;
    pos.push_back(pred.data[i]);
  }
  std::vector<double> neg;
  for (std::size_t i = 0; i < pred.data.size(); ++i)
    if (!fixated[i]) neg.push_back(pred.data[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  std::vector<double> thresholds = pos;
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // Sweep from the highest threshold down; (0,0) and (1,1) close the curve.
  const auto at_least = [](const std::vector<double>& sorted, double t) {
    return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };
  double area = 0.0, prev_tp = 0.0, prev_fp = 0.0;
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    const double tp = at_least(pos, *it) / static_cast<double>(pos.size());
    const double fp = neg.empty() ? 0.0 : at_least(neg, *it) / static_cast<double>(neg.size());
    area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
    prev_tp = tp;
    prev_fp = fp;
  }
  area += (1.0 - prev_fp) * (1.0 + prev_tp) / 2.0;
  return area;
}

FixationSet synthesize_fixations(const SaliencyMap& gt, double percent) {
  if (!(percent > 0.0 && percent <= 100.0)) throw Error(Errc::InvalidArgument, "fixation percent must lie in (0, 100]");
  const std::size_t n = gt.data.size();
  if (n == 0) throw Error(Errc::InvalidArgument, "empty map");
  const std::size_t k =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(n))), 1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gt.data[a] > gt.data[b]; });
  FixationSet fx;
  fx.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    fx.push_back({static_cast<int>(order[i] % gt.width), static_cast<int>(order[i] / gt.width)});
  return fx;
}

FixationSet read_fixations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open fixations " + path);
  FixationSet fx;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    Fixation f;
    if (!(ss >> f.x)) continue;
    if (!(ss >> f.y)) throw Error(Errc::CorruptFile, "fixation line needs two integers: " + line);
    fx.push_back(f);
  }
  return fx;
}

MetricReport evaluate(const SaliencyMap& pred, const SaliencyMap& gt, const FixationSet& fx,
                      const MetricOptions& opts) {
  if (!pred.same_dims(gt)) throw Error(Errc::ShapeMismatch, "prediction and ground truth differ in size");
  MetricReport r;
  const auto p = to_distribution(pred, opts.latitude_weighted);
  const auto g = to_distribution(gt, opts.latitude_weighted);
  r.kl = kl_divergence(p, g, opts.eps);
  const auto [lo, hi] = std::minmax_element(pred.data.begin(), pred.data.end());
  r.constant_prediction = *lo == *hi;
  r.cc = r.constant_prediction ? 0.0 : pearson_cc(p, g);
  const FixationSet& used = fx.empty() ? synthesize_fixations(gt, opts.fixation_percent) : fx;
  r.synthesized_fixations = fx.empty();
  r.nss = nss(pred, used);
  r.auc = auc_judd(pred, used);
  return r;
}

Aggregate aggregate(std::span<const MetricReport> rows) {
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no rows to aggregate");
  Aggregate a;
  a.mean.image_id = "mean";
  a.stddev.image_id = "std";
  const auto column = [&](double MetricReport::*field, double& mean, double& sd) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.*field);
    std::tie(mean, sd) = mean_std(v);
  };
  column(&MetricReport::kl, a.mean.kl, a.stddev.kl);
  column(&MetricReport::cc, a.mean.cc, a.stddev.cc);
  column(&MetricReport::nss, a.mean.nss, a.stddev.nss);
  column(&MetricReport::auc, a.mean.auc, a.stddev.auc);
  return a;
}

void write_csv(std::ostream& out, std::span<const MetricReport> rows, bool with_summary) {
  char buf[160];
  const auto line = [&](const MetricReport& r) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", r.kl, r.cc, r.nss, r.auc);
    out << r.image_id << buf;
  };
  out << "image_id,kl,cc,nss,auc\n";
  for (const auto& r : rows) line(r);
  if (with_summary && !rows.empty()) {
    const Aggregate a = aggregate(rows);
    line(a.mean);
    line(a.stddev);
  }
}

void write_table(std::ostream& out, std::span<const MetricReport> rows, bool with_summary) {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.image_id.size());
  char buf[256];
  const auto line = [&](const MetricReport& r) {
    std::snprintf(buf, sizeof buf, "%-*s %9.4f %9.4f %9.4f %9.4f%s\n", static_cast<int>(width), r.image_id.c_str(),
                  r.kl, r.cc, r.nss, r.auc, r.synthesized_fixations ? "  *" : "");
    out << buf;
    if (r.constant_prediction) out << "  (constant prediction, CC set to 0)\n";
  };
  std::snprintf(buf, sizeof buf, "%-*s %9s %9s %9s %9s\n", static_cast<int>(width), "image", "KL", "CC", "NSS",
                "AUC");
  out << buf;
  bool any_synth = false;
  for (const auto& r : rows) {
    line(r);
    any_synth |= r.synthesized_fixations;
  }
  if (with_summary && !rows.empty()) {
    const Aggregate a = aggregate(rows);
    line(a.mean);
    line(a.stddev);
  }
  if (any_synth) out << "* fixations synthesized from the top pixels of the ground truth\n";
}

}  // namespace omnisal::metrics
