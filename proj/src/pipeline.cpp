#include "omnisal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "omnisal/data.hpp"
#include "omnisal/error.hpp"

namespace omnisal::pipeline {

namespace {

// Runs job(i) for i in [0, n) on at most `threads` workers; the first
// exception is rethrown on the caller's thread.
template <typename Job>
void parallel_for(std::size_t n, std::size_t threads, Job job) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<geometry::Patch> predict_patches(const model::SalNet& net, const EquirectImage& odi,
                                             const PipelineOptions& opts, PatchStage stage) {
  validate_equirect(odi);
  const Raster rgb = data::to_rgb(odi);
  const auto views = geometry::six_fixed_frustums(opts.fov, opts.patch_w, opts.patch_h);
  std::vector<geometry::Patch> out(views.size());
  parallel_for(views.size(), opts.threads, [&](std::size_t i) {
    geometry::Patch patch = geometry::extract_patch(rgb, views[i]);
    const nn::Tensor x = data::to_tensor(data::normalize(patch.image, net.image_mean()));
    nn::Tensor y;
    if (stage == PatchStage::full) {
      const auto coords = model::CoordChannels::from_coords(patch.coords, static_cast<std::size_t>(opts.patch_w),
                                                            static_cast<std::size_t>(opts.patch_h));
      y = net.forward_full(x, coords);
    } else {
      y = net.forward_base(x);
    }
    patch.image = data::to_raster(y);
    out[i] = std::move(patch);
  });
  return out;
}

SaliencyMap recombine(std::span<const geometry::Patch> patches, int width, int height, int blur_kernel) {
  geometry::SplatCanvas canvas(width, height);
  for (const auto& p : patches) canvas.splat(p);
  return normalize_max(geometry::gaussian_fill_and_smooth(canvas.resolve(), blur_kernel));
}

SaliencyMap predict_odi(const model::SalNet& net, const EquirectImage& odi, const PipelineOptions& opts) {
  const auto patches = predict_patches(net, odi, opts, PatchStage::full);
  return recombine(patches, odi.width, odi.height, opts.blur_kernel);
}

SaliencyMap predict_six_base(const model::SalNet& net, const EquirectImage& odi, const PipelineOptions& opts) {
  const auto patches = predict_patches(net, odi, opts, PatchStage::base);
  return recombine(patches, odi.width, odi.height, opts.blur_kernel);
}

SaliencyMap predict_whole_base(const model::SalNet& net, const EquirectImage& odi, const PipelineOptions& opts) {
  validate_equirect(odi);
  const Raster small = resize_bilinear(data::to_rgb(odi), opts.whole_w, opts.whole_h);
  const nn::Tensor y = net.forward_base(data::to_tensor(data::normalize(small, net.image_mean())));
  return normalize_max(resize_bilinear(data::to_raster(y), odi.width, odi.height));
}

std::vector<AblationRow> ablation_report(const model::SalNet& net, std::span<const EvalItem> items,
                                         const PipelineOptions& opts, const metrics::MetricOptions& mopts) {
  if (items.empty()) throw Error(Errc::EmptyDataset, "ablation needs at least one image");
  std::vector<AblationRow> rows(3);
  for (int s = 0; s < 3; ++s) rows[s].scenario = kScenarioNames[s];
  for (const EvalItem& item : items) {
    const SaliencyMap preds[3] = {predict_whole_base(net, item.odi, opts), predict_six_base(net, item.odi, opts),
                                  predict_odi(net, item.odi, opts)};
    for (int s = 0; s < 3; ++s) {
      metrics::MetricReport r = metrics::evaluate(preds[s], item.gt, item.fixations, mopts);
      r.image_id = item.id;
      rows[s].per_image.push_back(r);
    }
  }
  for (auto& row : rows) row.summary = metrics::aggregate(row.per_image);
  return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "scenario,kl,cc,nss,auc\n";
  char buf[160];
  for (const auto& row : rows) {
    const auto& m = row.summary.mean;
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", m.kl, m.cc, m.nss, m.auc);
    out << row.scenario << buf;
  }
}

void write_ablation_table(std::ostream& out, std::span<const AblationRow> rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %9s %9s %9s %9s\n", "scenario", "KL", "CC", "NSS", "AUC");
  out << buf;
  for (const auto& row : rows) {
    const auto& m = row.summary.mean;
    std::snprintf(buf, sizeof buf, "%-28s %9.4f %9.4f %9.4f %9.4f\n", row.scenario.c_str(), m.kl, m.cc, m.nss, m.auc);
    out << buf;
  }
}

}  // namespace omnisal::pipeline
