#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "omnisal/config.hpp"
#include "omnisal/error.hpp"
#include "omnisal/geometry.hpp"
#include "omnisal/metrics.hpp"
#include "omnisal/pipeline.hpp"
#include "omnisal/train.hpp"

namespace omnisal::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };
int exit_code_for(Errc code);

/// View list written next to extracted patches.
struct FrustumManifest {
  int odi_w = 0;
  int odi_h = 0;
  std::vector<geometry::ViewFrustum> views;
};
void write_frustum_manifest(const fs::path& path, const FrustumManifest& manifest);
FrustumManifest read_frustum_manifest(const fs::path& path);

/// Panorama on the left, saliency blended over it on the right.
Raster make_preview(const EquirectImage& odi, const SaliencyMap& saliency);

/// .png outputs are scaled to 8 bits, anything else is written as .sal.
void write_saliency(const fs::path& path, const SaliencyMap& map);

// Commands throw omnisal::Error; run() maps codes onto exit statuses.

/// patch_{i}.png, coords_{i}.sal (theta rows above phi rows) and frustums.txt.
void cmd_extract(const fs::path& odi_path, const fs::path& out_dir, const Config& cfg);

/// Reads saliency_{i}.sal (or .png) for every view in frustums.txt and
/// recombines them into one equirectangular map.
void cmd_recombine(const fs::path& patch_dir, const fs::path& out_path, const Config& cfg);

/// Full pipeline; also writes a side-by-side preview PNG.
void cmd_predict(const fs::path& odi_path, const fs::path& weights_dir, const fs::path& out_path,
                 const std::optional<fs::path>& preview_path, const Config& cfg);

/// Randomly initialised weights, optionally seeded with pretrained conv1..conv3.
void cmd_init(const fs::path& weights_out, const std::optional<fs::path>& pretrained, const Config& cfg);

/// Stage 1 trains the base stage on resized panoramas, stage 2 both stages on
/// random patches and requires `weights_in`. The log defaults to
/// weights_out/train_log.txt.
model::TrainResult cmd_train(const fs::path& manifest, int stage, const std::optional<fs::path>& weights_in,
                             const fs::path& weights_out, const std::optional<fs::path>& log_path,
                             const Config& cfg);

/// Matches predictions to ground truth by file stem, trying <stem>.sal,
/// <stem>_sal.sal (what `synth` writes), <stem>_sal.png and <stem>.png in
/// that order; fixations come from
/// <fx_dir>/<stem>.txt when present.
std::vector<metrics::MetricReport> cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir,
                                            const std::optional<fs::path>& fx_dir, const fs::path& out_csv,
                                            const Config& cfg, std::ostream* table = nullptr);

std::vector<pipeline::AblationRow> cmd_ablate(const fs::path& manifest, const fs::path& weights_dir,
                                              const fs::path& out_csv, const std::optional<fs::path>& fx_dir,
                                              const Config& cfg, std::ostream* table = nullptr);

/// Writes a synthetic corpus with manifest.csv.
void cmd_synth(const fs::path& out_dir, std::size_t count, int width, int height, std::uint64_t seed);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace omnisal::cli
