#include "omnisal/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "omnisal/data.hpp"
#include "omnisal/model.hpp"
#include "omnisal/raster_io.hpp"

namespace omnisal::cli {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::OutOfRange:
    case Errc::FovTooSmall:
      return kUsage;
    case Errc::IoError:
    case Errc::CorruptFile:
    case Errc::BadImage:
    case Errc::ArchitectureMismatch:
    case Errc::ShapeMismatch:
    case Errc::EmptyDataset:
    case Errc::TooFewSources:
    case Errc::EmptyFixations:
      return kIo;
    case Errc::Diverged:
    case Errc::AllZero:
    case Errc::ConstantInput:
    case Errc::AllHoles:
      return kNumeric;
  }
  return kNumeric;
}

void write_frustum_manifest(const fs::path& path, const FrustumManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "# odi " << m.odi_w << " " << m.odi_h << "\n# index yaw pitch fov out_w out_h\n";
  char buf[160];
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    const auto& f = m.views[i];
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g %.17g %d %d\n", i, f.yaw, f.pitch, f.fov, f.out_w, f.out_h);
    out << buf;
  }
}

FrustumManifest read_frustum_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  FrustumManifest m;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    if (line.rfind("# odi", 0) == 0) {
      std::string hash, tag;
      if (!(ss >> hash >> tag >> m.odi_w >> m.odi_h)) throw Error(Errc::CorruptFile, "bad odi line in " + path.string());
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::size_t index;
    geometry::ViewFrustum f;
    if (!(ss >> index >> f.yaw >> f.pitch >> f.fov >> f.out_w >> f.out_h) || index != m.views.size())
      throw Error(Errc::CorruptFile, "bad frustum line in " + path.string());
    f.validate();
    m.views.push_back(f);
  }
  if (m.odi_w <= 0 || m.odi_h <= 0) throw Error(Errc::CorruptFile, "missing odi size in " + path.string());
  return m;
}

Raster make_preview(const EquirectImage& odi, const SaliencyMap& saliency) {
  if (odi.width != saliency.width || odi.height != saliency.height)
    throw Error(Errc::ShapeMismatch, "preview needs matching sizes");
  const Raster rgb = data::to_rgb(odi);
  const SaliencyMap s = normalize_max(saliency);
  Raster out(2 * odi.width, odi.height, 3);
  const auto ramp = [](double t, double centre) { return std::clamp(1.5 - std::abs(4.0 * t - centre), 0.0, 1.0); };
  for (int y = 0; y < odi.height; ++y) {
    for (int x = 0; x < odi.width; ++x) {
      const double t = s.at(x, y);
      const double heat[3] = {ramp(t, 3.0), ramp(t, 2.0), ramp(t, 1.0)};
      for (int c = 0; c < 3; ++c) {
        const float v = rgb.at(x, y, c);
        out.at(x, y, c) = v;
        out.at(x + odi.width, y, c) = static_cast<float>(0.5 * v + 0.5 * 255.0 * heat[c]);
      }
    }
  }
  return out;
}

void write_saliency(const fs::path& path, const SaliencyMap& map) {
  if (path.extension() == ".png")
    write_saliency_png(path, map);
  else
    write_sal(path, map);
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

// Help text shows 0.7 rather than its round-trip spelling.
std::string short_value(const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", d);
  return buf;
}

Raster clamp_to_byte_range(Raster r) {
  for (float& v : r.data) v = std::clamp(v, 0.0f, 255.0f);
  return r;
}

std::optional<fs::path> find_with_stem(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".sal", ".png"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

// Float maps first, so a panorama named <stem>.png next to <stem>_sal.sal
// is never taken for its own ground truth.
std::optional<fs::path> find_ground_truth(const fs::path& dir, const std::string& stem) {
  for (const std::string& name : {stem + ".sal", stem + "_sal.sal", stem + "_sal.png", stem + ".png"})
    if (fs::exists(dir / name)) return dir / name;
  return std::nullopt;
}

metrics::FixationSet fixations_for(const std::optional<fs::path>& fx_dir, const std::string& stem) {
  if (!fx_dir) return {};
  const fs::path p = *fx_dir / (stem + ".txt");
  if (!fs::exists(p)) return {};
  return metrics::read_fixations(p.string());
}

}  // namespace

void cmd_extract(const fs::path& odi_path, const fs::path& out_dir, const Config& cfg) {
  cfg.validate();
  const EquirectImage odi = read_png(odi_path);
  validate_equirect(odi);
  ensure_dir(out_dir);
  const auto opts = cfg.pipeline_options();
  FrustumManifest manifest{odi.width, odi.height, geometry::six_fixed_frustums(opts.fov, opts.patch_w, opts.patch_h)};
  for (std::size_t i = 0; i < manifest.views.size(); ++i) {
    const geometry::Patch p = geometry::extract_patch(odi, manifest.views[i]);
    write_png(out_dir / ("patch_" + std::to_string(i) + ".png"), clamp_to_byte_range(p.image));
    Raster coords(p.image.width, 2 * p.image.height, 1);
    const std::size_t plane = p.coords.size();
    for (std::size_t k = 0; k < plane; ++k) {
      coords.data[k] = static_cast<float>(p.coords[k].theta);
      coords.data[plane + k] = static_cast<float>(p.coords[k].phi);
    }
    write_sal(out_dir / ("coords_" + std::to_string(i) + ".sal"), coords);
  }
  write_frustum_manifest(out_dir / "frustums.txt", manifest);
}

void cmd_recombine(const fs::path& patch_dir, const fs::path& out_path, const Config& cfg) {
  cfg.validate();
  const FrustumManifest m = read_frustum_manifest(patch_dir / "frustums.txt");
  std::vector<geometry::Patch> patches;
  for (std::size_t i = 0; i < m.views.size(); ++i) {
    const auto file = find_with_stem(patch_dir, "saliency_" + std::to_string(i));
    if (!file) throw Error(Errc::IoError, "missing saliency_" + std::to_string(i) + " in " + patch_dir.string());
    geometry::Patch p{read_saliency(*file), geometry::patch_pixel_directions(m.views[i]), m.views[i]};
    if (p.image.width != m.views[i].out_w || p.image.height != m.views[i].out_h)
      throw Error(Errc::ShapeMismatch, file->string() + " does not match its view size");
    patches.push_back(std::move(p));
  }
  write_saliency(out_path, pipeline::recombine(patches, m.odi_w, m.odi_h, cfg.blur_kernel));
}

void cmd_predict(const fs::path& odi_path, const fs::path& weights_dir, const fs::path& out_path,
                 const std::optional<fs::path>& preview_path, const Config& cfg) {
  cfg.validate();
  const model::SalNet net = model::load_weights(weights_dir);
  const EquirectImage odi = read_png(odi_path);
  const SaliencyMap map = pipeline::predict_odi(net, odi, cfg.pipeline_options());
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  write_saliency(out_path, map);
  const fs::path preview =
      preview_path ? *preview_path : out_path.parent_path() / (out_path.stem().string() + "_preview.png");
  write_png(preview, clamp_to_byte_range(make_preview(odi, map)));
}

void cmd_init(const fs::path& weights_out, const std::optional<fs::path>& pretrained, const Config& cfg) {
  cfg.validate();
  model::SalNet net = model::SalNet::build(cfg.seed, pretrained);
  net.set_image_mean(cfg.image_mean);
  ensure_dir(weights_out);
  model::save_weights(net, weights_out);
}

model::TrainResult cmd_train(const fs::path& manifest, int stage, const std::optional<fs::path>& weights_in,
                             const fs::path& weights_out, const std::optional<fs::path>& log_path,
                             const Config& cfg) {
  cfg.validate();
  if (stage != 1 && stage != 2) throw Error(Errc::InvalidArgument, "stage must be 1 or 2");
  if (stage == 2 && !weights_in) throw Error(Errc::InvalidArgument, "stage 2 needs --weights-in");

  const auto entries = data::read_manifest(manifest);
  const auto pairs = data::load_pairs(entries);
  if (pairs.empty()) throw Error(Errc::EmptyDataset, "manifest lists no images");

  // Held-out sources are chosen on whole panoramas so that no panorama
  // contributes to both splits.
  std::vector<data::SamplePair> train_pairs = pairs, test_pairs;
  if (pairs.size() >= 2)
    std::tie(train_pairs, test_pairs) = data::split<data::SamplePair>(pairs, cfg.test_fraction, cfg.seed);

  model::SalNet net;
  model::TrainResult result;
  const auto opts = cfg.train_options();
  if (stage == 1) {
    net = model::SalNet::build(cfg.seed, weights_in);
    net.set_image_mean(cfg.image_mean);
    const auto train = data::stage1_samples(train_pairs, cfg.train_w, cfg.train_h, cfg.image_mean);
    const auto test = test_pairs.empty() ? std::vector<model::TrainSample>{}
                                         : data::stage1_samples(test_pairs, cfg.train_w, cfg.train_h, cfg.image_mean);
    result = model::train_stage1(net, train, test, opts);
  } else {
    net = model::load_weights(*weights_in);
    data::PatchDatasetOptions popts;
    popts.n_per_odi = static_cast<std::size_t>(cfg.n_per_odi);
    popts.fov = cfg.pipeline_options().fov;
    popts.out_w = cfg.patch_w;
    popts.out_h = cfg.patch_h;
    popts.seed = cfg.seed;
    popts.mean = net.image_mean();
    const auto train_patches = data::build_patch_dataset(train_pairs, popts);
    const auto train = data::stage2_samples(train_patches);
    std::vector<model::TrainSample> test;
    if (!test_pairs.empty()) {
      popts.seed = cfg.seed + 1;
      test = data::stage2_samples(data::build_patch_dataset(test_pairs, popts));
    }
    result = model::train_stage2(net, train, test, opts);
  }
  ensure_dir(weights_out);
  model::save_weights(net, weights_out);
  model::write_training_log(log_path ? *log_path : weights_out / "train_log.txt", result.log);
  return result;
}

std::vector<metrics::MetricReport> cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir,
                                            const std::optional<fs::path>& fx_dir, const fs::path& out_csv,
                                            const Config& cfg, std::ostream* table) {
  cfg.validate();
  if (!fs::is_directory(pred_dir)) throw Error(Errc::IoError, "not a directory: " + pred_dir.string());
  // .sal predictions win; PNGs are only read from directories without any,
  // so previews written next to the maps are not mistaken for predictions.
  std::map<std::string, fs::path> preds;
  for (const char* wanted : {".sal", ".png"}) {
    for (const auto& entry : fs::directory_iterator(pred_dir))
      if (entry.is_regular_file() && entry.path().extension() == wanted)
        preds[entry.path().stem().string()] = entry.path();
    if (!preds.empty()) break;
  }
  if (preds.empty()) throw Error(Errc::EmptyDataset, "no predictions in " + pred_dir.string());

  std::vector<metrics::MetricReport> rows;
  for (const auto& [stem, pred_path] : preds) {
    const auto gt_path = find_ground_truth(gt_dir, stem);
    if (!gt_path) throw Error(Errc::IoError, "no ground truth for " + stem + " in " + gt_dir.string());
    auto report = metrics::evaluate(read_saliency(pred_path), read_saliency(*gt_path), fixations_for(fx_dir, stem),
                                    cfg.metric_options());
    report.image_id = stem;
    rows.push_back(report);
  }
  std::ofstream out(out_csv, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + out_csv.string());
  metrics::write_csv(out, rows);
  if (table) metrics::write_table(*table, rows);
  return rows;
}

std::vector<pipeline::AblationRow> cmd_ablate(const fs::path& manifest, const fs::path& weights_dir,
                                              const fs::path& out_csv, const std::optional<fs::path>& fx_dir,
                                              const Config& cfg, std::ostream* table) {
  cfg.validate();
  const model::SalNet net = model::load_weights(weights_dir);
  const auto pairs = data::load_pairs(data::read_manifest(manifest));
  std::vector<pipeline::EvalItem> items;
  for (const auto& p : pairs) items.push_back({p.id, p.image, p.saliency, fixations_for(fx_dir, p.id)});
  const auto rows = pipeline::ablation_report(net, items, cfg.pipeline_options(), cfg.metric_options());
  std::ofstream out(out_csv, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + out_csv.string());
  pipeline::write_ablation_csv(out, rows);
  if (table) pipeline::write_ablation_table(*table, rows);
  return rows;
}

void cmd_synth(const fs::path& out_dir, std::size_t count, int width, int height, std::uint64_t seed) {
  if (count == 0 || width < 2 || height < 1) throw Error(Errc::InvalidArgument, "synth needs count >= 1 and a positive size");
  ensure_dir(out_dir);
  std::vector<data::ManifestEntry> entries;
  for (const auto& pair : data::synth_corpus(count, width, height, seed)) {
    const fs::path image = pair.id + ".png";
    const fs::path sal = pair.id + "_sal.sal";
    write_png(out_dir / image, pair.image);
    write_sal(out_dir / sal, pair.saliency);
    entries.push_back({pair.id, image, sal});
  }
  data::write_manifest(out_dir / "manifest.csv", entries);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Saliency prediction for equirectangular panoramas"};
  app.require_subcommand(1);
  app.fallthrough();

  Config cfg;
  std::string config_path;
  app.add_option("--config", config_path, "key = value file; command-line flags take precedence");
  std::map<std::string, std::string> overrides;
  for (const auto& key : config_keys())
    app.add_option(std::string("--") + key.name, overrides[key.name], key.help)->default_str(short_value(cfg.get(key.name)));

  std::string odi, out_dir, out_path, weights, weights_in, weights_out, log_path, manifest, pred_dir, gt_dir, fx_dir,
      preview, pretrained, patch_dir;
  int stage = 0, width = 128, height = 64;
  std::size_t count = 2;

  auto* extract = app.add_subcommand("extract", "cut the six fixed views out of a panorama");
  extract->add_option("odi", odi, "input panorama (PNG)")->required();
  extract->add_option("out_dir", out_dir, "output directory")->required();

  auto* recombine = app.add_subcommand("recombine", "merge per-view saliency back onto the panorama");
  recombine->add_option("patch_dir", patch_dir, "directory with frustums.txt and saliency_{i}.sal")->required();
  recombine->add_option("out", out_path, "output map (.sal or .png)")->required();

  auto* predict = app.add_subcommand("predict", "predict a saliency map");
  predict->add_option("odi", odi, "input panorama (PNG)")->required();
  predict->add_option("--weights", weights, "weights directory")->required();
  predict->add_option("--out", out_path, "output map (.sal or .png)")->required();
  predict->add_option("--preview", preview, "side-by-side preview PNG (default <out>_preview.png)");

  auto* init = app.add_subcommand("init", "write randomly initialised weights");
  init->add_option("--weights-out", weights_out, "output weights directory")->required();
  init->add_option("--pretrained", pretrained, "weights directory providing conv1..conv3");

  auto* train = app.add_subcommand("train", "train one stage");
  train->add_option("--manifest", manifest, "CSV of id, image, saliency")->required();
  train->add_option("--stage", stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
  train->add_option("--weights-in", weights_in, "starting weights (stage 1: pretrained conv1..conv3)");
  train->add_option("--weights-out", weights_out, "output weights directory")->required();
  train->add_option("--log", log_path, "training log (default <weights-out>/train_log.txt)");

  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--pred", pred_dir, "directory of predicted maps")->required();
  eval->add_option("--gt", gt_dir, "directory of ground-truth maps")->required();
  eval->add_option("--fixations", fx_dir, "directory of <id>.txt fixation lists");
  eval->add_option("--out", out_path, "output CSV")->required();

  auto* ablate = app.add_subcommand("ablate", "compare the three prediction scenarios");
  ablate->add_option("--manifest", manifest, "CSV of id, image, saliency")->required();
  ablate->add_option("--weights", weights, "weights directory")->required();
  ablate->add_option("--fixations", fx_dir, "directory of <id>.txt fixation lists");
  ablate->add_option("--out", out_path, "output CSV")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--count", count, "number of panoramas")->default_str("2");
  synth->add_option("--width", width, "panorama width")->default_str("128");
  synth->add_option("--height", height, "panorama height")->default_str("64");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
  try {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& key : config_keys())
      if (app.count(std::string("--") + key.name) > 0) cfg.set(key.name, overrides[key.name]);

    if (*extract) {
      cmd_extract(odi, out_dir, cfg);
    } else if (*recombine) {
      cmd_recombine(patch_dir, out_path, cfg);
    } else if (*predict) {
      cmd_predict(odi, weights, out_path, opt(preview), cfg);
    } else if (*init) {
      cmd_init(weights_out, opt(pretrained), cfg);
    } else if (*train) {
      const auto result = cmd_train(manifest, stage, opt(weights_in), weights_out, opt(log_path), cfg);
      char buf[128];
      std::snprintf(buf, sizeof buf, "train loss %.6g -> %.6g\n", result.initial_train_loss, result.final_train_loss);
      out << buf;
    } else if (*eval) {
      cmd_eval(pred_dir, gt_dir, opt(fx_dir), out_path, cfg, &out);
    } else if (*ablate) {
      cmd_ablate(manifest, weights, out_path, opt(fx_dir), cfg, &out);
    } else if (*synth) {
      cfg.validate();
      cmd_synth(out_dir, count, width, height, cfg.seed);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}

}  // namespace omnisal::cli
