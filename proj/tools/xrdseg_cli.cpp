// Command-line front end for the segmentation pipeline:
// synth -> prepare -> train -> predict -> evaluate/compare, plus the
// threshold baseline, sweeps and masked azimuthal integration.

#include <xrdseg/io.hpp>
#include <xrdseg/pipeline.hpp>
#include <xrdseg/synth.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace xrdseg;

namespace {

// Relative output paths resolve against XRDSEG_ARTIFACT_ROOT when it is set.
fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("XRDSEG_ARTIFACT_ROOT")) {
    return fs::path(root) / p;
  }
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --config JSON is applied before flag parsing so explicit flags win.
TrainConfig preload_train_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      return train_config_from_json(slurp(argv[i + 1]));
    }
  }
  return TrainConfig{};
}

void add_train_options(CLI::App* cmd, TrainConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  cmd->add_option("--manifest", cfg.manifest_path, "dataset manifest path");
  cmd->add_option("--window", cfg.window, "tile side (power of two)");
  cmd->add_option("--step", cfg.step, "tile stride");
  cmd->add_option("--depth", cfg.depth, "U-Net depth");
  cmd->add_option("--base-channels", cfg.base_channels, "channels after first conv");
  cmd->add_option("--growth", cfg.growth_rate, "channel growth rate per level");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--batch-size", cfg.batch_size, "tiles per batch");
  cmd->add_option("--lr", cfg.lr, "ADAM learning rate");
  cmd->add_option("--split", cfg.split_fraction, "train split fraction");
  cmd->add_flag("--augment,!--no-augment", cfg.augment,
                "expand sources with rotations/flips before cropping");
  cmd->add_option("--seed", cfg.seed, "master seed");
}

int cmd_synth(const std::string& archetype, int images, Index size, std::uint64_t seed,
              const std::string& out) {
  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  const Archetype arch = archetype_from_string(archetype);
  const auto dataset = make_dataset(images, arch, size, seed);

  DatasetManifest manifest;
  manifest.root = dir;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    char id[64];
    std::snprintf(id, sizeof(id), "%s_%03zu", archetype.c_str(), i);
    const std::string image_name = std::string(id) + ".img";
    const std::string mask_name = std::string(id) + ".mask";
    write_image_file(dir / image_name, dataset[i].scene.image, "image");
    MaskImage truth;
    truth.grid = dataset[i].scene.mask;
    truth.provenance = MaskProvenance::Manual;
    truth.source_id = id;
    write_mask_file(dir / mask_name, truth);
    std::ofstream spec(dir / (std::string(id) + ".scene.json"));
    spec << scene_spec_to_json(dataset[i].spec) << "\n";

    ManifestEntry entry;
    entry.id = id;
    entry.image_path = image_name;
    entry.mask_path = mask_name;
    entry.archetype = archetype;
    entry.geometry = dataset[i].spec.geometry;
    manifest.entries.push_back(std::move(entry));
  }
  write_manifest(dir / "manifest.json", manifest);
  write_geometry_file(dir / "geometry.json", dataset[0].spec.geometry);
  std::printf("wrote %zu %s images to %s\n", dataset.size(), archetype.c_str(),
              dir.string().c_str());
  return 0;
}

int cmd_prepare(const TrainConfig& cfg, const std::string& out) {
  if (cfg.manifest_path.empty()) throw ConfigError("prepare: --manifest is required");
  const DatasetManifest manifest = read_manifest(cfg.manifest_path);
  const TileStore store = prepare_tiles(manifest, cfg);
  const fs::path dir = resolve_out(out);
  save_tile_store(dir, store);
  std::printf("prepared %zu tiles (%lld train / %lld reserved) -> %s\n",
              store.tiles.size(), static_cast<long long>(store.train_count()),
              static_cast<long long>(Index(store.tiles.size()) - store.train_count()),
              dir.string().c_str());
  return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& tiles_dir,
              const std::string& out) {
  TileStore store;
  if (!tiles_dir.empty()) {
    store = load_tile_store(resolve_out(tiles_dir));
  } else {
    if (cfg.manifest_path.empty()) {
      throw ConfigError("train: provide --tiles or --manifest");
    }
    store = prepare_tiles(read_manifest(cfg.manifest_path), cfg);
  }
  TrainResult result = train_unet(store, cfg);

  const fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  CheckpointMeta meta;
  meta.unet = result.model.config;
  meta.window = cfg.window;
  meta.step = cfg.step;
  meta.epoch = cfg.epochs;
  meta.seed = cfg.seed;
  meta.augment = cfg.augment;
  meta.metrics = result.record.reserved_metrics;
  save_checkpoint(dir / "checkpoint", result.model, meta);
  result.record.checkpoint_path = (dir / "checkpoint").string();
  write_run_record(dir / "run_record.json", result.record);

  std::printf("trained %d epochs in %.1fs", cfg.epochs, result.record.train_seconds);
  if (!result.record.epoch_loss.empty()) {
    std::printf(", final loss %.6g", result.record.epoch_loss.back());
  }
  if (auto it = result.record.reserved_metrics.find("recall");
      it != result.record.reserved_metrics.end()) {
    std::printf(", reserved recall %.4f", it->second);
  }
  std::printf("\ncheckpoint -> %s\n", (dir / "checkpoint").string().c_str());
  return 0;
}

int cmd_sweep(const TrainConfig& base, const std::vector<Index>& windows,
              const std::vector<int>& depths, const std::vector<int>& epoch_counts,
              int repeats, bool resample_images, int train_images,
              const std::string& out) {
  if (base.manifest_path.empty()) throw ConfigError("sweep: --manifest is required");
  SweepConfig cfg;
  cfg.base = base;
  cfg.windows = windows.empty() ? std::vector<Index>{base.window} : windows;
  cfg.depths = depths.empty() ? std::vector<int>{base.depth} : depths;
  cfg.epoch_counts = epoch_counts.empty() ? std::vector<int>{base.epochs} : epoch_counts;
  cfg.repeats = repeats;
  cfg.resample_images = resample_images;
  cfg.train_images = train_images;
  const auto cells = run_sweep(read_manifest(base.manifest_path), cfg);
  const fs::path path = resolve_out(out);
  write_sweep_csv(path, cells);
  for (const SweepCell& c : cells) {
    std::printf("window=%lld depth=%d epochs=%d params=%ld recall=%.3f+-%.3f\n",
                static_cast<long long>(c.window), c.depth, c.epochs, c.param_count,
                c.recall_mean, c.recall_std);
  }
  std::printf("sweep table -> %s\n", path.string().c_str());
  return 0;
}

int cmd_predict(const std::string& checkpoint_dir, const std::string& image_path,
                Index batch, const std::string& out) {
  const Checkpoint ck = load_checkpoint(resolve_out(checkpoint_dir));
  const ImageFile img = read_image_file(resolve_out(image_path));
  PredictResult result =
      predict_image(ck, img.data, batch, fs::path(image_path).stem().string());
  write_mask_file(resolve_out(out), result.mask);
  std::printf("predicted %lldx%lld mask in %.2fs (%lld artifact pixels) -> %s\n",
              static_cast<long long>(result.mask.grid.rows()),
              static_cast<long long>(result.mask.grid.cols()), result.seconds,
              static_cast<long long>(result.mask.grid.cast<long>().sum()),
              resolve_out(out).string().c_str());
  return 0;
}

int cmd_mask_baseline(const std::string& image_path, const std::string& geometry_path,
                      int bins, double k, const std::string& out) {
  const ImageFile img = read_image_file(resolve_out(image_path));
  const DetectorGeometry geom = read_geometry_file(resolve_out(geometry_path));
  if (geom.height != img.data.rows() || geom.width != img.data.cols()) {
    throw DataError("mask-baseline: geometry does not match image size");
  }
  const ImageD tt = two_theta_map(geom);
  const int n_bins = bins > 0 ? bins : default_threshold_bins(img.data.rows());
  MaskImage mask = threshold_mask(img.data, tt, n_bins, k);
  mask.source_id = fs::path(image_path).stem().string();
  write_mask_file(resolve_out(out), mask);
  std::printf("baseline mask: %lld pixels over %d annuli (k=%.2f) -> %s\n",
              static_cast<long long>(mask.grid.cast<long>().sum()), n_bins, k,
              resolve_out(out).string().c_str());
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& checkpoint_dir,
                 bool baseline, int bins, double k, const std::string& out_prefix) {
  const DatasetManifest manifest = read_manifest(resolve_out(manifest_path));
  Predictor predictor;
  std::string method;
  if (baseline) {
    predictor = threshold_predictor(bins, k);
    method = "threshold";
  } else {
    if (checkpoint_dir.empty()) {
      throw ConfigError("evaluate: provide --checkpoint or --baseline");
    }
    predictor = unet_predictor(load_checkpoint(resolve_out(checkpoint_dir)));
    method = "unet";
  }
  const EvalReport report = evaluate_predictor(predictor, method, manifest);
  const fs::path prefix = resolve_out(out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  write_eval_csv(fs::path(prefix.string() + ".csv"), report);
  write_eval_json(fs::path(prefix.string() + ".json"), report);
  std::printf("%s: pooled recall %.4f, pooled specificity %.6f, mean FP/image %.1f\n",
              method.c_str(), report.pooled_recall, report.pooled_specificity,
              report.mean_false_positives);
  std::printf("reports -> %s.csv / .json\n", prefix.string().c_str());
  return 0;
}

int cmd_compare(const std::string& baseline_json, const std::string& candidate_json,
                const std::string& out) {
  auto load_report = [](const fs::path& p) {
    const std::string text = slurp(p);
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("malformed report JSON: " + p.string());
    EvalReport r;
    r.method = j.value("method", "?");
    r.mean_false_positives = j.at("mean_false_positives").get<double>();
    for (const auto& e : j.at("per_image")) {
      ImageMetrics m;
      m.id = e.at("id").get<std::string>();
      m.false_positives = e.at("fp").get<std::uint64_t>();
      r.per_image.push_back(std::move(m));
    }
    return r;
  };
  const EvalReport a = load_report(resolve_out(baseline_json));
  const EvalReport b = load_report(resolve_out(candidate_json));
  const CompareResult cmp = compare_reports(a, b);
  std::printf("%s vs %s: FP reduction %.1f%% (mean FP %.1f -> %.1f)\n", b.method.c_str(),
              a.method.c_str(), cmp.fp_reduction_percent, a.mean_false_positives,
              b.mean_false_positives);
  if (!out.empty()) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& [id, delta] : cmp.per_image_fp_delta) {
      per.push_back({{"id", id}, {"fp_delta", delta}});
    }
    std::ofstream f(resolve_out(out));
    f << nlohmann::json{{"baseline", a.method},
                        {"candidate", b.method},
                        {"fp_reduction_percent", cmp.fp_reduction_percent},
                        {"per_image", per}}
             .dump(2)
      << "\n";
  }
  return 0;
}

int cmd_integrate(const std::string& image_path, const std::string& mask_path,
                  const std::string& geometry_path, int bins, double tth_lo,
                  double tth_hi, const std::string& out) {
  const ImageFile img = read_image_file(resolve_out(image_path));
  const DetectorGeometry geom = read_geometry_file(resolve_out(geometry_path));
  MaskU8 mask;
  const MaskU8* mask_ptr = nullptr;
  if (!mask_path.empty()) {
    mask = read_mask_file(resolve_out(mask_path)).grid;
    mask_ptr = &mask;
  }
  Pattern1D pattern;
  if (tth_hi > 0) {
    pattern = integrate(img.data, mask_ptr, geom, bins, tth_lo, tth_hi);
  } else {
    pattern = integrate(img.data, mask_ptr, geom, bins);
  }
  write_pattern_csv(resolve_out(out), pattern);
  std::printf("integrated %d bins over [%.4g, %.4g] deg -> %s\n", bins, pattern.tth_lo,
              pattern.tth_hi, resolve_out(out).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"U-Net artifact masking for powder XRD images"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset + manifest");
  std::string sy_arch = "battery", sy_out = "dataset";
  int sy_images = 5;
  Index sy_size = 512;
  std::uint64_t sy_seed = 0;
  synth->add_option("--archetype", sy_arch, "nickel|battery|perfect");
  synth->add_option("--images", sy_images, "number of images");
  synth->add_option("--size", sy_size, "detector side in pixels");
  synth->add_option("--seed", sy_seed, "dataset seed");
  synth->add_option("--out", sy_out, "output directory")->required();

  // shared train-style config
  TrainConfig cfg = preload_train_config(argc, argv);
  std::string config_path;

  auto* prepare = app.add_subcommand("prepare", "crop, sort and split tiles");
  std::string pr_out = "tiles";
  add_train_options(prepare, cfg, config_path);
  prepare->add_option("--out", pr_out, "tile store directory")->required();

  auto* train = app.add_subcommand("train", "train a U-Net on prepared tiles");
  std::string tr_tiles, tr_out = "run";
  add_train_options(train, cfg, config_path);
  train->add_option("--tiles", tr_tiles, "existing tile store (skips prepare)");
  train->add_option("--out", tr_out, "run output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "grid sweep over window/depth/epochs");
  std::vector<Index> sw_windows;
  std::vector<int> sw_depths, sw_epochs;
  int sw_repeats = 5, sw_train_images = 3;
  bool sw_resample = false;
  std::string sw_out = "sweep.csv";
  add_train_options(sweep, cfg, config_path);
  sweep->add_option("--windows", sw_windows, "window list")->delimiter(',');
  sweep->add_option("--depths", sw_depths, "depth list")->delimiter(',');
  sweep->add_option("--epoch-list", sw_epochs, "epoch-count list")->delimiter(',');
  sweep->add_option("--repeats", sw_repeats, "runs per cell");
  sweep->add_flag("--resample-images", sw_resample,
                  "redraw training images each repeat");
  sweep->add_option("--train-images", sw_train_images, "images fed to training");
  sweep->add_option("--out", sw_out, "CSV output path");

  auto* predict = app.add_subcommand("predict", "mask a full image with a checkpoint");
  std::string pd_ckpt, pd_image, pd_out = "predicted.mask";
  Index pd_batch = 16;
  predict->add_option("--checkpoint", pd_ckpt, "checkpoint directory")->required();
  predict->add_option("--image", pd_image, "image container file")->required();
  predict->add_option("--batch", pd_batch, "tiles per inference batch");
  predict->add_option("--out", pd_out, "mask output path");

  auto* baseline = app.add_subcommand("mask-baseline",
                                      "intensity-threshold baseline mask");
  std::string mb_image, mb_geom = "geometry.json", mb_out = "baseline.mask";
  int mb_bins = 0;
  double mb_k = 3.0;
  baseline->add_option("--image", mb_image, "image container file")->required();
  baseline->add_option("--geometry", mb_geom, "geometry JSON file");
  baseline->add_option("--bins", mb_bins, "annulus count (0 = default)");
  baseline->add_option("--k", mb_k, "esd multiplier");
  baseline->add_option("--out", mb_out, "mask output path");

  auto* evaluate = app.add_subcommand("evaluate", "score a method against truth masks");
  std::string ev_manifest, ev_ckpt, ev_out = "report";
  bool ev_baseline = false;
  int ev_bins = 0;
  double ev_k = 3.0;
  evaluate->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  evaluate->add_option("--checkpoint", ev_ckpt, "checkpoint directory");
  evaluate->add_flag("--baseline", ev_baseline, "evaluate the threshold baseline");
  evaluate->add_option("--bins", ev_bins, "baseline annulus count (0 = default)");
  evaluate->add_option("--k", ev_k, "baseline esd multiplier");
  evaluate->add_option("--out", ev_out, "report path prefix");

  auto* compare = app.add_subcommand("compare", "false-positive delta of two reports");
  std::string cp_a, cp_b, cp_out;
  compare->add_option("--baseline", cp_a, "baseline report JSON")->required();
  compare->add_option("--candidate", cp_b, "candidate report JSON")->required();
  compare->add_option("--out", cp_out, "comparison JSON output");

  auto* integrate_cmd = app.add_subcommand("integrate", "masked azimuthal integration");
  std::string in_image, in_mask, in_geom = "geometry.json", in_out = "pattern.csv";
  int in_bins = 2000;
  double in_lo = 0.0, in_hi = -1.0;
  integrate_cmd->add_option("--image", in_image, "image container file")->required();
  integrate_cmd->add_option("--mask", in_mask, "mask to exclude (optional)");
  integrate_cmd->add_option("--geometry", in_geom, "geometry JSON file");
  integrate_cmd->add_option("--bins", in_bins, "bin count");
  integrate_cmd->add_option("--tth-lo", in_lo, "range start (deg)");
  integrate_cmd->add_option("--tth-hi", in_hi, "range end (deg; <=0 = acceptance)");
  integrate_cmd->add_option("--out", in_out, "CSV output path");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(sy_arch, sy_images, sy_size, sy_seed, sy_out);
    if (prepare->parsed()) return cmd_prepare(cfg, pr_out);
    if (train->parsed()) return cmd_train(cfg, tr_tiles, tr_out);
    if (sweep->parsed()) {
      return cmd_sweep(cfg, sw_windows, sw_depths, sw_epochs, sw_repeats, sw_resample,
                       sw_train_images, sw_out);
    }
    if (predict->parsed()) return cmd_predict(pd_ckpt, pd_image, pd_batch, pd_out);
    if (baseline->parsed()) {
      return cmd_mask_baseline(mb_image, mb_geom, mb_bins, mb_k, mb_out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(ev_manifest, ev_ckpt, ev_baseline, ev_bins, ev_k, ev_out);
    }
    if (compare->parsed()) return cmd_compare(cp_a, cp_b, cp_out);
    if (integrate_cmd->parsed()) {
      return cmd_integrate(in_image, in_mask, in_geom, in_bins, in_lo, in_hi, in_out);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
