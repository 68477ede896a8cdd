#include <xrdseg/pipeline.hpp>

#include <xrdseg/nn.hpp>
#include <xrdseg/optim.hpp>
#include <xrdseg/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace xrdseg {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kEpochShuffleBase = 1000;
constexpr std::uint64_t kSweepSelectBase = 0xA0000;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Cross-experiment intensity scales vary by orders of magnitude, so tiles are
// normalized by their mean before entering the network (training and
// inference alike). The artifact rule is a local intensity ratio, which this
// preserves.
float tile_scale(const ImageF& pixels) {
  const double mean = pixels.cast<double>().mean();
  return mean > 1e-12 ? float(1.0 / mean) : 1.0f;
}

void fill_batch(const TileStore& store, const std::vector<Index>& order, Index begin,
                Index count, Tensor<float>& x, LabelMap& labels) {
  const Index side = store.tiles[order[begin]].tile.pixels.rows();
  for (Index i = 0; i < count; ++i) {
    const StoredTile& st = store.tiles[order[begin + i]];
    const float s = tile_scale(st.tile.pixels);
    for (Index r = 0; r < side; ++r) {
      for (Index c = 0; c < side; ++c) {
        x.at(i, 0, r, c) = st.tile.pixels(r, c) * s;
        labels.at(i, r, c) = st.tile.labels(r, c);
      }
    }
  }
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (!is_power_of_two(cfg.window)) {
    throw ConfigError("train config: window must be a power of two, got " +
                      std::to_string(cfg.window));
  }
  if (cfg.step < 1 || cfg.step > cfg.window) {
    throw ConfigError("train config: step must be in [1, window]");
  }
  if (cfg.batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (!(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0)) {
    throw ConfigError("train config: split_fraction must be in (0,1)");
  }
  if (cfg.lr <= 0) throw ConfigError("train config: lr must be > 0");
  UNetConfig u;
  u.depth = cfg.depth;
  u.base_channels = cfg.base_channels;
  u.growth_rate = cfg.growth_rate;
  validate_unet_config(u);
  validate_tile_size(u, cfg.window);
}

std::string train_config_to_json(const TrainConfig& c) {
  return json{{"window", c.window},
              {"step", c.step},
              {"depth", c.depth},
              {"base_channels", c.base_channels},
              {"growth_rate", c.growth_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"split_fraction", c.split_fraction},
              {"augment", c.augment},
              {"seed", c.seed},
              {"manifest", c.manifest_path}}
      .dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("malformed train config JSON");
  TrainConfig c;
  c.window = j.value("window", c.window);
  c.step = j.value("step", c.step);
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.growth_rate = j.value("growth_rate", c.growth_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.split_fraction = j.value("split_fraction", c.split_fraction);
  c.augment = j.value("augment", c.augment);
  c.seed = j.value("seed", c.seed);
  c.manifest_path = j.value("manifest", c.manifest_path);
  return c;
}

Index train_tile_count(Index total_tiles, double split_fraction) {
  return static_cast<Index>(std::llround(double(total_tiles) * split_fraction));
}

std::vector<Index> TileStore::split_indices(bool train) const {
  std::vector<Index> out;
  for (Index i = 0; i < static_cast<Index>(tiles.size()); ++i) {
    if (tiles[i].train_split == train) out.push_back(i);
  }
  return out;
}

Index TileStore::train_count() const {
  Index n = 0;
  for (const StoredTile& t : tiles) n += t.train_split ? 1 : 0;
  return n;
}

TileStore prepare_tiles(const std::vector<SourceImage>& images, const TrainConfig& cfg) {
  validate_train_config(cfg);
  TileStore store;
  store.config = cfg;
  for (const SourceImage& src : images) {
    if (src.image.rows() != src.mask.rows() || src.image.cols() != src.mask.cols()) {
      throw DataError("prepare: image/mask shape mismatch for '" + src.id + "': " +
                      std::to_string(src.image.rows()) + "x" +
                      std::to_string(src.image.cols()) + " vs " +
                      std::to_string(src.mask.rows()) + "x" +
                      std::to_string(src.mask.cols()));
    }
    const TileGrid grid =
        make_grid(src.image.rows(), src.image.cols(), cfg.window, cfg.step);
    if (cfg.augment) {
      for (Augmentation a : kAllAugmentations) {
        const ImageF img = apply_augmentation(src.image, a);
        const MaskU8 lab = apply_augmentation(src.mask, a);
        for (LabeledTile& t : crop_labeled(img, lab, grid, src.id)) {
          store.tiles.push_back({std::move(t), a, false});
        }
      }
    } else {
      for (LabeledTile& t : crop_labeled(src.image, src.mask, grid, src.id)) {
        store.tiles.push_back({std::move(t), Augmentation::Identity, false});
      }
    }
  }

  // labeled tiles first (stable for determinism), then a seeded random
  // train/reserved split over the sorted pool
  std::stable_sort(store.tiles.begin(), store.tiles.end(),
                   [](const StoredTile& a, const StoredTile& b) {
                     return a.tile.labeled_fraction > b.tile.labeled_fraction;
                   });
  const Index total = static_cast<Index>(store.tiles.size());
  const Index n_train = train_tile_count(total, cfg.split_fraction);
  std::vector<Index> order(total);
  std::iota(order.begin(), order.end(), Index(0));
  Rng rng(derive_seed(cfg.seed, kSplitStream));
  rng.shuffle(order);
  for (Index i = 0; i < n_train; ++i) store.tiles[order[i]].train_split = true;
  return store;
}

std::vector<SourceImage> load_manifest_images(const DatasetManifest& manifest) {
  std::vector<SourceImage> out;
  out.reserve(manifest.entries.size());
  for (const ManifestEntry& e : manifest.entries) {
    SourceImage src;
    src.id = e.id;
    src.image = read_image_file(manifest.root / e.image_path).data;
    MaskImage mask = read_mask_file(manifest.root / e.mask_path);
    src.mask = std::move(mask.grid);
    out.push_back(std::move(src));
  }
  return out;
}

TileStore prepare_tiles(const DatasetManifest& manifest, const TrainConfig& cfg) {
  return prepare_tiles(load_manifest_images(manifest), cfg);
}

void save_tile_store(const std::filesystem::path& dir, const TileStore& store) {
  std::filesystem::create_directories(dir);
  json entries = json::array();
  std::ofstream blob(dir / "tiles.bin", std::ios::binary);
  if (!blob) throw DataError("cannot open for writing: " + (dir / "tiles.bin").string());
  for (const StoredTile& t : store.tiles) {
    entries.push_back(json{{"source", t.tile.source_id},
                           {"origin", {t.tile.origin_row, t.tile.origin_col}},
                           {"aug", augmentation_name(t.aug)},
                           {"labeled_fraction", t.tile.labeled_fraction},
                           {"split", t.train_split ? "train" : "reserved"}});
    blob.write(reinterpret_cast<const char*>(t.tile.pixels.data()),
               std::streamsize(sizeof(float) * std::size_t(t.tile.pixels.size())));
    blob.write(reinterpret_cast<const char*>(t.tile.labels.data()),
               std::streamsize(t.tile.labels.size()));
  }
  if (!blob) throw DataError("short write: " + (dir / "tiles.bin").string());
  blob.close();
  json meta{{"format", "xrdseg-tiles-v1"},
            {"config", json::parse(train_config_to_json(store.config))},
            {"count", store.tiles.size()}};
  std::ofstream f(dir / "store.json");
  if (!f) throw DataError("cannot open for writing: " + (dir / "store.json").string());
  f << json{{"meta", meta}, {"tiles", entries}}.dump(2) << "\n";
}

TileStore load_tile_store(const std::filesystem::path& dir) {
  std::ifstream f(dir / "store.json");
  if (!f) throw DataError("cannot open for reading: " + (dir / "store.json").string());
  std::stringstream ss;
  ss << f.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw DataError("malformed store.json in " + dir.string());
  TileStore store;
  store.config = train_config_from_json(j.at("meta").at("config").dump());
  const Index side = store.config.window;

  std::ifstream blob(dir / "tiles.bin", std::ios::binary);
  if (!blob) throw DataError("cannot open for reading: " + (dir / "tiles.bin").string());
  for (const json& e : j.at("tiles")) {
    StoredTile t;
    t.tile.source_id = e.at("source").get<std::string>();
    t.tile.origin_row = e.at("origin").at(0).get<Index>();
    t.tile.origin_col = e.at("origin").at(1).get<Index>();
    t.tile.labeled_fraction = e.at("labeled_fraction").get<double>();
    t.train_split = e.at("split").get<std::string>() == "train";
    const std::string aug = e.at("aug").get<std::string>();
    t.aug = Augmentation::Identity;
    for (Augmentation a : kAllAugmentations) {
      if (aug == augmentation_name(a)) t.aug = a;
    }
    t.tile.pixels.resize(side, side);
    t.tile.labels.resize(side, side);
    blob.read(reinterpret_cast<char*>(t.tile.pixels.data()),
              std::streamsize(sizeof(float) * std::size_t(side * side)));
    blob.read(reinterpret_cast<char*>(t.tile.labels.data()),
              std::streamsize(side * side));
    if (!blob) throw DataError("truncated tiles.bin in " + dir.string());
    store.tiles.push_back(std::move(t));
  }
  return store;
}

TrainResult train_unet(const TileStore& store, const TrainConfig& cfg) {
  validate_train_config(cfg);
  const double t0 = now_seconds();

  UNetConfig ucfg;
  ucfg.depth = cfg.depth;
  ucfg.base_channels = cfg.base_channels;
  ucfg.growth_rate = cfg.growth_rate;
  ucfg.seed = derive_seed(cfg.seed, kInitStream);

  TrainResult result;
  result.model = build_unet<float>(ucfg);
  result.record.config = cfg;

  std::vector<Index> train_idx = store.split_indices(true);
  if (!store.tiles.empty()) {
    const Index side = store.tiles[0].tile.pixels.rows();
    validate_tile_size(ucfg, side);
  }

  auto params = result.model.parameters();
  auto adam = AdamState<float>::create(params, cfg.lr);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (train_idx.empty()) break;
    std::vector<Index> order = train_idx;
    Rng shuffle_rng(derive_seed(cfg.seed, kEpochShuffleBase + std::uint64_t(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    Index loss_items = 0;
    const Index side = store.tiles[order[0]].tile.pixels.rows();
    for (Index begin = 0; begin < static_cast<Index>(order.size());
         begin += cfg.batch_size) {
      const Index count =
          std::min<Index>(cfg.batch_size, static_cast<Index>(order.size()) - begin);
      Tensor<float> x = Tensor<float>::zeros({count, 1, side, side});
      LabelMap labels = LabelMap::zeros(count, side, side);
      fill_batch(store, order, begin, count, x, labels);

      Tensor<float> logits = unet_forward(result.model, x, /*train=*/true);
      Tensor<float> loss = softmax_cross_entropy(logits, labels);
      const double batch_loss = double(loss.values()[0]);
      if (!std::isfinite(batch_loss)) {
        throw NumericError(
            "training loss is not finite at epoch " + std::to_string(epoch) +
            "; the run diverged (try a lower lr or a smaller batch)");
      }
      result.model.zero_grad();
      loss.backward();
      adam_step(params, adam);
      loss_sum += batch_loss * double(count);
      loss_items += count;
    }
    result.record.epoch_loss.push_back(loss_items ? loss_sum / double(loss_items) : 0.0);
  }

  // held-back tiles scored in eval mode for the run record
  std::vector<Index> reserved = store.split_indices(false);
  if (!reserved.empty()) {
    ConfusionCounts pooled;
    const Index side = store.tiles[reserved[0]].tile.pixels.rows();
    const Index eval_batch = std::min<Index>(cfg.batch_size, 16);
    for (Index begin = 0; begin < static_cast<Index>(reserved.size());
         begin += eval_batch) {
      const Index count =
          std::min<Index>(eval_batch, static_cast<Index>(reserved.size()) - begin);
      Tensor<float> x = Tensor<float>::zeros({count, 1, side, side});
      LabelMap labels = LabelMap::zeros(count, side, side);
      fill_batch(store, reserved, begin, count, x, labels);
      Tensor<float> logits = unet_forward(result.model, x, /*train=*/false);
      LabelMap pred = argmax_classes(logits);
      for (Index i = 0; i < count; ++i) {
        for (Index r = 0; r < side; ++r) {
          for (Index c = 0; c < side; ++c) {
            const bool p = pred(i, r, c) != 0;
            const bool t = labels(i, r, c) != 0;
            if (p && t) ++pooled.tp;
            else if (p && !t) ++pooled.fp;
            else if (!p && t) ++pooled.fn;
            else ++pooled.tn;
          }
        }
      }
    }
    result.record.reserved_metrics["recall"] = recall(pooled);
    result.record.reserved_metrics["specificity"] = specificity(pooled);
    result.record.reserved_metrics["false_positives"] = double(pooled.fp);
  }

  result.record.train_seconds = now_seconds() - t0;
  return result;
}

void write_run_record(const std::filesystem::path& path, const RunRecord& record) {
  json j{{"config", json::parse(train_config_to_json(record.config))},
         {"epoch_loss", record.epoch_loss},
         {"reserved_metrics", record.reserved_metrics},
         {"train_seconds", record.train_seconds},
         {"checkpoint", record.checkpoint_path}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

PredictResult predict_image(UNetModel<float>& model, const ImageF& image, Index window,
                            Index step, Index batch_size, const std::string& source_id) {
  const double t0 = now_seconds();
  validate_tile_size(model.config, window);
  if (batch_size < 1) throw ConfigError("predict: batch_size must be >= 1");

  // zero-pad images smaller than one window and crop the mask back
  const Index ph = std::max(image.rows(), window);
  const Index pw = std::max(image.cols(), window);
  const bool padded = ph != image.rows() || pw != image.cols();
  ImageF padded_image;
  const ImageF* work = &image;
  if (padded) {
    padded_image = ImageF::Zero(ph, pw);
    padded_image.block(0, 0, image.rows(), image.cols()) = image;
    work = &padded_image;
  }

  const TileGrid grid = make_grid(ph, pw, window, step);
  const std::vector<ImageF> tiles = crop_tiles(*work, grid);
  std::vector<MaskU8> tile_masks(tiles.size());

  for (std::size_t begin = 0; begin < tiles.size(); begin += std::size_t(batch_size)) {
    const Index count =
        std::min<Index>(batch_size, Index(tiles.size() - begin));
    Tensor<float> x = Tensor<float>::zeros({count, 1, window, window});
    for (Index i = 0; i < count; ++i) {
      const ImageF& t = tiles[begin + std::size_t(i)];
      const float s = tile_scale(t);
      for (Index r = 0; r < window; ++r) {
        for (Index c = 0; c < window; ++c) x.at(i, 0, r, c) = t(r, c) * s;
      }
    }
    Tensor<float> logits = unet_forward(model, x, /*train=*/false);
    LabelMap pred = argmax_classes(logits);
    for (Index i = 0; i < count; ++i) {
      MaskU8 m(window, window);
      for (Index r = 0; r < window; ++r) {
        for (Index c = 0; c < window; ++c) m(r, c) = pred(i, r, c);
      }
      tile_masks[begin + std::size_t(i)] = std::move(m);
    }
  }

  MaskU8 full = stitch_tiles(tile_masks, grid);
  PredictResult out;
  out.mask.grid = padded ? MaskU8(full.block(0, 0, image.rows(), image.cols())) : full;
  out.mask.provenance = MaskProvenance::UNet;
  out.mask.source_id = source_id;
  out.seconds = now_seconds() - t0;
  return out;
}

PredictResult predict_image(const Checkpoint& checkpoint, const ImageF& image,
                            Index batch_size, const std::string& source_id) {
  if (checkpoint.meta.window < 1 || checkpoint.meta.step < 1) {
    throw ConfigError("checkpoint carries no usable window/step (window=" +
                      std::to_string(checkpoint.meta.window) + ", step=" +
                      std::to_string(checkpoint.meta.step) + ")");
  }
  UNetModel<float>& model = const_cast<Checkpoint&>(checkpoint).model;
  return predict_image(model, image, checkpoint.meta.window, checkpoint.meta.step,
                       batch_size, source_id);
}

EvalReport evaluate_predictor(const Predictor& predict, const std::string& method,
                              const DatasetManifest& manifest) {
  EvalReport report;
  report.method = method;
  double recall_sum = 0, spec_sum = 0, fp_sum = 0;
  for (const ManifestEntry& e : manifest.entries) {
    const ImageF image = read_image_file(manifest.root / e.image_path).data;
    const MaskImage truth = read_mask_file(manifest.root / e.mask_path);
    const double t0 = now_seconds();
    const MaskU8 predicted = predict(e, image);
    ImageMetrics m;
    m.seconds = now_seconds() - t0;
    m.id = e.id;
    m.counts = confusion(predicted, truth.grid);
    m.recall = recall(m.counts);
    m.specificity = specificity(m.counts);
    m.false_positives = m.counts.fp;
    report.pooled.tp += m.counts.tp;
    report.pooled.fp += m.counts.fp;
    report.pooled.tn += m.counts.tn;
    report.pooled.fn += m.counts.fn;
    recall_sum += m.recall;
    spec_sum += m.specificity;
    fp_sum += double(m.false_positives);
    report.per_image.push_back(std::move(m));
  }
  const double n = double(report.per_image.size());
  report.pooled_recall = recall(report.pooled);
  report.pooled_specificity = specificity(report.pooled);
  report.mean_recall = n ? recall_sum / n : 0.0;
  report.mean_specificity = n ? spec_sum / n : 0.0;
  report.mean_false_positives = n ? fp_sum / n : 0.0;
  return report;
}

Predictor unet_predictor(const Checkpoint& checkpoint) {
  auto shared = std::make_shared<Checkpoint>(checkpoint);
  return [shared](const ManifestEntry& e, const ImageF& image) {
    return predict_image(*shared, image, 16, e.id).mask.grid;
  };
}

Predictor threshold_predictor(int n_bins, double esd_multiplier) {
  return [n_bins, esd_multiplier](const ManifestEntry& e, const ImageF& image) {
    const ImageD tt = two_theta_map(e.geometry);
    const int bins = n_bins > 0 ? n_bins : default_threshold_bins(image.rows());
    return threshold_mask(image, tt, bins, esd_multiplier).grid;
  };
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << "id,tp,fp,tn,fn,recall,specificity,seconds\n";
  char buf[64];
  for (const ImageMetrics& m : report.per_image) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", m.recall, m.specificity);
    f << m.id << "," << m.counts.tp << "," << m.counts.fp << "," << m.counts.tn << ","
      << m.counts.fn << "," << buf << "," << m.seconds << "\n";
  }
}

void write_eval_json(const std::filesystem::path& path, const EvalReport& report) {
  json per = json::array();
  for (const ImageMetrics& m : report.per_image) {
    per.push_back(json{{"id", m.id},
                       {"tp", m.counts.tp},
                       {"fp", m.counts.fp},
                       {"tn", m.counts.tn},
                       {"fn", m.counts.fn},
                       {"recall", m.recall},
                       {"specificity", m.specificity},
                       {"seconds", m.seconds}});
  }
  json j{{"method", report.method},
         {"per_image", per},
         {"pooled",
          json{{"tp", report.pooled.tp},
               {"fp", report.pooled.fp},
               {"tn", report.pooled.tn},
               {"fn", report.pooled.fn},
               {"recall", report.pooled_recall},
               {"specificity", report.pooled_specificity}}},
         {"mean_recall", report.mean_recall},
         {"mean_specificity", report.mean_specificity},
         {"mean_false_positives", report.mean_false_positives}};
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

CompareResult compare_reports(const EvalReport& baseline, const EvalReport& candidate) {
  CompareResult out;
  const double base_fp = baseline.mean_false_positives;
  const double cand_fp = candidate.mean_false_positives;
  out.fp_reduction_percent =
      (base_fp == cand_fp) ? 0.0 : 100.0 * (base_fp - cand_fp) / std::max(base_fp, 1e-12);
  for (const ImageMetrics& b : baseline.per_image) {
    for (const ImageMetrics& c : candidate.per_image) {
      if (b.id == c.id) {
        out.per_image_fp_delta.emplace_back(
            b.id, double(c.false_positives) - double(b.false_positives));
      }
    }
  }
  return out;
}

std::vector<SweepCell> run_sweep(const DatasetManifest& manifest, const SweepConfig& cfg) {
  if (cfg.repeats < 1) throw ConfigError("sweep: repeats must be >= 1");
  if (cfg.train_images < 1 ||
      cfg.train_images >= static_cast<int>(manifest.entries.size())) {
    throw ConfigError("sweep: train_images must leave at least one held-out image");
  }
  const std::vector<SourceImage> all_images = load_manifest_images(manifest);

  std::vector<SweepCell> cells;
  std::uint64_t cell_index = 0;
  for (Index window : cfg.windows) {
    for (int depth : cfg.depths) {
      for (int epochs : cfg.epoch_counts) {
        SweepCell cell;
        cell.window = window;
        cell.depth = depth;
        cell.epochs = epochs;
        cell.repeats = cfg.repeats;
        {
          UNetConfig u;
          u.depth = depth;
          u.base_channels = cfg.base.base_channels;
          u.growth_rate = cfg.base.growth_rate;
          auto probe = build_unet<float>(u);
          cell.param_count = count_parameters(probe);
        }

        std::vector<double> recalls, specs, fps;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
          TrainConfig run = cfg.base;
          run.window = window;
          run.step = std::max<Index>(1, window / 2);
          run.depth = depth;
          run.epochs = epochs;
          run.seed = derive_seed(cfg.base.seed, kSweepSelectBase + cell_index * 1009 +
                                                    std::uint64_t(rep));

          // image selection: fixed per cell, or redrawn per repeat
          std::vector<Index> img_order(all_images.size());
          std::iota(img_order.begin(), img_order.end(), Index(0));
          const std::uint64_t select_seed =
              cfg.resample_images
                  ? derive_seed(cfg.base.seed, 0xB0000 + cell_index * 131 +
                                                   std::uint64_t(rep))
                  : derive_seed(cfg.base.seed, 0xB0000 + cell_index * 131);
          Rng sel(select_seed);
          sel.shuffle(img_order);

          std::vector<SourceImage> train_images;
          DatasetManifest held_out;
          held_out.root = manifest.root;
          for (std::size_t i = 0; i < img_order.size(); ++i) {
            if (i < std::size_t(cfg.train_images)) {
              train_images.push_back(all_images[img_order[i]]);
            } else {
              held_out.entries.push_back(manifest.entries[img_order[i]]);
            }
          }

          TileStore store = prepare_tiles(train_images, run);
          TrainResult trained = train_unet(store, run);
          Checkpoint ck;
          ck.model = std::move(trained.model);
          ck.meta.unet = ck.model.config;
          ck.meta.window = run.window;
          ck.meta.step = run.step;
          EvalReport report =
              evaluate_predictor(unet_predictor(ck), "unet", held_out);
          recalls.push_back(report.pooled_recall);
          specs.push_back(report.pooled_specificity);
          fps.push_back(report.mean_false_positives);
        }

        auto mean_std = [](const std::vector<double>& v) {
          const double mean =
              std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
          double var = 0;
          for (double x : v) var += (x - mean) * (x - mean);
          const double std_dev =
              v.size() > 1 ? std::sqrt(var / double(v.size() - 1)) : 0.0;
          return std::pair<double, double>(mean, std_dev);
        };
        std::tie(cell.recall_mean, cell.recall_std) = mean_std(recalls);
        std::tie(cell.specificity_mean, cell.specificity_std) = mean_std(specs);
        cell.fp_mean = std::accumulate(fps.begin(), fps.end(), 0.0) / double(fps.size());
        cells.push_back(cell);
        ++cell_index;
      }
    }
  }
  return cells;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepCell>& cells) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  f << "window,depth,epochs,param_count,repeats,recall_mean,recall_std,"
       "specificity_mean,specificity_std,fp_mean\n";
  for (const SweepCell& c : cells) {
    f << c.window << "," << c.depth << "," << c.epochs << "," << c.param_count << ","
      << c.repeats << "," << c.recall_mean << "," << c.recall_std << ","
      << c.specificity_mean << "," << c.specificity_std << "," << c.fp_mean << "\n";
  }
}

}  // namespace xrdseg
