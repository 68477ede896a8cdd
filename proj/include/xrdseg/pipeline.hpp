#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/io.hpp>
#include <xrdseg/masking.hpp>
#include <xrdseg/tiling.hpp>
#include <xrdseg/unet.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace xrdseg {

struct TrainConfig {
  Index window = 128;
  Index step = 64;
  int depth = 4;
  int base_channels = 8;
  double growth_rate = 2.0;
  int epochs = 100;
  Index batch_size = 50;
  double lr = 1e-2;
  double split_fraction = 0.8;
  bool augment = false;  // 6-variant rotation/flip expansion before cropping
  std::uint64_t seed = 0;
  std::string manifest_path;
};

void validate_train_config(const TrainConfig& cfg);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// Number of tiles selected into the train+validation split.
Index train_tile_count(Index total_tiles, double split_fraction);

// ---- tile store -------------------------------------------------------------

struct StoredTile {
  LabeledTile tile;
  Augmentation aug = Augmentation::Identity;
  bool train_split = false;
};

// Tiles sorted descending by labeled fraction (stable), with a seeded random
// train/reserved split over the sorted pool.
struct TileStore {
  TrainConfig config;
  std::vector<StoredTile> tiles;

  std::vector<Index> split_indices(bool train) const;
  Index train_count() const;
};

struct SourceImage {
  std::string id;
  ImageF image;
  MaskU8 mask;
};

TileStore prepare_tiles(const std::vector<SourceImage>& images, const TrainConfig& cfg);
TileStore prepare_tiles(const DatasetManifest& manifest, const TrainConfig& cfg);

// Byte-deterministic persistence (store.json + tiles.bin).
void save_tile_store(const std::filesystem::path& dir, const TileStore& store);
TileStore load_tile_store(const std::filesystem::path& dir);

std::vector<SourceImage> load_manifest_images(const DatasetManifest& manifest);

// ---- training ---------------------------------------------------------------

struct RunRecord {
  TrainConfig config;
  std::vector<double> epoch_loss;
  std::map<std::string, double> reserved_metrics;
  double train_seconds = 0.0;
  std::string checkpoint_path;
};

struct TrainResult {
  UNetModel<float> model;
  RunRecord record;
};

// Full training loop: per-epoch seeded shuffle, cross-entropy loss, ADAM
// updates. Deterministic given (config, store); a non-finite loss aborts
// with a diagnostic.
TrainResult train_unet(const TileStore& store, const TrainConfig& cfg);

void write_run_record(const std::filesystem::path& path, const RunRecord& record);

// ---- inference --------------------------------------------------------------

struct PredictResult {
  MaskImage mask;
  double seconds = 0.0;
};

// Crop -> batched eval-mode forward -> per-tile argmax -> overlap-ignoring
// stitch. Images smaller than the window are zero-padded through the network
// and cropped back.
PredictResult predict_image(UNetModel<float>& model, const ImageF& image,
                            Index window, Index step, Index batch_size = 16,
                            const std::string& source_id = "");

PredictResult predict_image(const Checkpoint& checkpoint, const ImageF& image,
                            Index batch_size = 16, const std::string& source_id = "");

// ---- evaluation -------------------------------------------------------------

struct ImageMetrics {
  std::string id;
  ConfusionCounts counts;
  double recall = 0.0;
  double specificity = 0.0;
  std::uint64_t false_positives = 0;
  double seconds = 0.0;
};

struct EvalReport {
  std::string method;
  std::vector<ImageMetrics> per_image;
  ConfusionCounts pooled;
  double pooled_recall = 0.0;
  double pooled_specificity = 0.0;
  double mean_recall = 0.0;
  double mean_specificity = 0.0;
  double mean_false_positives = 0.0;
};

using Predictor = std::function<MaskU8(const ManifestEntry&, const ImageF&)>;

EvalReport evaluate_predictor(const Predictor& predict, const std::string& method,
                              const DatasetManifest& manifest);

Predictor unet_predictor(const Checkpoint& checkpoint);
Predictor threshold_predictor(int n_bins, double esd_multiplier);

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);
void write_eval_json(const std::filesystem::path& path, const EvalReport& report);

struct CompareResult {
  // positive when `candidate` produces fewer false positives than `baseline`
  double fp_reduction_percent = 0.0;
  std::vector<std::pair<std::string, double>> per_image_fp_delta;
};

CompareResult compare_reports(const EvalReport& baseline, const EvalReport& candidate);

// ---- sweeps -----------------------------------------------------------------

struct SweepConfig {
  TrainConfig base;
  std::vector<Index> windows;
  std::vector<int> depths;
  std::vector<int> epoch_counts;
  int repeats = 5;
  // When true, each repeat redraws which images feed the tile extraction;
  // otherwise only the tile split and init vary between repeats.
  bool resample_images = false;
  int train_images = 3;
};

struct SweepCell {
  Index window = 0;
  int depth = 0;
  int epochs = 0;
  long param_count = 0;
  int repeats = 0;
  double recall_mean = 0.0, recall_std = 0.0;
  double specificity_mean = 0.0, specificity_std = 0.0;
  double fp_mean = 0.0;
};

std::vector<SweepCell> run_sweep(const DatasetManifest& manifest, const SweepConfig& cfg);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepCell>& cells);

}  // namespace xrdseg
