#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/geometry.hpp>
#include <xrdseg/integrate.hpp>
#include <xrdseg/masking.hpp>
#include <xrdseg/synth.hpp>
#include <xrdseg/unet.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace xrdseg {

// ---- image container ------------------------------------------------------
// Single file: one-line JSON header {"dtype":"f32le","semantic":...,
// "shape":[H,W]} followed by '\n' and the raw little-endian float32 blob in
// row-major order.

void write_image_file(const std::filesystem::path& path, const ImageF& image,
                      const std::string& semantic);

struct ImageFile {
  ImageF data;
  std::string semantic;
};

ImageFile read_image_file(const std::filesystem::path& path);

// ---- masks ----------------------------------------------------------------
// Raw uint8 (0/1) blob plus a JSON sidecar at <path>.json carrying
// {shape, provenance, source}.

void write_mask_file(const std::filesystem::path& path, const MaskImage& mask);
MaskImage read_mask_file(const std::filesystem::path& path);

// ---- 1-D patterns ---------------------------------------------------------
// CSV with a `two_theta_deg,intensity,count` header; empty bins emit an empty
// intensity field. Values are printed with round-trip precision so that
// read_pattern_csv(write_pattern_csv(p)) == p bit for bit. Binning metadata
// rides in leading '#' comment lines.

void write_pattern_csv(const std::filesystem::path& path, const Pattern1D& pattern);
Pattern1D read_pattern_csv(const std::filesystem::path& path);

// ---- dataset manifests ----------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
  std::string archetype;
  DetectorGeometry geometry;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  // Paths resolved against the manifest location.
  std::filesystem::path root;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

// ---- checkpoints ----------------------------------------------------------
// Directory of manifest.json + weights.bin. The manifest lists every tensor
// (parameters and running statistics) with name, kind and shape; weights.bin
// is their little-endian float32 blobs concatenated in manifest order.

struct CheckpointMeta {
  UNetConfig unet;
  Index window = 0;
  Index step = 0;
  long epoch = 0;
  std::uint64_t seed = 0;
  bool augment = false;
  std::map<std::string, double> metrics;
};

void save_checkpoint(const std::filesystem::path& dir, UNetModel<float>& model,
                     const CheckpointMeta& meta);

struct Checkpoint {
  UNetModel<float> model;
  CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

// ---- scene specs ----------------------------------------------------------

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

// ---- geometry files --------------------------------------------------------

void write_geometry_file(const std::filesystem::path& path, const DetectorGeometry& geom);
DetectorGeometry read_geometry_file(const std::filesystem::path& path);

}  // namespace xrdseg
