#include <xrdseg/io.hpp>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; byte swapping is not implemented");

namespace xrdseg {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw DataError("cannot open for reading: " + path.string());
  return f;
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw DataError("malformed JSON in " + what);
  return j;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json geometry_to_json(const DetectorGeometry& g) {
  return json{{"height", g.height},
              {"width", g.width},
              {"center_row", g.center_row},
              {"center_col", g.center_col},
              {"pixel_pitch_mm", g.pixel_pitch_mm},
              {"distance_mm", g.distance_mm},
              {"wavelength_angstrom", g.wavelength_angstrom}};
}

DetectorGeometry geometry_from_json(const json& j) {
  DetectorGeometry g;
  g.height = j.at("height").get<Index>();
  g.width = j.at("width").get<Index>();
  g.center_row = j.at("center_row").get<double>();
  g.center_col = j.at("center_col").get<double>();
  g.pixel_pitch_mm = j.at("pixel_pitch_mm").get<double>();
  g.distance_mm = j.at("distance_mm").get<double>();
  g.wavelength_angstrom = j.at("wavelength_angstrom").get<double>();
  return g;
}

}  // namespace

// ---- image container ------------------------------------------------------

void write_image_file(const std::filesystem::path& path, const ImageF& image,
                      const std::string& semantic) {
  json header{{"dtype", "f32le"},
              {"endianness", "little"},
              {"semantic", semantic},
              {"shape", {image.rows(), image.cols()}}};
  auto f = open_out(path, true);
  const std::string h = header.dump();
  f.write(h.data(), std::streamsize(h.size()));
  f.put('\n');
  f.write(reinterpret_cast<const char*>(image.data()),
          std::streamsize(sizeof(float) * std::size_t(image.size())));
  if (!f) throw DataError("short write: " + path.string());
}

ImageFile read_image_file(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  std::string line;
  if (!std::getline(f, line)) throw DataError("missing header: " + path.string());
  json header = parse_json(line, path.string());
  if (header.value("dtype", "") != "f32le") {
    throw DataError("unsupported dtype in " + path.string());
  }
  const auto shape = header.at("shape");
  const Index rows = shape.at(0).get<Index>();
  const Index cols = shape.at(1).get<Index>();
  if (rows < 1 || cols < 1) throw DataError("bad shape in " + path.string());
  ImageFile out;
  out.semantic = header.value("semantic", "image");
  out.data.resize(rows, cols);
  f.read(reinterpret_cast<char*>(out.data.data()),
         std::streamsize(sizeof(float) * std::size_t(rows * cols)));
  if (f.gcount() != std::streamsize(sizeof(float) * std::size_t(rows * cols))) {
    throw DataError("truncated blob: " + path.string());
  }
  return out;
}

// ---- masks ----------------------------------------------------------------

void write_mask_file(const std::filesystem::path& path, const MaskImage& mask) {
  {
    auto f = open_out(path, true);
    f.write(reinterpret_cast<const char*>(mask.grid.data()),
            std::streamsize(mask.grid.size()));
    if (!f) throw DataError("short write: " + path.string());
  }
  json sidecar{{"shape", {mask.grid.rows(), mask.grid.cols()}},
               {"provenance", provenance_name(mask.provenance)},
               {"source", mask.source_id}};
  auto f = open_out(path.string() + ".json", false);
  f << sidecar.dump(2) << "\n";
}

MaskImage read_mask_file(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw DataError("missing mask sidecar: " + path.string() + ".json");
  std::stringstream ss;
  ss << side.rdbuf();
  json j = parse_json(ss.str(), path.string() + ".json");
  const Index rows = j.at("shape").at(0).get<Index>();
  const Index cols = j.at("shape").at(1).get<Index>();
  MaskImage out;
  out.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  out.source_id = j.value("source", "");
  out.grid.resize(rows, cols);
  auto f = open_in(path, true);
  f.read(reinterpret_cast<char*>(out.grid.data()), std::streamsize(rows * cols));
  if (f.gcount() != std::streamsize(rows * cols)) {
    throw DataError("truncated mask blob: " + path.string());
  }
  return out;
}

// ---- 1-D patterns ---------------------------------------------------------

void write_pattern_csv(const std::filesystem::path& path, const Pattern1D& p) {
  auto f = open_out(path, false);
  f << "# tth_lo=" << format_double(p.tth_lo) << "\n";
  f << "# tth_hi=" << format_double(p.tth_hi) << "\n";
  f << "# geometry=" << p.geometry_fingerprint << "\n";
  f << "two_theta_deg,intensity,count\n";
  for (std::size_t b = 0; b < p.size(); ++b) {
    f << format_double(p.bin_centers[b]) << ",";
    if (!p.empty_bin(b)) f << format_double(p.intensity[b]);
    f << "," << p.counts[b] << "\n";
  }
  if (!f) throw DataError("short write: " + path.string());
}

Pattern1D read_pattern_csv(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  Pattern1D p;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string val = line.substr(eq + 1);
      if (key == "tth_lo") p.tth_lo = std::strtod(val.c_str(), nullptr);
      else if (key == "tth_hi") p.tth_hi = std::strtod(val.c_str(), nullptr);
      else if (key == "geometry") p.geometry_fingerprint = val;
      continue;
    }
    if (!header_seen) {
      if (line != "two_theta_deg,intensity,count") {
        throw DataError("unexpected CSV header in " + path.string() + ": " + line);
      }
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw DataError("malformed CSV row in " + path.string() + ": " + line);
    }
    p.bin_centers.push_back(std::strtod(line.substr(0, c1).c_str(), nullptr));
    const std::string ival = line.substr(c1 + 1, c2 - c1 - 1);
    p.intensity.push_back(ival.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : std::strtod(ival.c_str(), nullptr));
    p.counts.push_back(std::strtoll(line.substr(c2 + 1).c_str(), nullptr, 10));
  }
  if (!header_seen) throw DataError("no CSV header in " + path.string());
  return p;
}

// ---- dataset manifests ----------------------------------------------------

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  json images = json::array();
  for (const ManifestEntry& e : manifest.entries) {
    images.push_back(json{{"id", e.id},
                          {"image", e.image_path},
                          {"mask", e.mask_path},
                          {"archetype", e.archetype},
                          {"geometry", geometry_to_json(e.geometry)}});
  }
  auto f = open_out(path, false);
  f << json{{"images", images}}.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  std::stringstream ss;
  ss << f.rdbuf();
  json j = parse_json(ss.str(), path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  for (const json& e : j.at("images")) {
    ManifestEntry entry;
    entry.id = e.at("id").get<std::string>();
    entry.image_path = e.at("image").get<std::string>();
    entry.mask_path = e.at("mask").get<std::string>();
    entry.archetype = e.value("archetype", "");
    entry.geometry = geometry_from_json(e.at("geometry"));
    m.entries.push_back(std::move(entry));
  }
  if (m.entries.empty()) throw DataError("manifest lists no images: " + path.string());
  return m;
}

// ---- checkpoints ----------------------------------------------------------

namespace {

json unet_config_to_json(const UNetConfig& c) {
  return json{{"depth", c.depth},
              {"base_channels", c.base_channels},
              {"growth_rate", c.growth_rate},
              {"in_channels", c.in_channels},
              {"out_classes", c.out_classes},
              {"seed", c.seed}};
}

UNetConfig unet_config_from_json(const json& j) {
  UNetConfig c;
  c.depth = j.at("depth").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.growth_rate = j.at("growth_rate").get<double>();
  c.in_channels = j.at("in_channels").get<int>();
  c.out_classes = j.at("out_classes").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, UNetModel<float>& model,
                     const CheckpointMeta& meta) {
  std::filesystem::create_directories(dir);
  json tensors = json::array();
  std::ofstream blob(dir / "weights.bin", std::ios::binary);
  if (!blob) throw DataError("cannot open for writing: " + (dir / "weights.bin").string());

  model.visit_parameters([&](const std::string& name, Tensor<float>& t) {
    const Shape4 s = t.shape();
    tensors.push_back(json{{"name", name},
                           {"kind", "param"},
                           {"shape", {s.n, s.c, s.h, s.w}}});
    blob.write(reinterpret_cast<const char*>(t.values().data()),
               std::streamsize(sizeof(float) * std::size_t(t.numel())));
  });
  model.visit_buffers([&](const std::string& name, Eigen::ArrayXf& b) {
    tensors.push_back(json{{"name", name}, {"kind", "running"}, {"shape", {b.size()}}});
    blob.write(reinterpret_cast<const char*>(b.data()),
               std::streamsize(sizeof(float) * std::size_t(b.size())));
  });
  if (!blob) throw DataError("short write: " + (dir / "weights.bin").string());
  blob.close();

  json manifest{{"format", "xrdseg-checkpoint-v1"},
                {"dtype", "f32le"},
                {"config", unet_config_to_json(meta.unet)},
                {"window", meta.window},
                {"step", meta.step},
                {"augment", meta.augment},
                {"epoch", meta.epoch},
                {"seed", meta.seed},
                {"init_scheme", "kaiming_uniform_fanin"},
                {"metrics", meta.metrics},
                {"tensors", tensors}};
  auto f = open_out(dir / "manifest.json", false);
  f << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  auto f = open_in(dir / "manifest.json", false);
  std::stringstream ss;
  ss << f.rdbuf();
  json manifest = parse_json(ss.str(), (dir / "manifest.json").string());
  if (manifest.value("format", "") != "xrdseg-checkpoint-v1") {
    throw DataError("unrecognized checkpoint format in " + dir.string());
  }

  Checkpoint out;
  out.meta.unet = unet_config_from_json(manifest.at("config"));
  out.meta.window = manifest.value("window", Index(0));
  out.meta.step = manifest.value("step", Index(0));
  out.meta.augment = manifest.value("augment", false);
  out.meta.epoch = manifest.value("epoch", 0L);
  out.meta.seed = manifest.value("seed", std::uint64_t(0));
  if (manifest.contains("metrics")) {
    for (auto it = manifest["metrics"].begin(); it != manifest["metrics"].end(); ++it) {
      out.meta.metrics[it.key()] = it.value().get<double>();
    }
  }
  out.model = build_unet<float>(out.meta.unet);

  auto blob = open_in(dir / "weights.bin", true);
  auto read_floats = [&](float* dst, Index n, const std::string& name) {
    blob.read(reinterpret_cast<char*>(dst), std::streamsize(sizeof(float) * std::size_t(n)));
    if (blob.gcount() != std::streamsize(sizeof(float) * std::size_t(n))) {
      throw DataError("truncated weights.bin at tensor " + name);
    }
  };

  std::size_t idx = 0;
  const json& tensors = manifest.at("tensors");
  auto next_entry = [&](const std::string& name, const char* kind, Index numel) {
    if (idx >= tensors.size()) throw DataError("weights manifest too short at " + name);
    const json& e = tensors[idx++];
    if (e.at("name").get<std::string>() != name || e.at("kind").get<std::string>() != kind) {
      throw DataError("checkpoint tensor order mismatch at " + name);
    }
    Index n = 1;
    for (const json& d : e.at("shape")) n *= d.get<Index>();
    if (n != numel) throw DataError("checkpoint tensor shape mismatch at " + name);
  };

  out.model.visit_parameters([&](const std::string& name, Tensor<float>& t) {
    next_entry(name, "param", t.numel());
    read_floats(t.mutable_values().data(), t.numel(), name);
  });
  out.model.visit_buffers([&](const std::string& name, Eigen::ArrayXf& b) {
    next_entry(name, "running", b.size());
    read_floats(b.data(), b.size(), name);
  });
  return out;
}

// ---- scene specs ----------------------------------------------------------

std::string scene_spec_to_json(const SceneSpec& spec) {
  json rings = json::array();
  for (const RingSpec& r : spec.rings) {
    rings.push_back(json{{"two_theta_deg", r.two_theta_deg},
                         {"amplitude", r.amplitude},
                         {"radial_sigma_px", r.radial_sigma_px},
                         {"po_strength", r.po_strength},
                         {"po_phase_rad", r.po_phase_rad}});
  }
  json spots = json::array();
  for (const SpotSpec& s : spec.spots) {
    spots.push_back(json{{"ring_index", s.ring_index},
                         {"azimuth_rad", s.azimuth_rad},
                         {"amplitude", s.amplitude},
                         {"sigma_px", s.sigma_px}});
  }
  json arcs = json::array();
  for (const TextureArc& t : spec.texture) {
    arcs.push_back(json{{"ring_index", t.ring_index},
                        {"phi_start_rad", t.phi_start_rad},
                        {"phi_end_rad", t.phi_end_rad},
                        {"amplitude", t.amplitude}});
  }
  const char* noise = spec.noise.kind == NoiseSpec::Kind::None ? "none"
                      : spec.noise.kind == NoiseSpec::Kind::Poisson ? "poisson"
                                                                    : "gaussian";
  return json{{"geometry", geometry_to_json(spec.geometry)},
              {"rings", rings},
              {"spots", spots},
              {"texture", arcs},
              {"background", spec.background},
              {"noise", json{{"kind", noise}, {"param", spec.noise.param}}},
              {"mask_threshold", spec.mask_threshold},
              {"seed", spec.seed}}
      .dump(2);
}

void write_geometry_file(const std::filesystem::path& path, const DetectorGeometry& geom) {
  auto f = open_out(path, false);
  f << geometry_to_json(geom).dump(2) << "\n";
}

DetectorGeometry read_geometry_file(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  std::stringstream ss;
  ss << f.rdbuf();
  return geometry_from_json(parse_json(ss.str(), path.string()));
}

SceneSpec scene_spec_from_json(const std::string& text) {
  json j = parse_json(text, "scene spec");
  SceneSpec spec;
  spec.geometry = geometry_from_json(j.at("geometry"));
  for (const json& r : j.at("rings")) {
    RingSpec ring;
    ring.two_theta_deg = r.at("two_theta_deg").get<double>();
    ring.amplitude = r.at("amplitude").get<double>();
    ring.radial_sigma_px = r.at("radial_sigma_px").get<double>();
    ring.po_strength = r.value("po_strength", 0.0);
    ring.po_phase_rad = r.value("po_phase_rad", 0.0);
    spec.rings.push_back(ring);
  }
  for (const json& s : j.value("spots", json::array())) {
    SpotSpec spot;
    spot.ring_index = s.at("ring_index").get<int>();
    spot.azimuth_rad = s.at("azimuth_rad").get<double>();
    spot.amplitude = s.at("amplitude").get<double>();
    spot.sigma_px = s.at("sigma_px").get<double>();
    spec.spots.push_back(spot);
  }
  for (const json& t : j.value("texture", json::array())) {
    TextureArc arc;
    arc.ring_index = t.at("ring_index").get<int>();
    arc.phi_start_rad = t.at("phi_start_rad").get<double>();
    arc.phi_end_rad = t.at("phi_end_rad").get<double>();
    arc.amplitude = t.at("amplitude").get<double>();
    spec.texture.push_back(arc);
  }
  spec.background = j.value("background", 0.0);
  if (j.contains("noise")) {
    const std::string kind = j["noise"].value("kind", "none");
    if (kind == "none") spec.noise.kind = NoiseSpec::Kind::None;
    else if (kind == "poisson") spec.noise.kind = NoiseSpec::Kind::Poisson;
    else if (kind == "gaussian") spec.noise.kind = NoiseSpec::Kind::Gaussian;
    else throw DataError("unknown noise kind '" + kind + "'");
    spec.noise.param = j["noise"].value("param", 1.0);
  }
  spec.mask_threshold = j.value("mask_threshold", 0.5);
  spec.seed = j.value("seed", std::uint64_t(0));
  return spec;
}

}  // namespace xrdseg
