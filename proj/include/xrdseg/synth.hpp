#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/geometry.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace xrdseg {

// One Debye-Scherrer ring: Gaussian radial profile around its 2-theta locus,
// optionally modulated in azimuth by a center-symmetric preferred-orientation
// factor 1 + po_strength * cos^2(phi - po_phase).
struct RingSpec {
  double two_theta_deg = 10.0;
  double amplitude = 100.0;
  double radial_sigma_px = 2.0;
  double po_strength = 0.0;
  double po_phase_rad = 0.0;
};

// Localized single-crystal reflection: an isotropic 2-D Gaussian centered on
// the locus of its parent ring.
struct SpotSpec {
  int ring_index = 0;
  double azimuth_rad = 0.0;
  double amplitude = 1000.0;
  double sigma_px = 3.0;
};

// Texture: an azimuthally bounded brightening of one ring.
struct TextureArc {
  int ring_index = 0;
  double phi_start_rad = 0.0;
  double phi_end_rad = 0.5;
  double amplitude = 50.0;
};

struct NoiseSpec {
  enum class Kind { None, Poisson, Gaussian };
  Kind kind = Kind::None;
  // Poisson: counts-per-intensity scale; Gaussian: additive sigma.
  double param = 1.0;
};

struct SceneSpec {
  DetectorGeometry geometry;
  std::vector<RingSpec> rings;
  std::vector<SpotSpec> spots;
  std::vector<TextureArc> texture;
  double background = 10.0;
  NoiseSpec noise;
  // Ground truth marks pixels whose summed spot signal exceeds this fraction
  // of the local non-spot signal (rings + texture + background).
  double mask_threshold = 0.5;
  std::uint64_t seed = 0;
};

struct RenderedScene {
  ImageF image;
  MaskU8 mask;
};

// Deterministic render of a scene; noise is the only consumer of the seed.
RenderedScene render(const SceneSpec& spec);

enum class Archetype { Nickel, Battery, Perfect };

Archetype archetype_from_string(const std::string& name);
const char* archetype_name(Archetype a);

// Randomized scene specs in the style of one detector family:
// nickel = rings + spots, battery = rings + preferred orientation + texture
// + spots, perfect = rings only. Per-image intensity scales vary.
std::vector<SceneSpec> make_scene_specs(int n_images, Archetype archetype, Index size,
                                        std::uint64_t seed);

struct DatasetImage {
  SceneSpec spec;
  RenderedScene scene;
};

std::vector<DatasetImage> make_dataset(int n_images, Archetype archetype, Index size,
                                       std::uint64_t seed);

}  // namespace xrdseg
