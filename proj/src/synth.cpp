#include <xrdseg/synth.hpp>

#include <xrdseg/rng.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace xrdseg {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Wrap-aware azimuth window test for texture arcs.
bool in_arc(double phi, double start, double end) {
  auto wrap = [](double a) {
    a = std::fmod(a, 2 * kPi);
    return a < 0 ? a + 2 * kPi : a;
  };
  const double span = wrap(end - start);
  return wrap(phi - start) <= span;
}

}  // namespace

RenderedScene render(const SceneSpec& spec) {
  validate_geometry(spec.geometry);
  const Index h = spec.geometry.height, w = spec.geometry.width;
  if (spec.background < 0) throw ConfigError("render: background must be >= 0");
  for (const SpotSpec& s : spec.spots) {
    if (s.ring_index < 0 || s.ring_index >= static_cast<int>(spec.rings.size())) {
      throw ConfigError("render: spot references ring " + std::to_string(s.ring_index) +
                        " but the scene has " + std::to_string(spec.rings.size()) +
                        " rings");
    }
  }
  for (const TextureArc& t : spec.texture) {
    if (t.ring_index < 0 || t.ring_index >= static_cast<int>(spec.rings.size())) {
      throw ConfigError("render: texture arc references ring " +
                        std::to_string(t.ring_index) + " but the scene has " +
                        std::to_string(spec.rings.size()) + " rings");
    }
  }
  const double tt_max = max_two_theta_deg(spec.geometry);
  for (const RingSpec& r : spec.rings) {
    if (r.two_theta_deg <= 0 || r.two_theta_deg >= tt_max) {
      throw ConfigError("render: ring at 2theta=" + std::to_string(r.two_theta_deg) +
                        " deg is outside detector acceptance (0, " +
                        std::to_string(tt_max) + ")");
    }
  }

  std::vector<double> ring_radius(spec.rings.size());
  for (std::size_t i = 0; i < spec.rings.size(); ++i) {
    ring_radius[i] = ring_radius_px(spec.geometry, spec.rings[i].two_theta_deg);
  }

  // Non-spot signal: background + rings (with PO modulation) + texture arcs.
  ImageD nonspot(h, w);
  ImageD spot_sum = ImageD::Zero(h, w);
  const double cy = spec.geometry.center_row, cx = spec.geometry.center_col;
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const double dr = double(r) - cy;
      const double dc = double(c) - cx;
      const double rho = std::sqrt(dr * dr + dc * dc);
      double v = spec.background;
      double phi = 0.0;
      bool phi_ready = false;
      for (std::size_t i = 0; i < spec.rings.size(); ++i) {
        const RingSpec& ring = spec.rings[i];
        const double d = rho - ring_radius[i];
        if (std::abs(d) > 8.0 * ring.radial_sigma_px) continue;
        double profile =
            ring.amplitude * std::exp(-d * d / (2.0 * ring.radial_sigma_px * ring.radial_sigma_px));
        if (ring.po_strength > 0.0) {
          if (!phi_ready) {
            phi = std::atan2(dr, dc);
            phi_ready = true;
          }
          const double ca = std::cos(phi - ring.po_phase_rad);
          profile *= 1.0 + ring.po_strength * ca * ca;
        }
        v += profile;
      }
      for (const TextureArc& arc : spec.texture) {
        const RingSpec& ring = spec.rings[arc.ring_index];
        const double d = rho - ring_radius[arc.ring_index];
        if (std::abs(d) > 8.0 * ring.radial_sigma_px) continue;
        if (!phi_ready) {
          phi = std::atan2(dr, dc);
          phi_ready = true;
        }
        if (!in_arc(phi, arc.phi_start_rad, arc.phi_end_rad)) continue;
        v += arc.amplitude *
             std::exp(-d * d / (2.0 * ring.radial_sigma_px * ring.radial_sigma_px));
      }
      nonspot(r, c) = v;
    }
  }

  // Spots evaluated over a +-6 sigma bounding box on their ring locus.
  for (const SpotSpec& s : spec.spots) {
    const double srow = cy + ring_radius[s.ring_index] * std::sin(s.azimuth_rad);
    const double scol = cx + ring_radius[s.ring_index] * std::cos(s.azimuth_rad);
    const Index r0 = std::max<Index>(0, Index(std::floor(srow - 6 * s.sigma_px)));
    const Index r1 = std::min<Index>(h - 1, Index(std::ceil(srow + 6 * s.sigma_px)));
    const Index c0 = std::max<Index>(0, Index(std::floor(scol - 6 * s.sigma_px)));
    const Index c1 = std::min<Index>(w - 1, Index(std::ceil(scol + 6 * s.sigma_px)));
    for (Index r = r0; r <= r1; ++r) {
      for (Index c = c0; c <= c1; ++c) {
        const double dr = double(r) - srow;
        const double dc = double(c) - scol;
        spot_sum(r, c) +=
            s.amplitude * std::exp(-(dr * dr + dc * dc) / (2.0 * s.sigma_px * s.sigma_px));
      }
    }
  }

  RenderedScene out;
  out.mask = MaskU8(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      out.mask(r, c) = spot_sum(r, c) > spec.mask_threshold * nonspot(r, c) ? 1 : 0;
    }
  }

  out.image = ImageF(h, w);
  Rng rng(derive_seed(spec.seed, 0x6e6f697365ULL));  // noise stream
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      double v = nonspot(r, c) + spot_sum(r, c);
      switch (spec.noise.kind) {
        case NoiseSpec::Kind::None:
          break;
        case NoiseSpec::Kind::Poisson:
          v = double(rng.poisson(v * spec.noise.param)) / spec.noise.param;
          break;
        case NoiseSpec::Kind::Gaussian:
          v = std::max(0.0, v + spec.noise.param * rng.normal());
          break;
      }
      out.image(r, c) = float(v);
    }
  }
  if (!out.image.isFinite().all()) {
    throw NumericError("render: non-finite pixel produced");
  }
  return out;
}

Archetype archetype_from_string(const std::string& name) {
  if (name == "nickel") return Archetype::Nickel;
  if (name == "battery") return Archetype::Battery;
  if (name == "perfect") return Archetype::Perfect;
  throw ConfigError("unknown archetype '" + name + "' (nickel|battery|perfect)");
}

const char* archetype_name(Archetype a) {
  switch (a) {
    case Archetype::Nickel: return "nickel";
    case Archetype::Battery: return "battery";
    case Archetype::Perfect: return "perfect";
  }
  return "?";
}

std::vector<SceneSpec> make_scene_specs(int n_images, Archetype archetype, Index size,
                                        std::uint64_t seed) {
  if (n_images < 1) throw ConfigError("make_scene_specs: n_images must be >= 1");
  if (size < 32) throw ConfigError("make_scene_specs: detector size must be >= 32");

  std::vector<SceneSpec> specs;
  specs.reserve(n_images);
  for (int img = 0; img < n_images; ++img) {
    Rng rng(derive_seed(seed, 0x7363656eULL + img));
    SceneSpec spec;
    spec.geometry.height = size;
    spec.geometry.width = size;
    spec.geometry.center_row = double(size - 1) / 2.0;
    spec.geometry.center_col = double(size - 1) / 2.0;
    spec.seed = derive_seed(seed, 0x696d67ULL + img);

    const double tt_max = max_two_theta_deg(spec.geometry);
    // Keep ring loci inside the inscribed circle so spots stay on-detector.
    const double tt_hi = two_theta_deg_at(spec.geometry, spec.geometry.center_row,
                                          double(size - 1)) *
                         0.92;
    const double tt_lo = 0.12 * tt_max;
    const int n_rings = 4 + int(rng.uniform_index(4));  // 4..7
    const double slot = (tt_hi - tt_lo) / n_rings;
    const double scale = std::pow(10.0, rng.uniform(-0.3, 0.8));
    for (int i = 0; i < n_rings; ++i) {
      RingSpec ring;
      ring.two_theta_deg = tt_lo + slot * (i + 0.1 + 0.8 * rng.uniform());
      ring.amplitude = scale * rng.uniform(80.0, 300.0);
      ring.radial_sigma_px = rng.uniform(1.5, 3.5);
      spec.rings.push_back(ring);
    }
    spec.background = scale * rng.uniform(5.0, 15.0);

    if (archetype == Archetype::Battery) {
      // at least one preferred-orientation ring, coin flip for the rest
      const int forced = int(rng.uniform_index(n_rings));
      for (int i = 0; i < n_rings; ++i) {
        const bool po = (i == forced) || rng.uniform() < 0.5;
        if (po) {
          spec.rings[i].po_strength = rng.uniform(0.8, 2.5);
          spec.rings[i].po_phase_rad = rng.uniform(0.0, 2 * kPi);
        }
      }
      const int n_arcs = 1 + int(rng.uniform_index(3));  // 1..3
      for (int i = 0; i < n_arcs; ++i) {
        TextureArc arc;
        arc.ring_index = int(rng.uniform_index(n_rings));
        const double center = rng.uniform(0.0, 2 * kPi);
        const double half = rng.uniform(5.0, 20.0) * kPi / 180.0;
        arc.phi_start_rad = center - half;
        arc.phi_end_rad = center + half;
        arc.amplitude = spec.rings[arc.ring_index].amplitude * rng.uniform(0.4, 1.0);
        spec.texture.push_back(arc);
      }
    }

    if (archetype != Archetype::Perfect) {
      const int n_spots = 4 + int(rng.uniform_index(7));  // 4..10
      for (int i = 0; i < n_spots; ++i) {
        SpotSpec s;
        s.ring_index = int(rng.uniform_index(n_rings));
        s.azimuth_rad = rng.uniform(0.0, 2 * kPi);
        s.amplitude = spec.rings[s.ring_index].amplitude * rng.uniform(6.0, 15.0);
        s.sigma_px = rng.uniform(2.0, 4.0);
        spec.spots.push_back(s);
      }
    }

    spec.noise.kind = NoiseSpec::Kind::Poisson;
    spec.noise.param = 1.0;
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<DatasetImage> make_dataset(int n_images, Archetype archetype, Index size,
                                       std::uint64_t seed) {
  std::vector<DatasetImage> out;
  out.reserve(n_images);
  for (SceneSpec& spec : make_scene_specs(n_images, archetype, size, seed)) {
    DatasetImage img;
    img.scene = render(spec);
    img.spec = std::move(spec);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace xrdseg
