#include <xrdseg/geometry.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>

namespace xrdseg {

namespace {
constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
}

void validate_geometry(const DetectorGeometry& geom) {
  if (geom.height < 1 || geom.width < 1) {
    throw ConfigError("geometry: detector size must be positive");
  }
  if (geom.pixel_pitch_mm <= 0) throw ConfigError("geometry: pixel_pitch_mm must be > 0");
  if (geom.distance_mm <= 0) throw ConfigError("geometry: distance_mm must be > 0");
  if (geom.wavelength_angstrom <= 0) {
    throw ConfigError("geometry: wavelength_angstrom must be > 0");
  }
}

double two_theta_deg_at(const DetectorGeometry& geom, double row, double col) {
  const double dr = row - geom.center_row;
  const double dc = col - geom.center_col;
  const double rho = std::sqrt(dr * dr + dc * dc);
  return std::atan(rho * geom.pixel_pitch_mm / geom.distance_mm) * kRadToDeg;
}

double ring_radius_px(const DetectorGeometry& geom, double two_theta_deg) {
  return geom.distance_mm * std::tan(two_theta_deg / kRadToDeg) / geom.pixel_pitch_mm;
}

ImageD two_theta_map(const DetectorGeometry& geom) {
  validate_geometry(geom);
  ImageD map(geom.height, geom.width);
  for (Index r = 0; r < geom.height; ++r) {
    for (Index c = 0; c < geom.width; ++c) {
      map(r, c) = two_theta_deg_at(geom, double(r), double(c));
    }
  }
  return map;
}

double max_two_theta_deg(const DetectorGeometry& geom) {
  double best = 0;
  const double corners[4][2] = {{0, 0},
                                {0, double(geom.width - 1)},
                                {double(geom.height - 1), 0},
                                {double(geom.height - 1), double(geom.width - 1)}};
  for (const auto& pt : corners) {
    best = std::max(best, two_theta_deg_at(geom, pt[0], pt[1]));
  }
  return best;
}

std::string geometry_fingerprint(const DetectorGeometry& geom) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g,%.17g,%.17g,%.17g,%.17g",
                static_cast<long long>(geom.height), static_cast<long long>(geom.width),
                geom.center_row, geom.center_col, geom.pixel_pitch_mm, geom.distance_mm,
                geom.wavelength_angstrom);
  // FNV-1a over the canonical parameter string
  std::uint64_t h = 1469598103934665603ULL;
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<std::uint64_t>(*p);
    h *= 1099511628211ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace xrdseg
