#pragma once

#include <xrdseg/common.hpp>

#include <string>

namespace xrdseg {

// Flat area-detector geometry. Pixel coordinates are index-valued: pixel
// (r, c) samples the scattering angle at exactly (r, c), so a beam center of
// (255.5, 255.5) sits between the four central pixels of a 512x512 detector.
struct DetectorGeometry {
  Index height = 512;
  Index width = 512;
  double center_row = 255.5;
  double center_col = 255.5;
  double pixel_pitch_mm = 0.15;
  double distance_mm = 1000.0;
  double wavelength_angstrom = 0.1173;
};

void validate_geometry(const DetectorGeometry& geom);

// Scattering angle in degrees at a (possibly fractional) pixel position.
double two_theta_deg_at(const DetectorGeometry& geom, double row, double col);

// Radius in pixels of the ring at a given scattering angle.
double ring_radius_px(const DetectorGeometry& geom, double two_theta_deg);

// Per-pixel scattering angle map in degrees; zero at the beam center and
// monotone in the radial distance.
ImageD two_theta_map(const DetectorGeometry& geom);

// Largest 2-theta on the detector (attained at a corner pixel).
double max_two_theta_deg(const DetectorGeometry& geom);

// Stable hash of the geometry parameters; embedded in integration outputs so
// patterns from different calibrations cannot be compared silently.
std::string geometry_fingerprint(const DetectorGeometry& geom);

}  // namespace xrdseg
