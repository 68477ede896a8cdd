#pragma once

#include <xrdseg/common.hpp>
#include <xrdseg/geometry.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace xrdseg {

// Binned intensity-vs-2theta curve. Bins are uniform over [tth_lo, tth_hi];
// a bin that received no pixels has count 0 and NaN intensity (an explicit
// empty marker, not zero).
struct Pattern1D {
  std::vector<double> bin_centers;
  std::vector<double> intensity;
  std::vector<std::int64_t> counts;
  double tth_lo = 0.0, tth_hi = 0.0;
  std::string geometry_fingerprint;

  std::size_t size() const { return bin_centers.size(); }
  bool empty_bin(std::size_t b) const { return counts[b] == 0; }
};

// Azimuthal integration: per-bin arithmetic mean of the unmasked pixel values
// whose 2-theta (at the pixel center) falls in the bin. Masked pixels join
// neither the sum nor the count.
Pattern1D integrate(const ImageF& image, const MaskU8* mask,
                    const DetectorGeometry& geom, int n_bins, double tth_lo,
                    double tth_hi);

// Convenience: full detector acceptance, default bin count.
Pattern1D integrate(const ImageF& image, const MaskU8* mask,
                    const DetectorGeometry& geom, int n_bins = 2000);

struct PatternDelta {
  std::vector<double> delta;  // NaN where either side is empty
  double max_abs = 0.0;
  double l2 = 0.0;
  std::int64_t max_abs_bin = -1;
  std::int64_t compared_bins = 0;
};

// Per-bin differences a-b over bins non-empty in both patterns.
PatternDelta pattern_delta(const Pattern1D& a, const Pattern1D& b);

}  // namespace xrdseg
