#include <xrdseg/integrate.hpp>

#include <cmath>
#include <limits>

namespace xrdseg {

Pattern1D integrate(const ImageF& image, const MaskU8* mask,
                    const DetectorGeometry& geom, int n_bins, double tth_lo,
                    double tth_hi) {
  validate_geometry(geom);
  if (image.rows() != geom.height || image.cols() != geom.width) {
    throw DataError("integrate: image " + std::to_string(image.rows()) + "x" +
                    std::to_string(image.cols()) + " does not match detector " +
                    std::to_string(geom.height) + "x" + std::to_string(geom.width));
  }
  if (mask && (mask->rows() != image.rows() || mask->cols() != image.cols())) {
    throw DataError("integrate: mask shape does not match image");
  }
  if (n_bins < 1) throw ConfigError("integrate: n_bins must be >= 1");
  if (!(tth_hi > tth_lo)) {
    throw ConfigError("integrate: inverted 2theta range [" + std::to_string(tth_lo) +
                      ", " + std::to_string(tth_hi) + "]");
  }

  Pattern1D p;
  p.tth_lo = tth_lo;
  p.tth_hi = tth_hi;
  p.geometry_fingerprint = geometry_fingerprint(geom);
  const double width = (tth_hi - tth_lo) / n_bins;
  p.bin_centers.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) p.bin_centers[b] = tth_lo + width * (b + 0.5);
  p.counts.assign(n_bins, 0);
  std::vector<double> sums(n_bins, 0.0);

  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      if (mask && (*mask)(r, c) != 0) continue;
      const double tt = two_theta_deg_at(geom, double(r), double(c));
      if (tt < tth_lo || tt > tth_hi) continue;
      int b = int((tt - tth_lo) / width);
      if (b >= n_bins) b = n_bins - 1;  // tth_hi lands in the last bin
      sums[b] += double(image(r, c));
      ++p.counts[b];
    }
  }

  p.intensity.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    p.intensity[b] = p.counts[b] > 0 ? sums[b] / double(p.counts[b])
                                     : std::numeric_limits<double>::quiet_NaN();
  }
  return p;
}

Pattern1D integrate(const ImageF& image, const MaskU8* mask,
                    const DetectorGeometry& geom, int n_bins) {
  return integrate(image, mask, geom, n_bins, 0.0, max_two_theta_deg(geom));
}

PatternDelta pattern_delta(const Pattern1D& a, const Pattern1D& b) {
  if (a.size() != b.size() || a.tth_lo != b.tth_lo || a.tth_hi != b.tth_hi) {
    throw DataError("pattern_delta: binning mismatch (" + std::to_string(a.size()) +
                    " bins over [" + std::to_string(a.tth_lo) + "," +
                    std::to_string(a.tth_hi) + "] vs " + std::to_string(b.size()) +
                    " over [" + std::to_string(b.tth_lo) + "," +
                    std::to_string(b.tth_hi) + "])");
  }
  PatternDelta d;
  d.delta.assign(a.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.empty_bin(i) || b.empty_bin(i)) continue;  // empty bins excluded pairwise
    const double diff = a.intensity[i] - b.intensity[i];
    d.delta[i] = diff;
    d.l2 += diff * diff;
    ++d.compared_bins;
    if (std::abs(diff) > d.max_abs) {
      d.max_abs = std::abs(diff);
      d.max_abs_bin = static_cast<std::int64_t>(i);
    }
  }
  d.l2 = std::sqrt(d.l2);
  return d;
}

}  // namespace xrdseg
