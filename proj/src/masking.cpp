#include <xrdseg/masking.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace xrdseg {

const char* provenance_name(MaskProvenance p) {
  switch (p) {
    case MaskProvenance::Manual: return "manual";
    case MaskProvenance::UNet: return "unet";
    case MaskProvenance::Threshold: return "threshold";
  }
  return "?";
}

MaskProvenance provenance_from_string(const std::string& s) {
  if (s == "manual") return MaskProvenance::Manual;
  if (s == "unet") return MaskProvenance::UNet;
  if (s == "threshold") return MaskProvenance::Threshold;
  throw DataError("unknown mask provenance '" + s + "'");
}

namespace {

// Median of an unsorted buffer (average of the central pair for even sizes).
double median_inplace(std::vector<float>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (n % 2 == 0) {
    const auto lo = std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + double(*lo));
  }
  return m;
}

}  // namespace

MaskImage threshold_mask(const ImageF& image, const ImageD& two_theta, int n_bins,
                         double esd_multiplier) {
  if (image.rows() != two_theta.rows() || image.cols() != two_theta.cols()) {
    throw DataError("threshold_mask: 2theta map shape does not match image");
  }
  if (n_bins < 1) throw ConfigError("threshold_mask: n_bins must be >= 1");
  if (esd_multiplier <= 0) throw ConfigError("threshold_mask: esd multiplier must be > 0");

  const double lo = two_theta.minCoeff();
  const double hi = two_theta.maxCoeff();
  const double width = (hi > lo) ? (hi - lo) / n_bins : 1.0;
  const Index npix = image.size();

  // counting sort of pixel indices by annulus
  std::vector<int> bin_of(npix);
  std::vector<Index> bin_count(n_bins, 0);
  for (Index i = 0; i < npix; ++i) {
    int b = int((two_theta.data()[i] - lo) / width);
    if (b < 0) b = 0;
    if (b >= n_bins) b = n_bins - 1;
    bin_of[i] = b;
    ++bin_count[b];
  }
  std::vector<Index> offset(n_bins + 1, 0);
  for (int b = 0; b < n_bins; ++b) offset[b + 1] = offset[b] + bin_count[b];
  std::vector<Index> members(npix);
  {
    std::vector<Index> cursor(offset.begin(), offset.end() - 1);
    for (Index i = 0; i < npix; ++i) members[cursor[bin_of[i]]++] = i;
  }

  MaskImage out;
  out.provenance = MaskProvenance::Threshold;
  out.grid = MaskU8::Zero(image.rows(), image.cols());

  std::vector<float> values;
  std::vector<float> dev;
  for (int b = 0; b < n_bins; ++b) {
    if (bin_count[b] == 0) continue;  // empty annulus skipped
    const Index begin = offset[b], end = offset[b + 1];
    values.clear();
    for (Index j = begin; j < end; ++j) values.push_back(image.data()[members[j]]);
    const double med = median_inplace(values);
    dev.clear();
    dev.reserve(end - begin);
    for (Index j = begin; j < end; ++j) {
      dev.push_back(float(std::abs(double(image.data()[members[j]]) - med)));
    }
    const double mad = median_inplace(dev);
    const double cut = med + esd_multiplier * 1.4826 * mad;
    for (Index j = begin; j < end; ++j) {
      if (double(image.data()[members[j]]) > cut) out.grid.data()[members[j]] = 1;
    }
  }
  return out;
}

ConfusionCounts confusion(const MaskU8& predicted, const MaskU8& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw DataError("confusion: predicted " + std::to_string(predicted.rows()) + "x" +
                    std::to_string(predicted.cols()) + " vs truth " +
                    std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }
  ConfusionCounts c;
  const Index n = predicted.size();
  for (Index i = 0; i < n; ++i) {
    const bool p = predicted.data()[i] != 0;
    const bool t = truth.data()[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(const MaskImage& predicted, const MaskImage& truth) {
  return confusion(predicted.grid, truth.grid);
}

double recall(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fn;
  return denom == 0 ? 1.0 : double(c.tp) / double(denom);
}

double specificity(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tn + c.fp;
  return denom == 0 ? 1.0 : double(c.tn) / double(denom);
}

std::uint64_t fp_per_image(const ConfusionCounts& c) { return c.fp; }

}  // namespace xrdseg
