#pragma once

#include <xrdseg/common.hpp>

#include <cstdint>
#include <string>

namespace xrdseg {

enum class MaskProvenance { Manual, UNet, Threshold };

const char* provenance_name(MaskProvenance p);
MaskProvenance provenance_from_string(const std::string& s);

// Boolean artifact mask aligned to a source image; 1 marks artifact pixels.
struct MaskImage {
  MaskU8 grid;
  MaskProvenance provenance = MaskProvenance::Manual;
  std::string source_id;
};

// Baseline spot finder: pixels are binned into 2-theta annuli and an annulus
// pixel is masked when it exceeds median + k * 1.4826 * MAD of its annulus.
// Robust statistics keep the spots themselves from inflating the threshold.
MaskImage threshold_mask(const ImageF& image, const ImageD& two_theta, int n_bins,
                         double esd_multiplier);

// Default annulus count: roughly one per pixel of mean ring-radius increment.
inline int default_threshold_bins(Index height) { return int(height / 2); }

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
};

ConfusionCounts confusion(const MaskU8& predicted, const MaskU8& truth);
ConfusionCounts confusion(const MaskImage& predicted, const MaskImage& truth);

// recall = tp / (tp + fn); defined as 1 when the truth has no positives.
double recall(const ConfusionCounts& c);
// specificity = tn / (tn + fp); defined as 1 when the truth has no negatives.
double specificity(const ConfusionCounts& c);
std::uint64_t fp_per_image(const ConfusionCounts& c);

}  // namespace xrdseg
