#pragma once

#include <cstdint>
#include <string_view>

#include "involukit/grid_core.hpp"

namespace involukit {

struct AdiposeParams {
  /// Foreground is value >= threshold.
  double threshold = 0.6;

  void validate() const;
};

struct TissueContext {
  BinaryMask tissue_mask;
  BinaryMask adipose_mask;
  double adipose_fraction = 0.0;
  double tissue_area_mm2 = 0.0;
  double adjusted_area_mm2 = 0.0;
};

BinaryMask postprocess_adipose_map(const PredictionMap& map, const AdiposeParams& params);

/// |adipose and tissue| / |tissue|; throws EmptyTissue.
double adipose_fraction(const BinaryMask& adipose, const BinaryMask& tissue);

/// Pixel-count form used by the tiled pipeline.
double adipose_fraction(std::int64_t adipose_in_tissue_px, std::int64_t tissue_px);

/// Adipose outside the tissue mask is discarded.
TissueContext make_tissue_context(BinaryMask tissue, BinaryMask adipose);

struct TissueMaskParams {
  double luminance_cutoff = 0.88;
  std::int64_t cleanup_px = 2500;
};

/// Rec. 709 weights applied to the stored [0,1] channel values.
inline float relative_luminance(float r, float g, float b) { return 0.2126f * r + 0.7152f * g + 0.0722f * b; }

/// Tissue is darker than the near-white slide background: luminance below
/// the cutoff, then area opening and hole filling at `cleanup_px`.
BinaryMask derive_tissue_mask(const RgbImage& rgb, const TissueMaskParams& params = {});

/// The manual protocol's adipose bins.
enum class AdiposeBin { Below25, From25To50, From50To75, Above75 };

AdiposeBin bin_adipose_fraction(double fraction);
/// Representative fraction of a bin (its midpoint).
double bin_midpoint(AdiposeBin bin);
std::string_view to_string(AdiposeBin bin);

}  // namespace involukit
