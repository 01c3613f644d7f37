#pragma once

#include <cstdint>
#include <vector>

#include "involukit/grid_core.hpp"

namespace involukit {

struct TdluPostprocParams {
  std::int64_t min_object_px = 2500;
  int median_kernel = 11;
  std::int64_t max_hole_px = 2500;

  void validate() const;
};

struct TdluMaskResult {
  BinaryMask mask;
  /// Otsu found no separable classes; `mask` is empty.
  bool degenerate = false;
  float threshold = 0.0f;
};

/// Otsu threshold, zero sub-threshold values, area opening, majority
/// (median) filter, hole filling. In that order, nothing else.
TdluMaskResult postprocess_tdlu_map(const PredictionMap& map, const TdluPostprocParams& params);

/// 2|A and B| / (|A| + |B|); 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

struct TdluRegion {
  RegionStats stats;
  double span_um = 0.0;
  double area_mm2 = 0.0;
  std::int64_t acini_count_raw = 0;
  double acini_count_calibrated = 0.0;

  bool operator==(const TdluRegion&) const = default;
};

TdluRegion make_tdlu_region(const RegionStats& stats, const RasterMeta& meta);

struct TdluSegmentation {
  LabelMap labels;
  std::vector<TdluRegion> regions;  // regions[i] has label i + 1
};

TdluSegmentation segment_tdlu_regions(const BinaryMask& mask);

/// One region per 8-connected component, acini counts left at zero.
std::vector<TdluRegion> extract_tdlu_regions(const BinaryMask& mask);

}  // namespace involukit
