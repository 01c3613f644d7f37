#include "involukit/tdlu.hpp"

namespace involukit {

void TdluPostprocParams::validate() const {
  require(min_object_px >= 1, "min_object_px must be >= 1");
  require(median_kernel >= 1 && median_kernel % 2 == 1, "median_kernel must be odd and >= 1");
  require(max_hole_px >= 0, "max_hole_px must be >= 0");
}

TdluMaskResult postprocess_tdlu_map(const PredictionMap& map, const TdluPostprocParams& params) {
  params.validate();
  TdluMaskResult result;
  int cut = 0;
  try {
    cut = otsu_cut(kernels::omp::histogram256(map.values()));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateHistogram) throw;
    result.mask = BinaryMask(map.meta(), std::uint8_t{0});
    result.degenerate = true;
    return result;
  }
  result.threshold = otsu_threshold_from_cut(cut);

  // Values below the threshold are zeroed; the remaining nonzero pixels are
  // the objects the morphology acts on.
  BinaryMask objects(map.meta(), std::uint8_t{0});
  kernels::omp::threshold_at_least(map.values(), result.threshold, objects.values());
  BinaryMask opened = area_open(objects, params.min_object_px, kForeground);
  BinaryMask smoothed = median_filter_binary(opened, params.median_kernel);
  result.mask = fill_holes(smoothed, params.max_hole_px);
  return result;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  require_same_geometry(a.meta(), b.meta(), "dice");
  std::int64_t na = 0, nb = 0, both = 0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const bool x = va[i] != 0;
    const bool y = vb[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

TdluRegion make_tdlu_region(const RegionStats& stats, const RasterMeta& meta) {
  TdluRegion region;
  region.stats = stats;
  region.span_um = stats.major_axis_px * meta.microns_per_pixel;
  region.area_mm2 = static_cast<double>(stats.area_px) * meta.pixel_area_mm2();
  return region;
}

TdluSegmentation segment_tdlu_regions(const BinaryMask& mask) {
  TdluSegmentation seg;
  seg.labels = connected_components(mask, kForeground);
  for (const auto& s : region_stats(seg.labels)) seg.regions.push_back(make_tdlu_region(s, mask.meta()));
  return seg;
}

std::vector<TdluRegion> extract_tdlu_regions(const BinaryMask& mask) { return segment_tdlu_regions(mask).regions; }

}  // namespace involukit
