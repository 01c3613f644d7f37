#include "involukit/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "involukit/kernels.hpp"
#include "involukit/version.hpp"

namespace involukit {

namespace {

struct Geometry {
  RasterMeta meta;
  bool tissue_given = false;
};

Geometry check_inputs(const PipelineInputs& in, const PipelineParams& params) {
  params.validate();
  require(in.tdlu_map != nullptr, "a TDLU map is required");
  require(in.acini_map != nullptr, "an acini map is required");
  require(!params.use_adipose || in.adipose_map != nullptr, "an adipose map is required unless adipose is disabled");
  require(in.tissue_mask == nullptr || in.rgb == nullptr, "give a tissue mask or an RGB image, not both");
  Geometry g{in.tdlu_map->meta(), in.tissue_mask != nullptr || in.rgb != nullptr};
  require_same_geometry(g.meta, in.acini_map->meta(), "acini map");
  if (params.use_adipose) require_same_geometry(g.meta, in.adipose_map->meta(), "adipose map");
  if (in.tissue_mask) require_same_geometry(g.meta, in.tissue_mask->meta(), "tissue mask");
  if (in.rgb) {
    require_same_geometry(g.meta, in.rgb->meta, "rgb image");
    require(static_cast<std::int64_t>(in.rgb->rgb.size()) == 3 * g.meta.pixel_count(), "rgb payload size mismatch");
  }
  return g;
}

void luminance_bits(const RgbImage& rgb, const Rect& rect, const TissueMaskParams& params,
                    std::span<std::uint8_t> out) {
  const auto cutoff = static_cast<float>(params.luminance_cutoff);
  for (std::int64_t r = 0; r < rect.rows; ++r) {
    const float* src = rgb.rgb.data() + 3 * ((rect.row0 + r) * rgb.meta.width + rect.col0);
    for (std::int64_t c = 0; c < rect.cols; ++c)
      out[r * rect.cols + c] = relative_luminance(src[3 * c], src[3 * c + 1], src[3 * c + 2]) < cutoff;
  }
}

Provenance make_provenance(const RasterMeta& meta) {
  Provenance p;
  p.tool_version = std::string(kVersion);
  p.width = meta.width;
  p.height = meta.height;
  p.microns_per_pixel = meta.microns_per_pixel;
  return p;
}

AreaSummary summarize_area(std::int64_t tissue_px, std::int64_t adipose_px, const RasterMeta& meta,
                           bool use_adipose) {
  if (tissue_px <= 0) fail(ErrorCode::EmptyTissue, "tissue mask is empty");
  AreaSummary area;
  area.tissue_area_mm2 = static_cast<double>(tissue_px) * meta.pixel_area_mm2();
  area.adipose_fraction = use_adipose ? adipose_fraction(adipose_px, tissue_px) : 0.0;
  area.adjusted_area_mm2 = adjusted_tissue_area(tissue_px, area.adipose_fraction, meta);
  return area;
}

InvolutionReport finish_report(std::vector<TdluRegion>& regions, const std::vector<std::int64_t>& counts,
                               std::int64_t orphans, const AreaSummary& area, const PipelineParams& params,
                               const RasterMeta& meta, float threshold, bool degenerate,
                               bool tissue_given) {
  apply_acini_counts(regions, counts, params.calibration);
  InvolutionReport rep = compute_report(regions, counts, orphans, area, params.calibration, params.report);
  rep.slide_id = params.slide_id;
  const Provenance computed = rep.provenance;
  rep.provenance = make_provenance(meta);
  rep.provenance.calibration_slope = computed.calibration_slope;
  rep.provenance.calibration_intercept = computed.calibration_intercept;
  rep.provenance.classify_on_calibrated = computed.classify_on_calibrated;
  if (degenerate)
    rep.add_flag(std::string(flags::kDegenerateTdluMap));
  else
    rep.provenance.otsu_threshold = static_cast<double>(threshold);
  if (!tissue_given) rep.add_flag(std::string(flags::kNoTissueMask));
  if (!params.use_adipose) rep.add_flag(std::string(flags::kAdiposeDisabled));
  return rep;
}

}  // namespace

std::int64_t TileSpec::required_halo(const AciniDetectParams& acini, const TdluPostprocParams& tdlu) {
  const auto median_reach = static_cast<std::int64_t>((tdlu.median_kernel + 1) / 2);
  const auto nms_reach = static_cast<std::int64_t>(std::ceil(acini.nms_radius_px));
  return std::max(median_reach, nms_reach);
}

void TileSpec::validate(const AciniDetectParams& acini, const TdluPostprocParams& tdlu) const {
  const auto need = required_halo(acini, tdlu);
  require(halo_px >= need, "halo_px must be at least " + std::to_string(need) + " for these parameters");
  require(tile_size_px > 2 * halo_px, "tile_size_px must exceed twice the halo");
}

void PipelineParams::validate() const {
  acini.validate();
  tdlu.validate();
  adipose.validate();
  calibration.validate();
  require(tissue.luminance_cutoff > 0.0 && tissue.luminance_cutoff <= 1.0, "luminance_cutoff must be in (0,1]");
  require(tissue.cleanup_px >= 1, "tissue cleanup_px must be >= 1");
  tiles.validate(acini, tdlu);
}

PipelineResult run_pipeline(const PipelineInputs& in, const PipelineParams& params) {
  const Geometry g = check_inputs(in, params);
  const RasterMeta& meta = g.meta;
  const TileGrid grid(meta, params.tiles.tile_size_px);
  const auto n_tiles = static_cast<std::size_t>(grid.count());

  // Pass 1: everything that needs one read per tile.
  std::vector<kernels::Histogram256> histograms(n_tiles);
  std::vector<std::vector<PeakCandidate>> candidates(n_tiles);
  TiledMask tissue_raw(grid);
  TiledMask adipose_raw(grid);
  const auto adipose_cut = static_cast<float>(params.adipose.threshold);
  parallel_for(grid.count(), [&](std::int64_t i) {
    const Rect rect = grid.tile(i);
    std::vector<float> values(static_cast<std::size_t>(rect.area()));
    std::vector<std::uint8_t> bits(values.size());
    in.tdlu_map->read(rect, values);
    histograms[i] = kernels::serial::histogram256(values);
    in.acini_map->read(rect, values);
    collect_peak_candidates(values, rect, meta.width, params.acini.nms_threshold, candidates[i]);
    if (params.use_adipose) {
      in.adipose_map->read(rect, values);
      kernels::serial::threshold_at_least(values, adipose_cut, bits);
      adipose_raw.tile(i) = TileRuns::encode(bits, rect);
    }
    if (in.tissue_mask) {
      in.tissue_mask->read(rect, bits);
    } else if (in.rgb) {
      luminance_bits(*in.rgb, rect, params.tissue, bits);
    } else {
      std::fill(bits.begin(), bits.end(), std::uint8_t{1});
    }
    tissue_raw.tile(i) = TileRuns::encode(bits, rect);
  });

  PipelineResult result;
  // Adipose mask, then tissue context.
  result.tissue_mask = in.rgb ? tiled_fill_holes(tiled_area_open(tissue_raw, params.tissue.cleanup_px),
                                                 params.tissue.cleanup_px)
                              : std::move(tissue_raw);
  result.adipose_mask = result.tissue_mask.intersect(adipose_raw);
  const AreaSummary area =
      summarize_area(result.tissue_mask.count(), result.adipose_mask.count(), meta, params.use_adipose);

  // TDLU mask.
  kernels::Histogram256 hist{};
  for (const auto& h : histograms)
    for (int b = 0; b < 256; ++b) hist[b] += h[b];
  float threshold = 0.0f;
  bool degenerate = false;
  try {
    threshold = otsu_threshold_from_cut(otsu_cut(hist));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateHistogram) throw;
    degenerate = true;
  }
  if (!degenerate) {
    const float t = threshold;
    const TiledMask objects = TiledMask::build(grid, [&](std::int64_t, const Rect& rect, std::span<std::uint8_t> bits) {
      std::vector<float> values(static_cast<std::size_t>(rect.area()));
      in.tdlu_map->read(rect, values);
      kernels::serial::threshold_at_least(values, t, bits);
    });
    const TiledMask opened = tiled_area_open(objects, params.tdlu.min_object_px);
    const TiledMask smoothed = tiled_median_filter(opened, params.tdlu.median_kernel);
    result.tdlu_mask = tiled_fill_holes(smoothed, params.tdlu.max_hole_px);
  } else {
    result.tdlu_mask = TiledMask(grid);
  }

  // Regions.
  result.tdlu_components = merge_components_across_tiles(result.tdlu_mask, kForeground);
  for (const auto& s : tiled_region_stats(result.tdlu_components)) result.regions.push_back(make_tdlu_region(s, meta));

  // Acini detection and assignment.
  std::vector<PeakCandidate> all;
  for (auto& c : candidates) {
    all.insert(all.end(), c.begin(), c.end());
    std::vector<PeakCandidate>().swap(c);
  }
  result.detections = suppress_peaks(std::move(all), meta, params.acini);
  std::vector<std::int64_t> counts(result.regions.size(), 0);
  std::int64_t orphans = 0;
  for (const auto& p : result.detections.points) {
    const auto r = std::clamp<std::int64_t>(std::llround(p.row), 0, meta.height - 1);
    const auto c = std::clamp<std::int64_t>(std::llround(p.col), 0, meta.width - 1);
    const auto label = result.tdlu_components.label_at(result.tdlu_mask, r, c);
    result.detection_labels.push_back(label);
    if (label > 0)
      ++counts[static_cast<std::size_t>(label) - 1];
    else
      ++orphans;
  }

  result.report = finish_report(result.regions, counts, orphans, area, params, meta, threshold, degenerate, g.tissue_given);
  return result;
}

ReferenceResult run_pipeline_monolithic(const PipelineInputs& in, const PipelineParams& params) {
  const Geometry g = check_inputs(in, params);
  const RasterMeta& meta = g.meta;
  const Rect full{0, 0, meta.height, meta.width};
  auto load = [&](const FloatSource& src) {
    PredictionMap map(meta, 0.0f);
    src.read(full, map.values());
    return map;
  };

  ReferenceResult result;
  if (in.tissue_mask) {
    result.tissue_mask = BinaryMask(meta, std::uint8_t{0});
    in.tissue_mask->read(full, result.tissue_mask.values());
  } else if (in.rgb) {
    result.tissue_mask = derive_tissue_mask(*in.rgb, params.tissue);
  } else {
    result.tissue_mask = BinaryMask(meta, std::uint8_t{1});
  }
  result.adipose_mask =
      params.use_adipose ? postprocess_adipose_map(load(*in.adipose_map), params.adipose) : BinaryMask(meta, std::uint8_t{0});
  {
    auto a = result.adipose_mask.values();
    auto t = result.tissue_mask.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] && t[i];
  }
  const AreaSummary area =
      summarize_area(result.tissue_mask.count(), result.adipose_mask.count(), meta, params.use_adipose);

  TdluMaskResult tdlu = postprocess_tdlu_map(load(*in.tdlu_map), params.tdlu);
  result.tdlu_mask = std::move(tdlu.mask);
  TdluSegmentation seg = segment_tdlu_regions(result.tdlu_mask);
  result.regions = std::move(seg.regions);
  result.labels = std::move(seg.labels);

  result.detections = nms_peaks(load(*in.acini_map), params.acini);
  const AciniAssignment assignment = assign_acini(result.detections, result.labels, result.regions.size());
  for (const auto& p : result.detections.points) {
    const auto r = std::clamp<std::int64_t>(std::llround(p.row), 0, meta.height - 1);
    const auto c = std::clamp<std::int64_t>(std::llround(p.col), 0, meta.width - 1);
    result.detection_labels.push_back(result.labels.at(r, c));
  }
  result.report = finish_report(result.regions, assignment.counts, assignment.orphans, area, params, meta, tdlu.threshold,
                                tdlu.degenerate, g.tissue_given);
  return result;
}

}  // namespace involukit
