#include "involukit/adipose.hpp"

#include "involukit/measures.hpp"

namespace involukit {

void AdiposeParams::validate() const { require(threshold > 0.0 && threshold < 1.0, "adipose threshold must be in (0,1)"); }

BinaryMask postprocess_adipose_map(const PredictionMap& map, const AdiposeParams& params) {
  params.validate();
  BinaryMask out(map.meta(), std::uint8_t{0});
  kernels::omp::threshold_at_least(map.values(), static_cast<float>(params.threshold), out.values());
  return out;
}

double adipose_fraction(std::int64_t adipose_in_tissue_px, std::int64_t tissue_px) {
  if (tissue_px <= 0) fail(ErrorCode::EmptyTissue, "tissue mask is empty");
  return static_cast<double>(adipose_in_tissue_px) / static_cast<double>(tissue_px);
}

double adipose_fraction(const BinaryMask& adipose, const BinaryMask& tissue) {
  require_same_geometry(adipose.meta(), tissue.meta(), "adipose_fraction");
  std::int64_t both = 0, total = 0;
  auto a = adipose.values();
  auto t = tissue.values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t[i]) continue;
    ++total;
    both += a[i] != 0;
  }
  return adipose_fraction(both, total);
}

TissueContext make_tissue_context(BinaryMask tissue, BinaryMask adipose) {
  require_same_geometry(tissue.meta(), adipose.meta(), "make_tissue_context");
  auto a = adipose.values();
  auto t = tissue.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] && t[i];
  TissueContext ctx;
  const std::int64_t tissue_px = tissue.count();
  ctx.adipose_fraction = adipose_fraction(adipose.count(), tissue_px);
  ctx.tissue_area_mm2 = static_cast<double>(tissue_px) * tissue.meta().pixel_area_mm2();
  ctx.adjusted_area_mm2 = adjusted_tissue_area(tissue_px, ctx.adipose_fraction, tissue.meta());
  ctx.tissue_mask = std::move(tissue);
  ctx.adipose_mask = std::move(adipose);
  return ctx;
}

BinaryMask derive_tissue_mask(const RgbImage& rgb, const TissueMaskParams& params) {
  rgb.meta.validate();
  require(static_cast<std::int64_t>(rgb.rgb.size()) == 3 * rgb.meta.pixel_count(), "rgb payload size mismatch");
  BinaryMask raw(rgb.meta, std::uint8_t{0});
  auto out = raw.values();
  const auto cutoff = static_cast<float>(params.luminance_cutoff);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = relative_luminance(rgb.rgb[3 * i], rgb.rgb[3 * i + 1], rgb.rgb[3 * i + 2]) < cutoff;
  return fill_holes(area_open(raw, params.cleanup_px), params.cleanup_px);
}

AdiposeBin bin_adipose_fraction(double fraction) {
  if (fraction < 0.25) return AdiposeBin::Below25;
  if (fraction < 0.50) return AdiposeBin::From25To50;
  if (fraction <= 0.75) return AdiposeBin::From50To75;
  return AdiposeBin::Above75;
}

double bin_midpoint(AdiposeBin bin) {
  switch (bin) {
    case AdiposeBin::Below25: return 0.125;
    case AdiposeBin::From25To50: return 0.375;
    case AdiposeBin::From50To75: return 0.625;
    case AdiposeBin::Above75: return 0.875;
  }
  return 0.0;
}

std::string_view to_string(AdiposeBin bin) {
  switch (bin) {
    case AdiposeBin::Below25: return "<25%";
    case AdiposeBin::From25To50: return "25-50%";
    case AdiposeBin::From50To75: return "50-75%";
    case AdiposeBin::Above75: return ">75%";
  }
  return "";
}

}  // namespace involukit
