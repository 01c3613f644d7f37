#include "involukit/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace involukit {

void CalibrationModel::validate() const {
  require(std::isfinite(slope) && slope > 0.0, "calibration slope must be positive");
  require(std::isfinite(intercept), "calibration intercept must be finite");
}

RussoType russo_type_of(double acini_count) {
  if (acini_count < 12.0) return RussoType::Type1;
  if (acini_count <= 80.0) return RussoType::Type2;
  return RussoType::Type3;
}

RussoType classify_russo(std::span<const double> counts) {
  if (counts.empty()) fail(ErrorCode::NoRegions, "cannot classify a slide without TDLUs");
  std::array<std::int64_t, 4> freq{};
  std::array<double, 4> total{};
  for (double c : counts) {
    const int t = static_cast<int>(russo_type_of(c));
    ++freq[t];
    total[t] += c;
  }
  int best = 1;
  for (int t = 2; t <= 3; ++t) {
    if (freq[t] > freq[best] || (freq[t] == freq[best] && total[t] >= total[best])) best = t;
  }
  return static_cast<RussoType>(best);
}

BaerCategory classify_baer(std::span<const RussoType> types) {
  if (types.empty()) fail(ErrorCode::NoRegions, "cannot classify a slide without TDLUs");
  std::array<std::int64_t, 4> freq{};
  for (auto t : types) ++freq[static_cast<int>(t)];
  if (freq[1] == 0) return BaerCategory::NoType1;
  if (freq[3] == 0 && freq[1] > freq[2]) return BaerCategory::PredominantlyType1NoType3;
  return BaerCategory::MixedLobules;
}

std::string_view to_string(RussoType t) {
  switch (t) {
    case RussoType::Type1: return "type1";
    case RussoType::Type2: return "type2";
    case RussoType::Type3: return "type3";
  }
  return "";
}

std::string_view to_string(BaerCategory c) {
  switch (c) {
    case BaerCategory::NoType1: return "no_type1";
    case BaerCategory::PredominantlyType1NoType3: return "predominantly_type1_no_type3";
    case BaerCategory::MixedLobules: return "mixed_lobules";
  }
  return "";
}

RussoType parse_russo(std::string_view s) {
  for (auto t : {RussoType::Type1, RussoType::Type2, RussoType::Type3})
    if (s == to_string(t)) return t;
  fail(ErrorCode::InvalidArgument, "unknown Russo type '" + std::string(s) + "'");
}

BaerCategory parse_baer(std::string_view s) {
  for (auto c : {BaerCategory::NoType1, BaerCategory::PredominantlyType1NoType3, BaerCategory::MixedLobules})
    if (s == to_string(c)) return c;
  fail(ErrorCode::InvalidArgument, "unknown Baer category '" + std::string(s) + "'");
}

double median_of(std::vector<double> values) {
  require(!values.empty(), "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AciniAssignment assign_acini(const CentroidSet& acini, const LabelMap& labels, std::size_t n_regions) {
  require_same_geometry(acini.meta, labels.meta(), "assign_acini");
  AciniAssignment out;
  out.counts.assign(n_regions, 0);
  for (const auto& p : acini.points) {
    const auto r = std::clamp<std::int64_t>(std::llround(p.row), 0, labels.height() - 1);
    const auto c = std::clamp<std::int64_t>(std::llround(p.col), 0, labels.width() - 1);
    const auto l = labels.at(r, c);
    if (l > 0 && static_cast<std::size_t>(l) <= n_regions)
      ++out.counts[static_cast<std::size_t>(l) - 1];
    else
      ++out.orphans;
  }
  return out;
}

void apply_acini_counts(std::span<TdluRegion> regions, std::span<const std::int64_t> counts,
                        const CalibrationModel& cal) {
  require(regions.size() == counts.size(), "one acini count per region required");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    regions[i].acini_count_raw = counts[i];
    regions[i].acini_count_calibrated = cal.apply(static_cast<double>(counts[i]));
  }
}

double adjusted_tissue_area(std::int64_t tissue_px, double adipose_fraction, const RasterMeta& meta) {
  require(adipose_fraction >= 0.0 && adipose_fraction <= 1.0, "adipose fraction must be in [0,1]");
  return static_cast<double>(tissue_px) * meta.pixel_area_mm2() * (1.0 - adipose_fraction);
}

void InvolutionReport::add_flag(std::string flag) {
  auto it = std::lower_bound(flags.begin(), flags.end(), flag);
  if (it == flags.end() || *it != flag) flags.insert(it, std::move(flag));
}

bool InvolutionReport::has_flag(std::string_view flag) const {
  return std::binary_search(flags.begin(), flags.end(), flag, std::less<>{});
}

InvolutionReport compute_report(std::span<const TdluRegion> regions, std::span<const std::int64_t> counts,
                                std::int64_t orphans, const AreaSummary& area, const CalibrationModel& cal,
                                const ReportOptions& options) {
  cal.validate();
  require(regions.size() == counts.size(), "one acini count per region required");
  require(orphans >= 0, "orphan count must be >= 0");
  if (!(area.adjusted_area_mm2 > 0.0)) fail(ErrorCode::ZeroAdjustedArea, "adjusted tissue area is zero");

  InvolutionReport rep;
  rep.n_tdlus = static_cast<std::int64_t>(regions.size());
  std::int64_t assigned = 0;
  for (auto c : counts) assigned += c;
  rep.n_acini = assigned + orphans;
  rep.tissue_area_mm2 = area.tissue_area_mm2;
  rep.adipose_fraction = area.adipose_fraction;
  rep.adjusted_area_mm2 = area.adjusted_area_mm2;
  rep.tdlu_per_mm2 = static_cast<double>(rep.n_tdlus) / area.adjusted_area_mm2;
  rep.acini_per_mm2 = static_cast<double>(rep.n_acini) / area.adjusted_area_mm2;
  rep.provenance.calibration_slope = cal.slope;
  rep.provenance.calibration_intercept = cal.intercept;
  rep.provenance.classify_on_calibrated = options.classify_on_calibrated;

  if (regions.empty()) {
    rep.add_flag(std::string(flags::kNoTdlus));
    return rep;
  }

  std::vector<double> spans, areas, raw, typed;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    spans.push_back(regions[i].span_um);
    areas.push_back(regions[i].area_mm2);
    const auto r = static_cast<double>(counts[i]);
    raw.push_back(r);
    typed.push_back(options.classify_on_calibrated ? cal.apply(r) : r);
  }
  rep.median_span_um = median_of(spans);
  rep.median_tdlu_area_mm2 = median_of(areas);
  rep.median_acini_raw = median_of(raw);
  rep.median_acini_per_tdlu = cal.apply(*rep.median_acini_raw);

  std::vector<RussoType> types;
  types.reserve(typed.size());
  for (double t : typed) types.push_back(russo_type_of(t));
  rep.russo_predominant = classify_russo(typed);
  rep.baer = classify_baer(types);
  return rep;
}

InvolutionReport compute_report(std::span<const TdluRegion> regions, std::span<const std::int64_t> counts,
                                std::int64_t orphans, const TissueContext& ctx, const CalibrationModel& cal,
                                const ReportOptions& options) {
  return compute_report(regions, counts, orphans, AreaSummary::from(ctx), cal, options);
}

}  // namespace involukit
