#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "involukit/acini.hpp"
#include "involukit/adipose.hpp"
#include "involukit/tdlu.hpp"

namespace involukit {

/// Linear map from automated to manual-equivalent acini counts.
struct CalibrationModel {
  double slope = 3.888;
  double intercept = 0.0;
  std::optional<double> intercept_p_value;

  void validate() const;
  double apply(double raw) const { return slope * raw + intercept; }
  bool operator==(const CalibrationModel&) const = default;
};

/// Lobule types by acini per lobule: <12, 12..80, >80.
enum class RussoType { Type1 = 1, Type2 = 2, Type3 = 3 };
enum class BaerCategory { NoType1, PredominantlyType1NoType3, MixedLobules };

RussoType russo_type_of(double acini_count);
/// Most frequent type; ties go to the larger acini total, then the higher type.
RussoType classify_russo(std::span<const double> counts);
BaerCategory classify_baer(std::span<const RussoType> types);

std::string_view to_string(RussoType t);
std::string_view to_string(BaerCategory c);
RussoType parse_russo(std::string_view s);
BaerCategory parse_baer(std::string_view s);

/// Median; even-length input averages the two central order statistics.
double median_of(std::vector<double> values);

struct AciniAssignment {
  std::vector<std::int64_t> counts;  // counts[i] belongs to label i + 1
  std::int64_t orphans = 0;
};

/// An acinus belongs to the region whose label covers its rounded centroid pixel.
AciniAssignment assign_acini(const CentroidSet& acini, const LabelMap& labels, std::size_t n_regions);

/// Writes raw and calibrated counts into the regions.
void apply_acini_counts(std::span<TdluRegion> regions, std::span<const std::int64_t> counts,
                        const CalibrationModel& cal);

/// tissue_px * pixel area * (1 - adipose fraction), in mm^2.
double adjusted_tissue_area(std::int64_t tissue_px, double adipose_fraction, const RasterMeta& meta);

struct AreaSummary {
  double tissue_area_mm2 = 0.0;
  double adipose_fraction = 0.0;
  double adjusted_area_mm2 = 0.0;

  static AreaSummary from(const TissueContext& ctx) {
    return {ctx.tissue_area_mm2, ctx.adipose_fraction, ctx.adjusted_area_mm2};
  }
  bool operator==(const AreaSummary&) const = default;
};

struct ReportOptions {
  /// Type lobules on calibrated counts (true) or raw detector counts.
  bool classify_on_calibrated = true;
};

struct Provenance {
  std::string tool_version;
  std::int64_t width = 0;
  std::int64_t height = 0;
  double microns_per_pixel = 0.0;
  std::optional<double> otsu_threshold;
  double calibration_slope = 0.0;
  double calibration_intercept = 0.0;
  bool classify_on_calibrated = true;

  bool operator==(const Provenance&) const = default;
};

struct InvolutionReport {
  std::string slide_id;
  std::int64_t n_tdlus = 0;
  std::int64_t n_acini = 0;
  double tissue_area_mm2 = 0.0;
  double adipose_fraction = 0.0;
  double adjusted_area_mm2 = 0.0;
  double tdlu_per_mm2 = 0.0;
  std::optional<double> median_span_um;
  std::optional<double> median_acini_per_tdlu;  // calibrated
  std::optional<double> median_acini_raw;
  double acini_per_mm2 = 0.0;
  std::optional<double> median_tdlu_area_mm2;
  std::optional<RussoType> russo_predominant;
  std::optional<BaerCategory> baer;
  std::vector<std::string> flags;  // sorted, unique
  Provenance provenance;

  void add_flag(std::string flag);
  bool has_flag(std::string_view flag) const;
  bool operator==(const InvolutionReport&) const = default;
};

namespace flags {
inline constexpr std::string_view kNoTdlus = "no_tdlus";
inline constexpr std::string_view kDegenerateTdluMap = "degenerate_tdlu_histogram";
inline constexpr std::string_view kNoTissueMask = "tissue_mask_absent";
inline constexpr std::string_view kAdiposeDisabled = "adipose_disabled";
}  // namespace flags

/// Throws ZeroAdjustedArea when area.adjusted_area_mm2 <= 0.
InvolutionReport compute_report(std::span<const TdluRegion> regions, std::span<const std::int64_t> counts,
                                std::int64_t orphans, const AreaSummary& area, const CalibrationModel& cal,
                                const ReportOptions& options = {});

InvolutionReport compute_report(std::span<const TdluRegion> regions, std::span<const std::int64_t> counts,
                                std::int64_t orphans, const TissueContext& ctx, const CalibrationModel& cal,
                                const ReportOptions& options = {});

}  // namespace involukit
