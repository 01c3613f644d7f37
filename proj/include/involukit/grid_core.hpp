#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "involukit/kernels.hpp"
#include "involukit/raster.hpp"

namespace involukit {

enum class Connectivity : int { Four = 4, Eight = 8 };

/// Foreground pixels are 8-connected, background (holes) 4-connected.
inline constexpr Connectivity kForeground = Connectivity::Eight;
inline constexpr Connectivity kBackground = Connectivity::Four;

/// Exact integer moment sums of a pixel set; additive, so per-tile partial
/// sums merge to the same value as a monolithic pass.
struct MomentSums {
  std::int64_t area = 0;
  std::int64_t sum_r = 0;
  std::int64_t sum_c = 0;
  std::int64_t sum_rr = 0;
  std::int64_t sum_cc = 0;
  std::int64_t sum_rc = 0;

  void add_pixel(std::int64_t r, std::int64_t c) {
    ++area;
    sum_r += r;
    sum_c += c;
    sum_rr += r * r;
    sum_cc += c * c;
    sum_rc += r * c;
  }
  /// Adds the horizontal run [c0, c1) of row r in closed form.
  void add_run(std::int64_t r, std::int64_t c0, std::int64_t c1);
  MomentSums& operator+=(const MomentSums& o);
  bool operator==(const MomentSums&) const = default;
};

struct RegionStats {
  std::int32_t label = 0;
  std::int64_t area_px = 0;
  Point centroid;
  /// Central second moments (rr, rc, cc) including the +1/12 unit-square term.
  std::array<double, 3> cov{};
  double major_axis_px = 0.0;
  double minor_axis_px = 0.0;

  bool operator==(const RegionStats&) const = default;
};

/// Converts moment sums to region statistics. Axis lengths are
/// 4*sqrt(eigenvalue), so a solid disk of radius r has major axis 2r.
RegionStats stats_from_moments(std::int32_t label, const MomentSums& m);

/// Between-class-variance maximizing cut on a 256-bin histogram. Returns the
/// last bin of the lower class; the lowest bin wins ties. Throws
/// DegenerateHistogram when fewer than two bins are populated.
int otsu_cut(const kernels::Histogram256& hist);

/// Threshold value for a cut: the upper edge of bin `cut`.
inline float otsu_threshold_from_cut(int cut) { return static_cast<float>(cut + 1) / 256.0f; }

/// Otsu threshold over a 256-bin histogram of [0,1]; foreground is value >= threshold,
/// which is exactly the set of pixels in bins above the cut.
float otsu_threshold(const PredictionMap& map);

/// Labels dense from 1 in order of each component's first pixel in raster order.
LabelMap connected_components(const BinaryMask& mask, Connectivity connectivity = kForeground);

/// Removes components with fewer than `min_area_px` pixels.
BinaryMask area_open(const BinaryMask& mask, std::int64_t min_area_px, Connectivity connectivity = kForeground);

/// Majority filter over a kernel x kernel window, edge-replicated borders.
BinaryMask median_filter_binary(const BinaryMask& mask, int kernel);

/// Fills background components that do not touch the raster border and have
/// fewer than `max_hole_px` pixels.
BinaryMask fill_holes(const BinaryMask& mask, std::int64_t max_hole_px);

std::vector<RegionStats> region_stats(const LabelMap& labels);

/// Edge-replicated window of `mask`: the rect may extend past the raster.
std::vector<std::uint8_t> replicated_window(const BinaryMask& mask, const Rect& rect);

}  // namespace involukit
