#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "involukit/asap.hpp"
#include "involukit/phantom.hpp"
#include "involukit/pipeline.hpp"

namespace involukit {

/// Settings read from an ini-style file:
///
///   [acini]        nms_radius_px, nms_threshold, target_sigma_px, match_radius_px
///   [tdlu]         min_object_px, median_kernel, max_hole_px
///   [adipose]      threshold, enabled
///   [tissue]       luminance_cutoff, cleanup_px
///   [calibration]  slope, intercept, classify_on_calibrated
///   [tiling]       tile_size_px, halo_px
///   [raster]       microns_per_pixel
///   [report]       fail_on_flags (comma-separated)
///   [phantom]      width, height, microns_per_pixel, n_tdlus ("5-10"),
///                  acini_per_tdlu ("1-3:1,4-20:2"), tdlu_radius_um, acinus_spacing_um,
///                  adipose_blob_fraction, orphan_acini, acinus_sigma_px, gaussian_sigma,
///                  blur_sigma, false_blob_rate, seed, retry_budget
///   [asap_groups]  <group name> = tdlu | adipose | tissue | acini
///
/// Unknown sections or keys are InvalidArgument.
struct ToolConfig {
  PipelineParams pipeline;
  std::optional<double> microns_per_pixel;
  PhantomConfig phantom;
  AsapGroupMap asap_groups;
  /// Report flags that make `run` exit with the degenerate-data status.
  std::set<std::string, std::less<>> fail_on_flags{std::string("degenerate_tdlu_histogram")};
};

ToolConfig parse_config(const std::string& text);
ToolConfig load_config(const std::filesystem::path& path);

CountRange parse_count_range(std::string_view text);
RealRange parse_real_range(std::string_view text);
/// "lo-hi:weight,lo-hi:weight"; a missing weight is 1.
std::vector<WeightedRange> parse_weighted_ranges(std::string_view text);

}  // namespace involukit
