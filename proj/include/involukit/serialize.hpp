#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "involukit/acini.hpp"
#include "involukit/measures.hpp"
#include "involukit/phantom.hpp"
#include "involukit/stats.hpp"
#include "involukit/tdlu.hpp"

namespace involukit {

using Json = nlohmann::ordered_json;

Json to_json(const RasterMeta& meta);
RasterMeta meta_from_json(const Json& j);

/// Doubles keep full round-trip precision; absent medians are null.
Json to_json(const InvolutionReport& report);
InvolutionReport report_from_json(const Json& j);

inline constexpr const char* kReportCsvHeader =
    "slide_id,n_tdlus,n_acini,adjusted_area_mm2,tdlu_per_mm2,median_span_um,median_acini_per_tdlu,"
    "acini_per_mm2,median_tdlu_area_mm2,russo,baer,flags";

/// Header plus one row per report; numbers with 6 significant digits, null
/// values as empty cells, flags joined with ';'.
std::string report_csv(std::span<const InvolutionReport> reports);

Json to_json(const CentroidSet& set);
CentroidSet centroids_from_json(const Json& j);
/// row,col,score
std::string detections_csv(const CentroidSet& set);

Json regions_json(std::span<const TdluRegion> regions);

Json to_json(const Polygon& polygon);
Polygon polygon_from_json(const Json& j);
Json to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

Json to_json(const stats::StatResult& result);

/// Comma-separated table with a header row. Empty cells are nullopt.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;

  std::vector<std::optional<double>> column(std::size_t index) const;
};

CsvTable parse_csv_table(const std::string& text);
CsvTable read_csv_table(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace involukit
