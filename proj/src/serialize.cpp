#include "involukit/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/tokenizer.hpp>

namespace involukit {

namespace {

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::optional<double> optional_double(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

template <typename F>
auto parse_guard(const char* what, F&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::UnreadableInput, std::string(what) + ": " + e.what());
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

Json point_json(const Point& p) { return Json::array({p.row, p.col}); }

Point point_from_json(const Json& j) {
  require(j.is_array() && j.size() == 2, "a point is a [row, col] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json points_json(std::span<const Point> points) {
  Json arr = Json::array();
  for (const auto& p : points) arr.push_back(point_json(p));
  return arr;
}

std::vector<Point> points_from_json(const Json& j) {
  std::vector<Point> out;
  for (const auto& p : j) out.push_back(point_from_json(p));
  return out;
}

Json polygons_json(std::span<const Polygon> polys) {
  Json arr = Json::array();
  for (const auto& p : polys) arr.push_back(to_json(p));
  return arr;
}

std::vector<Polygon> polygons_from_json(const Json& j) {
  std::vector<Polygon> out;
  for (const auto& p : j) out.push_back(polygon_from_json(p));
  return out;
}

}  // namespace

Json to_json(const RasterMeta& meta) {
  return {{"width", meta.width}, {"height", meta.height}, {"microns_per_pixel", meta.microns_per_pixel}};
}

RasterMeta meta_from_json(const Json& j) {
  return parse_guard("raster meta", [&] {
    RasterMeta m{j.at("width").get<std::int64_t>(), j.at("height").get<std::int64_t>(),
                 j.at("microns_per_pixel").get<double>()};
    m.validate();
    return m;
  });
}

Json to_json(const InvolutionReport& r) {
  Json flags = Json::array();
  for (const auto& f : r.flags) flags.push_back(f);
  const Provenance& p = r.provenance;
  Json prov{{"tool_version", p.tool_version},
            {"width", p.width},
            {"height", p.height},
            {"microns_per_pixel", p.microns_per_pixel},
            {"otsu_threshold", optional_json(p.otsu_threshold)},
            {"calibration_slope", p.calibration_slope},
            {"calibration_intercept", p.calibration_intercept},
            {"classify_on_calibrated", p.classify_on_calibrated}};
  return {{"slide_id", r.slide_id},
          {"n_tdlus", r.n_tdlus},
          {"n_acini", r.n_acini},
          {"tissue_area_mm2", r.tissue_area_mm2},
          {"adipose_fraction", r.adipose_fraction},
          {"adjusted_area_mm2", r.adjusted_area_mm2},
          {"tdlu_per_mm2", r.tdlu_per_mm2},
          {"median_span_um", optional_json(r.median_span_um)},
          {"median_acini_per_tdlu", optional_json(r.median_acini_per_tdlu)},
          {"median_acini_raw", optional_json(r.median_acini_raw)},
          {"acini_per_mm2", r.acini_per_mm2},
          {"median_tdlu_area_mm2", optional_json(r.median_tdlu_area_mm2)},
          {"russo", r.russo_predominant ? Json(std::string(to_string(*r.russo_predominant))) : Json(nullptr)},
          {"baer", r.baer ? Json(std::string(to_string(*r.baer))) : Json(nullptr)},
          {"flags", flags},
          {"provenance", prov}};
}

InvolutionReport report_from_json(const Json& j) {
  return parse_guard("report", [&] {
    InvolutionReport r;
    r.slide_id = j.at("slide_id").get<std::string>();
    r.n_tdlus = j.at("n_tdlus").get<std::int64_t>();
    r.n_acini = j.at("n_acini").get<std::int64_t>();
    r.tissue_area_mm2 = j.at("tissue_area_mm2").get<double>();
    r.adipose_fraction = j.at("adipose_fraction").get<double>();
    r.adjusted_area_mm2 = j.at("adjusted_area_mm2").get<double>();
    r.tdlu_per_mm2 = j.at("tdlu_per_mm2").get<double>();
    r.median_span_um = optional_double(j, "median_span_um");
    r.median_acini_per_tdlu = optional_double(j, "median_acini_per_tdlu");
    r.median_acini_raw = optional_double(j, "median_acini_raw");
    r.acini_per_mm2 = j.at("acini_per_mm2").get<double>();
    r.median_tdlu_area_mm2 = optional_double(j, "median_tdlu_area_mm2");
    if (!j.at("russo").is_null()) r.russo_predominant = parse_russo(j.at("russo").get<std::string>());
    if (!j.at("baer").is_null()) r.baer = parse_baer(j.at("baer").get<std::string>());
    for (const auto& f : j.at("flags")) r.add_flag(f.get<std::string>());
    const Json& p = j.at("provenance");
    r.provenance.tool_version = p.at("tool_version").get<std::string>();
    r.provenance.width = p.at("width").get<std::int64_t>();
    r.provenance.height = p.at("height").get<std::int64_t>();
    r.provenance.microns_per_pixel = p.at("microns_per_pixel").get<double>();
    r.provenance.otsu_threshold = optional_double(p, "otsu_threshold");
    r.provenance.calibration_slope = p.at("calibration_slope").get<double>();
    r.provenance.calibration_intercept = p.at("calibration_intercept").get<double>();
    r.provenance.classify_on_calibrated = p.at("classify_on_calibrated").get<bool>();
    return r;
  });
}

std::string report_csv(std::span<const InvolutionReport> reports) {
  std::string out = kReportCsvHeader;
  out += '\n';
  for (const auto& r : reports) {
    std::string flags;
    for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
    const std::string cells[] = {
        csv_field(r.slide_id),
        std::to_string(r.n_tdlus),
        std::to_string(r.n_acini),
        format_number(r.adjusted_area_mm2),
        format_number(r.tdlu_per_mm2),
        format_optional(r.median_span_um),
        format_optional(r.median_acini_per_tdlu),
        format_number(r.acini_per_mm2),
        format_optional(r.median_tdlu_area_mm2),
        r.russo_predominant ? std::string(to_string(*r.russo_predominant)) : std::string(),
        r.baer ? std::string(to_string(*r.baer)) : std::string(),
        csv_field(flags),
    };
    for (std::size_t i = 0; i < std::size(cells); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }
  return out;
}

Json to_json(const CentroidSet& set) {
  return {{"meta", to_json(set.meta)}, {"points", points_json(set.points)}, {"scores", set.scores}};
}

CentroidSet centroids_from_json(const Json& j) {
  return parse_guard("centroid set", [&] {
    CentroidSet set;
    set.meta = meta_from_json(j.at("meta"));
    set.points = points_from_json(j.at("points"));
    if (j.contains("scores")) set.scores = j.at("scores").get<std::vector<double>>();
    set.validate();
    return set;
  });
}

std::string detections_csv(const CentroidSet& set) {
  std::string out = "row,col,score\n";
  for (std::size_t i = 0; i < set.points.size(); ++i) {
    out += format_number(set.points[i].row) + ',' + format_number(set.points[i].col) + ',';
    if (i < set.scores.size()) out += format_number(set.scores[i]);
    out += '\n';
  }
  return out;
}

Json regions_json(std::span<const TdluRegion> regions) {
  Json arr = Json::array();
  for (const auto& r : regions)
    arr.push_back({{"label", r.stats.label},
                   {"area_mm2", r.area_mm2},
                   {"span_um", r.span_um},
                   {"centroid", point_json(r.stats.centroid)},
                   {"acini_raw", r.acini_count_raw},
                   {"acini_calibrated", r.acini_count_calibrated}});
  return arr;
}

Json to_json(const Polygon& polygon) { return points_json(polygon.vertices); }

Polygon polygon_from_json(const Json& j) {
  require(j.is_array(), "a polygon is an array of [row, col] vertices");
  return Polygon{points_from_json(j)};
}

Json to_json(const Scene& s) {
  Json acini = Json::array();
  for (const auto& list : s.acini) acini.push_back(points_json(list));
  return {{"canvas", to_json(s.canvas)},
          {"seed", s.seed},
          {"tissue", to_json(s.tissue)},
          {"tdlus", polygons_json(s.tdlus)},
          {"acini", acini},
          {"orphan_acini", points_json(s.orphan_acini)},
          {"adipose", polygons_json(s.adipose)},
          {"distractors", polygons_json(s.distractors)},
          {"true_measures", to_json(s.true_measures)}};
}

Scene scene_from_json(const Json& j) {
  return parse_guard("scene", [&] {
    Scene s;
    s.canvas = meta_from_json(j.at("canvas"));
    s.seed = j.at("seed").get<std::uint64_t>();
    s.tissue = polygon_from_json(j.at("tissue"));
    s.tdlus = polygons_from_json(j.at("tdlus"));
    for (const auto& list : j.at("acini")) s.acini.push_back(points_from_json(list));
    s.orphan_acini = points_from_json(j.at("orphan_acini"));
    s.adipose = polygons_from_json(j.at("adipose"));
    s.distractors = polygons_from_json(j.at("distractors"));
    s.true_measures = report_from_json(j.at("true_measures"));
    require(s.acini.size() == s.tdlus.size(), "scene needs one acini list per TDLU");
    return s;
  });
}

Json to_json(const stats::StatResult& r) {
  return {{"method", r.method},
          {"statistic", r.statistic},
          {"p_value", optional_json(r.p_value)},
          {"ci_low", optional_json(r.ci_low)},
          {"ci_high", optional_json(r.ci_high)},
          {"df", optional_json(r.df)}};
}

std::vector<std::optional<double>> CsvTable::column(std::size_t index) const {
  require(index < header.size(), "column index out of range");
  std::vector<std::optional<double>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[index]);
  return out;
}

CsvTable parse_csv_table(const std::string& text) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    try {
      Tokenizer tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
      cells.assign(tok.begin(), tok.end());
    } catch (const boost::escaped_list_error& e) {
      fail(ErrorCode::UnreadableInput, "csv line " + std::to_string(line_no) + ": " + e.what());
    }
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      fail(ErrorCode::UnreadableInput, "csv line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                           " cells, header has " + std::to_string(table.header.size()));
    std::vector<std::optional<double>> row;
    for (auto& cell : cells) {
      const auto first = cell.find_first_not_of(" \t");
      if (first == std::string::npos) {
        row.emplace_back();
        continue;
      }
      const auto last = cell.find_last_not_of(" \t");
      const std::string trimmed = cell.substr(first, last - first + 1);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(trimmed, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != trimmed.size())
        fail(ErrorCode::UnreadableInput, "csv line " + std::to_string(line_no) + ": '" + trimmed + "' is not a number");
      row.emplace_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) fail(ErrorCode::UnreadableInput, "csv has no header row");
  return table;
}

CsvTable read_csv_table(const std::filesystem::path& path) { return parse_csv_table(read_text_file(path)); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::UnreadableInput, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::UnreadableInput, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) fail(ErrorCode::UnreadableInput, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace involukit
