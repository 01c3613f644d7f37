#include "involukit/config.hpp"

#include <sstream>

#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "involukit/serialize.hpp"

namespace involukit {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T parse_value(const std::string& section, const std::string& key, const std::string& raw) {
  const std::string text = boost::algorithm::trim_copy(raw);
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  } else {
    try {
      return boost::lexical_cast<T>(text);
    } catch (const boost::bad_lexical_cast&) {
    }
  }
  fail(ErrorCode::InvalidArgument, "[" + section + "] " + key + ": cannot parse '" + text + "'");
}

std::vector<std::string> split_list(std::string_view text, const char* seps) {
  std::vector<std::string> parts;
  const std::string s(text);
  boost::algorithm::split(parts, s, [&](char ch) { return std::string_view(seps).find(ch) != std::string_view::npos; });
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

std::pair<std::string, std::string> split_range(std::string_view text) {
  const std::string s = boost::algorithm::trim_copy(std::string(text));
  const auto dash = s.find('-', 1);
  if (dash == std::string::npos) return {s, s};
  return {s.substr(0, dash), s.substr(dash + 1)};
}

class SectionReader {
 public:
  SectionReader(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {
    for (const auto& [key, node] : tree_) {
      if (!node.empty()) fail(ErrorCode::InvalidArgument, "[" + name_ + "] " + key + ": nested values are not allowed");
      pending_.insert(key);
    }
  }

  template <typename T>
  void read(const char* key, T& target) {
    if (const auto v = take(key)) target = parse_value<T>(name_, key, *v);
  }

  template <typename F>
  void read_with(const char* key, F&& parse) {
    if (const auto v = take(key)) {
      try {
        parse(*v);
      } catch (const Error& e) {
        fail(ErrorCode::InvalidArgument, "[" + name_ + "] " + key + ": " + e.what());
      }
    }
  }

  void finish() const {
    if (!pending_.empty()) fail(ErrorCode::InvalidArgument, "[" + name_ + "] unknown key '" + *pending_.begin() + "'");
  }

 private:
  std::optional<std::string> take(const char* key) {
    const auto it = pending_.find(key);
    if (it == pending_.end()) return std::nullopt;
    pending_.erase(it);
    return tree_.get<std::string>(pt::ptree::path_type(key, '\0'));
  }

  std::string name_;
  const pt::ptree& tree_;
  std::set<std::string> pending_;
};

}  // namespace

CountRange parse_count_range(std::string_view text) {
  const auto [lo, hi] = split_range(text);
  CountRange r{parse_value<std::int64_t>("range", "lo", lo), parse_value<std::int64_t>("range", "hi", hi)};
  require(r.lo <= r.hi, "range '" + std::string(text) + "' is empty");
  return r;
}

RealRange parse_real_range(std::string_view text) {
  const auto [lo, hi] = split_range(text);
  RealRange r{parse_value<double>("range", "lo", lo), parse_value<double>("range", "hi", hi)};
  require(r.lo <= r.hi, "range '" + std::string(text) + "' is empty");
  return r;
}

std::vector<WeightedRange> parse_weighted_ranges(std::string_view text) {
  std::vector<WeightedRange> out;
  for (const auto& part : split_list(text, ",")) {
    if (part.empty()) continue;
    const auto colon = part.find(':');
    const CountRange r = parse_count_range(part.substr(0, colon));
    const double w = colon == std::string::npos ? 1.0 : parse_value<double>("range", "weight", part.substr(colon + 1));
    out.push_back({r.lo, r.hi, w});
  }
  require(!out.empty(), "weighted range list is empty");
  return out;
}

ToolConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }

  ToolConfig cfg;
  PipelineParams& p = cfg.pipeline;
  for (const auto& [section, node] : tree) {
    SectionReader s(section, node);
    if (section == "acini") {
      s.read("nms_radius_px", p.acini.nms_radius_px);
      s.read("nms_threshold", p.acini.nms_threshold);
      s.read("target_sigma_px", p.acini.target_sigma_px);
      s.read("match_radius_px", p.acini.match_radius_px);
    } else if (section == "tdlu") {
      s.read("min_object_px", p.tdlu.min_object_px);
      s.read("median_kernel", p.tdlu.median_kernel);
      s.read("max_hole_px", p.tdlu.max_hole_px);
    } else if (section == "adipose") {
      s.read("threshold", p.adipose.threshold);
      s.read("enabled", p.use_adipose);
    } else if (section == "tissue") {
      s.read("luminance_cutoff", p.tissue.luminance_cutoff);
      s.read("cleanup_px", p.tissue.cleanup_px);
    } else if (section == "calibration") {
      s.read("slope", p.calibration.slope);
      s.read("intercept", p.calibration.intercept);
      s.read("classify_on_calibrated", p.report.classify_on_calibrated);
    } else if (section == "tiling") {
      s.read("tile_size_px", p.tiles.tile_size_px);
      s.read("halo_px", p.tiles.halo_px);
    } else if (section == "raster") {
      s.read_with("microns_per_pixel",
                  [&](const std::string& v) { cfg.microns_per_pixel = parse_value<double>(section, "microns_per_pixel", v); });
    } else if (section == "report") {
      s.read_with("fail_on_flags", [&](const std::string& v) {
        cfg.fail_on_flags.clear();
        for (auto& f : split_list(v, ",;"))
          if (!f.empty()) cfg.fail_on_flags.insert(f);
      });
    } else if (section == "phantom") {
      PhantomConfig& ph = cfg.phantom;
      s.read("width", ph.canvas.width);
      s.read("height", ph.canvas.height);
      s.read("microns_per_pixel", ph.canvas.microns_per_pixel);
      s.read_with("n_tdlus", [&](const std::string& v) { ph.n_tdlus = parse_count_range(v); });
      s.read_with("acini_per_tdlu", [&](const std::string& v) { ph.acini_per_tdlu = parse_weighted_ranges(v); });
      s.read_with("tdlu_radius_um", [&](const std::string& v) { ph.tdlu_radius_um = parse_real_range(v); });
      s.read("acinus_spacing_um", ph.acinus_spacing_um);
      s.read_with("adipose_blob_fraction",
                  [&](const std::string& v) { ph.adipose_blob_fraction = parse_real_range(v); });
      s.read_with("orphan_acini", [&](const std::string& v) { ph.orphan_acini = parse_count_range(v); });
      s.read("acinus_sigma_px", ph.acinus_sigma_px);
      s.read("gaussian_sigma", ph.noise.gaussian_sigma);
      s.read("blur_sigma", ph.noise.blur_sigma);
      s.read("false_blob_rate", ph.noise.false_blob_rate);
      s.read("seed", ph.seed);
      s.read("retry_budget", ph.retry_budget);
    } else if (section == "asap_groups") {
      for (const auto& [group, value] : node) {
        s.read_with(group.c_str(), [&](const std::string& v) {
          cfg.asap_groups[group] = parse_annotation_class(boost::algorithm::trim_copy(v));
        });
      }
    } else {
      fail(ErrorCode::InvalidArgument, "unknown config section [" + section + "]");
    }
    s.finish();
  }
  cfg.pipeline.validate();
  cfg.phantom.validate();
  if (cfg.microns_per_pixel)
    require(*cfg.microns_per_pixel > 0.0, "[raster] microns_per_pixel must be positive");
  return cfg;
}

ToolConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

}  // namespace involukit
