#include "involukit/asap.hpp"

#include <algorithm>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "involukit/error.hpp"

namespace involukit {

namespace pt = boost::property_tree;

std::string_view to_string(AnnotationClass c) {
  switch (c) {
    case AnnotationClass::Tdlu: return "tdlu";
    case AnnotationClass::Adipose: return "adipose";
    case AnnotationClass::Tissue: return "tissue";
    case AnnotationClass::Acini: return "acini";
  }
  return "unknown";
}

AnnotationClass parse_annotation_class(std::string_view s) {
  for (auto c : {AnnotationClass::Tdlu, AnnotationClass::Adipose, AnnotationClass::Tissue, AnnotationClass::Acini})
    if (s == to_string(c)) return c;
  fail(ErrorCode::InvalidArgument, "unknown annotation class '" + std::string(s) + "'");
}

namespace {

bool is_point_type(const std::string& type) { return type == "Dot" || type == "PointSet"; }

bool is_polygon_type(const std::string& type) {
  return type == "Polygon" || type == "Rectangle" || type == "Spline";
}

std::vector<Point> read_coordinates(const pt::ptree& annotation, const std::string& name) {
  const auto coords = annotation.get_child_optional("Coordinates");
  if (!coords) fail(ErrorCode::MalformedXml, "annotation '" + name + "' has no Coordinates");
  std::vector<std::pair<long long, Point>> ordered;
  for (const auto& [tag, node] : *coords) {
    if (tag != "Coordinate") continue;
    const auto order = node.get_optional<long long>("<xmlattr>.Order");
    const auto x = node.get_optional<double>("<xmlattr>.X");
    const auto y = node.get_optional<double>("<xmlattr>.Y");
    if (!x || !y) fail(ErrorCode::MalformedXml, "annotation '" + name + "' has a coordinate without X/Y");
    ordered.emplace_back(order.value_or(static_cast<long long>(ordered.size())), Point{*y, *x});
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Point> out;
  out.reserve(ordered.size());
  for (const auto& [order, p] : ordered) out.push_back(p);
  return out;
}

}  // namespace

AnnotationSet import_asap_annotations(const std::string& xml, const AsapGroupMap& groups) {
  pt::ptree tree;
  try {
    std::istringstream in(xml);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    fail(ErrorCode::MalformedXml, e.what());
  }
  const auto root = tree.get_child_optional("ASAP_Annotations");
  if (!root) fail(ErrorCode::MalformedXml, "missing ASAP_Annotations root element");

  AnnotationSet set;
  const auto annotations = root->get_child_optional("Annotations");
  if (!annotations) return set;
  for (const auto& [tag, node] : *annotations) {
    if (tag != "Annotation") continue;
    const std::string name = node.get("<xmlattr>.Name", std::string("unnamed"));
    const std::string type = node.get("<xmlattr>.Type", std::string());
    const std::string group = node.get("<xmlattr>.PartOfGroup", std::string("None"));
    if (!is_point_type(type) && !is_polygon_type(type))
      fail(ErrorCode::MalformedXml, "annotation '" + name + "' has unsupported type '" + type + "'");
    std::vector<Point> coords = read_coordinates(node, name);
    const auto it = groups.find(group);
    if (it == groups.end()) {
      set.unknown_groups.push_back(group);
      continue;
    }
    if (is_point_type(type)) {
      set.acini.insert(set.acini.end(), coords.begin(), coords.end());
      continue;
    }
    if (coords.size() < 3) fail(ErrorCode::MalformedXml, "polygon annotation '" + name + "' has fewer than 3 vertices");
    Polygon poly{std::move(coords)};
    switch (it->second) {
      case AnnotationClass::Tdlu: set.tdlus.push_back(std::move(poly)); break;
      case AnnotationClass::Adipose: set.adipose.push_back(std::move(poly)); break;
      case AnnotationClass::Tissue: set.tissue.push_back(std::move(poly)); break;
      case AnnotationClass::Acini:
        fail(ErrorCode::InvalidArgument, "polygon annotation '" + name + "' belongs to an acini group");
    }
  }
  std::sort(set.unknown_groups.begin(), set.unknown_groups.end());
  set.unknown_groups.erase(std::unique(set.unknown_groups.begin(), set.unknown_groups.end()), set.unknown_groups.end());
  return set;
}

}  // namespace involukit
