#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "involukit/geometry.hpp"

namespace involukit {

enum class AnnotationClass { Tdlu, Adipose, Tissue, Acini };

std::string_view to_string(AnnotationClass c);
AnnotationClass parse_annotation_class(std::string_view s);

/// Group name -> class. There is no default mapping.
using AsapGroupMap = std::map<std::string, AnnotationClass, std::less<>>;

struct AnnotationSet {
  std::vector<Polygon> tdlus;
  std::vector<Polygon> adipose;
  std::vector<Polygon> tissue;
  /// Dot and point-set coordinates, in document order.
  std::vector<Point> acini;
  /// Groups with no mapping; their annotations were skipped. Sorted, unique.
  std::vector<std::string> unknown_groups;
};

/// Polygon, Rectangle and Spline annotations become polygons of their
/// group's class; Dot and PointSet annotations become acini centroids. X is
/// the column, Y the row, and coordinates follow their Order attribute.
/// Throws MalformedXml for documents that do not parse or lack coordinates.
AnnotationSet import_asap_annotations(const std::string& xml, const AsapGroupMap& groups);

}  // namespace involukit
