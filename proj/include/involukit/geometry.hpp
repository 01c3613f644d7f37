#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "involukit/grid_core.hpp"
#include "involukit/raster.hpp"

namespace involukit {

/// Simple polygon in pixel coordinates (row, col); closed implicitly.
struct Polygon {
  std::vector<Point> vertices;

  bool operator==(const Polygon&) const = default;
};

struct BoundingBox {
  double row_min = 0.0;
  double row_max = 0.0;
  double col_min = 0.0;
  double col_max = 0.0;
};

BoundingBox bounding_box(const Polygon& poly);

/// Unsigned shoelace area.
double polygon_area(const Polygon& poly);

/// Area, centroid and central second moments of the filled polygon,
/// reported in the same shape as pixel-region statistics.
struct PolygonMoments {
  double area = 0.0;
  Point centroid;
  std::array<double, 3> cov{};  // rr, rc, cc per unit area
  double major_axis = 0.0;
  double minor_axis = 0.0;
};

PolygonMoments polygon_moments(const Polygon& poly);

/// Even-odd rule.
bool point_in_polygon(const Polygon& poly, const Point& p);

/// Euclidean distance from p to the nearest polygon edge.
double distance_to_boundary(const Polygon& poly, const Point& p);

/// Column spans [c0, c1) of row `row` whose pixel centers lie inside the
/// polygon, clipped to [col_lo, col_hi). Spans arrive left to right.
void polygon_row_spans(const Polygon& poly, std::int64_t row, std::int64_t col_lo, std::int64_t col_hi,
                       const std::function<void(std::int64_t, std::int64_t)>& emit);

/// Pixel-center rasterization into a fresh mask.
BinaryMask rasterize_polygons(const std::vector<Polygon>& polys, const RasterMeta& meta);

/// Star-shaped outline r(t) = radius * (1 + sum a_m cos(m t + phase_m)),
/// harmonics m = 2, 3, ... in order.
Polygon star_polygon(const Point& center, double radius, const std::vector<double>& amplitudes,
                     const std::vector<double>& phases, int n_vertices = 64);

}  // namespace involukit
