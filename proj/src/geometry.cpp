#include "involukit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace involukit {

namespace {

template <typename F>
void for_each_edge(const Polygon& poly, F&& f) {
  const std::size_t n = poly.vertices.size();
  for (std::size_t i = 0; i < n; ++i) f(poly.vertices[i], poly.vertices[(i + 1) % n]);
}

// Crossing of the horizontal line through `y` with edge a-b, half-open in y.
bool crossing(const Point& a, const Point& b, double y, double& x) {
  if ((a.row <= y) == (b.row <= y)) return false;
  x = a.col + (y - a.row) * (b.col - a.col) / (b.row - a.row);
  return true;
}

}  // namespace

BoundingBox bounding_box(const Polygon& poly) {
  require(!poly.vertices.empty(), "polygon has no vertices");
  BoundingBox b{poly.vertices[0].row, poly.vertices[0].row, poly.vertices[0].col, poly.vertices[0].col};
  for (const auto& v : poly.vertices) {
    b.row_min = std::min(b.row_min, v.row);
    b.row_max = std::max(b.row_max, v.row);
    b.col_min = std::min(b.col_min, v.col);
    b.col_max = std::max(b.col_max, v.col);
  }
  return b;
}

double polygon_area(const Polygon& poly) { return polygon_moments(poly).area; }

PolygonMoments polygon_moments(const Polygon& poly) {
  require(poly.vertices.size() >= 3, "polygon needs at least 3 vertices");
  const Point o = poly.vertices[0];
  double a2 = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for_each_edge(poly, [&](const Point& p, const Point& q) {
    const double x0 = p.col - o.col, y0 = p.row - o.row;
    const double x1 = q.col - o.col, y1 = q.row - o.row;
    const double cross = x0 * y1 - x1 * y0;
    a2 += cross;
    sx += (x0 + x1) * cross;
    sy += (y0 + y1) * cross;
    sxx += (x0 * x0 + x0 * x1 + x1 * x1) * cross;
    syy += (y0 * y0 + y0 * y1 + y1 * y1) * cross;
    sxy += (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0) * cross;
  });
  PolygonMoments m;
  const double signed_area = 0.5 * a2;
  if (signed_area == 0.0) return m;
  m.area = std::abs(signed_area);
  const double cx = sx / (6.0 * signed_area);
  const double cy = sy / (6.0 * signed_area);
  m.centroid = {cy + o.row, cx + o.col};
  const double rr = syy / (12.0 * signed_area) - cy * cy;
  const double cc = sxx / (12.0 * signed_area) - cx * cx;
  const double rc = sxy / (24.0 * signed_area) - cx * cy;
  m.cov = {rr, rc, cc};
  const double mean = 0.5 * (rr + cc);
  const double half_diff = 0.5 * (rr - cc);
  const double disc = std::sqrt(half_diff * half_diff + rc * rc);
  m.major_axis = 4.0 * std::sqrt(mean + disc);
  m.minor_axis = 4.0 * std::sqrt(std::max(0.0, mean - disc));
  return m;
}

bool point_in_polygon(const Polygon& poly, const Point& p) {
  bool inside = false;
  for_each_edge(poly, [&](const Point& a, const Point& b) {
    double x = 0.0;
    if (crossing(a, b, p.row, x) && x <= p.col) inside = !inside;
  });
  return inside;
}

double distance_to_boundary(const Polygon& poly, const Point& p) {
  double best = std::numeric_limits<double>::infinity();
  for_each_edge(poly, [&](const Point& a, const Point& b) {
    const double dr = b.row - a.row, dc = b.col - a.col;
    const double len2 = dr * dr + dc * dc;
    double t = len2 > 0.0 ? ((p.row - a.row) * dr + (p.col - a.col) * dc) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::hypot(p.row - (a.row + t * dr), p.col - (a.col + t * dc)));
  });
  return best;
}

void polygon_row_spans(const Polygon& poly, std::int64_t row, std::int64_t col_lo, std::int64_t col_hi,
                       const std::function<void(std::int64_t, std::int64_t)>& emit) {
  thread_local std::vector<double> xs;
  xs.clear();
  const auto y = static_cast<double>(row);
  for_each_edge(poly, [&](const Point& a, const Point& b) {
    double x = 0.0;
    if (crossing(a, b, y, x)) xs.push_back(x);
  });
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    const auto c0 = std::max(col_lo, static_cast<std::int64_t>(std::ceil(xs[i])));
    const auto c1 = std::min(col_hi, static_cast<std::int64_t>(std::ceil(xs[i + 1])));
    if (c0 < c1) emit(c0, c1);
  }
}

BinaryMask rasterize_polygons(const std::vector<Polygon>& polys, const RasterMeta& meta) {
  BinaryMask mask(meta, std::uint8_t{0});
  for (const auto& poly : polys) {
    const auto box = bounding_box(poly);
    const auto r0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(box.row_min)));
    const auto r1 = std::min<std::int64_t>(meta.height - 1, static_cast<std::int64_t>(std::floor(box.row_max)));
    for (std::int64_t r = r0; r <= r1; ++r) {
      auto row = mask.row(r);
      polygon_row_spans(poly, r, 0, meta.width, [&](std::int64_t c0, std::int64_t c1) {
        std::fill(row.begin() + c0, row.begin() + c1, std::uint8_t{1});
      });
    }
  }
  return mask;
}

Polygon star_polygon(const Point& center, double radius, const std::vector<double>& amplitudes,
                     const std::vector<double>& phases, int n_vertices) {
  require(n_vertices >= 3, "polygon needs at least 3 vertices");
  require(amplitudes.size() == phases.size(), "one phase per harmonic");
  Polygon poly;
  poly.vertices.reserve(static_cast<std::size_t>(n_vertices));
  for (int i = 0; i < n_vertices; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n_vertices;
    double scale = 1.0;
    for (std::size_t m = 0; m < amplitudes.size(); ++m)
      scale += amplitudes[m] * std::cos(static_cast<double>(m + 2) * t + phases[m]);
    const double r = radius * scale;
    poly.vertices.push_back({center.row + r * std::sin(t), center.col + r * std::cos(t)});
  }
  return poly;
}

}  // namespace involukit
