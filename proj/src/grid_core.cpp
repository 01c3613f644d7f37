#include "involukit/grid_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace involukit {

namespace {

__extension__ typedef __int128 int128;

std::int64_t sum_squares_upto(std::int64_t m) { return m * (m + 1) * (2 * m + 1) / 6; }

struct UnionFind {
  std::vector<std::int32_t> parent;

  std::int32_t make() {
    parent.push_back(static_cast<std::int32_t>(parent.size()));
    return parent.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  std::int32_t unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (a < b) std::swap(a, b);
    parent[a] = b;
    return b;
  }
};

double central(std::int64_t n, std::int64_t s_xy, std::int64_t s_x, std::int64_t s_y) {
  const int128 num = static_cast<int128>(n) * s_xy - static_cast<int128>(s_x) * s_y;
  const int128 den = static_cast<int128>(n) * n;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void MomentSums::add_run(std::int64_t r, std::int64_t c0, std::int64_t c1) {
  const std::int64_t n = c1 - c0;
  if (n <= 0) return;
  const std::int64_t sc = (c0 + c1 - 1) * n / 2;
  area += n;
  sum_r += r * n;
  sum_c += sc;
  sum_rr += r * r * n;
  sum_cc += sum_squares_upto(c1 - 1) - sum_squares_upto(c0 - 1);
  sum_rc += r * sc;
}

MomentSums& MomentSums::operator+=(const MomentSums& o) {
  area += o.area;
  sum_r += o.sum_r;
  sum_c += o.sum_c;
  sum_rr += o.sum_rr;
  sum_cc += o.sum_cc;
  sum_rc += o.sum_rc;
  return *this;
}

RegionStats stats_from_moments(std::int32_t label, const MomentSums& m) {
  RegionStats s;
  s.label = label;
  s.area_px = m.area;
  if (m.area == 0) return s;
  const double n = static_cast<double>(m.area);
  s.centroid = {static_cast<double>(m.sum_r) / n, static_cast<double>(m.sum_c) / n};
  const double rr = central(m.area, m.sum_rr, m.sum_r, m.sum_r) + 1.0 / 12.0;
  const double cc = central(m.area, m.sum_cc, m.sum_c, m.sum_c) + 1.0 / 12.0;
  const double rc = central(m.area, m.sum_rc, m.sum_r, m.sum_c);
  s.cov = {rr, rc, cc};
  const double mean = 0.5 * (rr + cc);
  const double half_diff = 0.5 * (rr - cc);
  const double disc = std::sqrt(half_diff * half_diff + rc * rc);
  const double l1 = mean + disc;
  const double l2 = std::max(0.0, mean - disc);
  s.major_axis_px = 4.0 * std::sqrt(l1);
  s.minor_axis_px = 4.0 * std::sqrt(l2);
  return s;
}

int otsu_cut(const kernels::Histogram256& hist) {
  std::uint64_t total = 0;
  int populated = 0;
  double weighted_total = 0.0;
  for (int b = 0; b < 256; ++b) {
    total += hist[b];
    populated += hist[b] > 0;
    weighted_total += static_cast<double>(b) * static_cast<double>(hist[b]);
  }
  if (populated < 2) fail(ErrorCode::DegenerateHistogram, "all values fall in a single histogram bin");

  const double n = static_cast<double>(total);
  const double mean_total = weighted_total / n;
  double w0 = 0.0;
  double mu_cum = 0.0;
  double best = -1.0;
  int best_cut = 0;
  for (int k = 0; k < 255; ++k) {
    w0 += static_cast<double>(hist[k]) / n;
    mu_cum += static_cast<double>(k) * static_cast<double>(hist[k]) / n;
    const double w1 = 1.0 - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double d = mean_total * w0 - mu_cum;
    const double between = d * d / (w0 * w1);
    if (between > best) {
      best = between;
      best_cut = k;
    }
  }
  return best_cut;
}

float otsu_threshold(const PredictionMap& map) {
  return otsu_threshold_from_cut(otsu_cut(kernels::omp::histogram256(map.values())));
}

LabelMap connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const std::int64_t w = mask.width();
  const std::int64_t h = mask.height();
  std::vector<std::int32_t> labels(static_cast<std::size_t>(w * h), 0);
  UnionFind uf;
  uf.make();  // 0 = background
  const bool eight = connectivity == Connectivity::Eight;

  for (std::int64_t r = 0; r < h; ++r) {
    const auto row = mask.row(r);
    std::int32_t* lrow = labels.data() + r * w;
    const std::int32_t* prev = r > 0 ? lrow - w : nullptr;
    for (std::int64_t c = 0; c < w; ++c) {
      if (!row[c]) continue;
      std::int32_t found = 0;
      auto visit = [&](std::int32_t l) {
        if (l == 0) return;
        found = found == 0 ? uf.find(l) : uf.unite(found, l);
      };
      if (c > 0) visit(lrow[c - 1]);
      if (prev) {
        visit(prev[c]);
        if (eight) {
          if (c > 0) visit(prev[c - 1]);
          if (c + 1 < w) visit(prev[c + 1]);
        }
      }
      lrow[c] = found != 0 ? found : uf.make();
    }
  }

  std::vector<std::int32_t> dense(uf.parent.size(), 0);
  std::int32_t next = 0;
  for (auto& l : labels) {
    if (l == 0) continue;
    const std::int32_t root = uf.find(l);
    if (dense[root] == 0) dense[root] = ++next;
    l = dense[root];
  }
  return LabelMap(mask.meta(), std::move(labels), next);
}

BinaryMask area_open(const BinaryMask& mask, std::int64_t min_area_px, Connectivity connectivity) {
  require(min_area_px >= 1, "min_area_px must be >= 1");
  const LabelMap labels = connected_components(mask, connectivity);
  std::vector<std::int64_t> area(static_cast<std::size_t>(labels.component_count()) + 1, 0);
  for (auto l : labels.values()) ++area[l];
  BinaryMask out(mask.meta(), std::uint8_t{0});
  auto dst = out.values();
  auto src = labels.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != 0 && area[src[i]] >= min_area_px;
  return out;
}

std::vector<std::uint8_t> replicated_window(const BinaryMask& mask, const Rect& rect) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(rect.area()));
  const std::int64_t w = mask.width();
  const std::int64_t h = mask.height();
  for (std::int64_t r = 0; r < rect.rows; ++r) {
    const std::int64_t sr = std::clamp<std::int64_t>(rect.row0 + r, 0, h - 1);
    const auto src = mask.row(sr);
    std::uint8_t* dst = out.data() + r * rect.cols;
    for (std::int64_t c = 0; c < rect.cols; ++c) dst[c] = src[std::clamp<std::int64_t>(rect.col0 + c, 0, w - 1)] != 0;
  }
  return out;
}

BinaryMask median_filter_binary(const BinaryMask& mask, int kernel) {
  require(kernel >= 1 && kernel % 2 == 1, "median kernel must be odd and >= 1");
  const int half = kernel / 2;
  const Rect padded{-half, -half, mask.height() + 2 * half, mask.width() + 2 * half};
  const auto window = replicated_window(mask, padded);
  BinaryMask out(mask.meta(), std::uint8_t{0});
  kernels::omp::box_majority(window, mask.height(), mask.width(), kernel, out.values());
  return out;
}

BinaryMask fill_holes(const BinaryMask& mask, std::int64_t max_hole_px) {
  const std::int64_t w = mask.width();
  const std::int64_t h = mask.height();
  BinaryMask inverse(mask.meta(), std::uint8_t{0});
  {
    auto src = mask.values();
    auto dst = inverse.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == 0;
  }
  const LabelMap bg = connected_components(inverse, kBackground);
  const auto n = static_cast<std::size_t>(bg.component_count()) + 1;
  std::vector<std::int64_t> area(n, 0);
  std::vector<std::uint8_t> border(n, 0);
  for (std::int64_t r = 0; r < h; ++r) {
    const auto row = bg.row(r);
    for (std::int64_t c = 0; c < w; ++c) {
      const auto l = row[c];
      if (l == 0) continue;
      ++area[l];
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) border[l] = 1;
    }
  }
  BinaryMask out = mask;
  auto dst = out.values();
  auto lab = bg.values();
  for (std::size_t i = 0; i < lab.size(); ++i) {
    const auto l = lab[i];
    if (l != 0 && !border[l] && area[l] < max_hole_px) dst[i] = 1;
  }
  return out;
}

std::vector<RegionStats> region_stats(const LabelMap& labels) {
  std::vector<MomentSums> sums(static_cast<std::size_t>(labels.component_count()) + 1);
  for (std::int64_t r = 0; r < labels.height(); ++r) {
    const auto row = labels.row(r);
    for (std::int64_t c = 0; c < labels.width(); ++c)
      if (row[c] != 0) sums[row[c]].add_pixel(r, c);
  }
  std::vector<RegionStats> out;
  out.reserve(static_cast<std::size_t>(labels.component_count()));
  for (std::int32_t l = 1; l <= labels.component_count(); ++l) out.push_back(stats_from_moments(l, sums[l]));
  return out;
}

}  // namespace involukit
