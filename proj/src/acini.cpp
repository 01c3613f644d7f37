#include "involukit/acini.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

namespace involukit {

namespace {

// Uniform bucket grid for radius queries over points.
class PointBuckets {
 public:
  explicit PointBuckets(double cell) : cell_(cell) {}

  void insert(const Point& p, std::int32_t id) { buckets_[key(cell_of(p.row), cell_of(p.col))].push_back({p, id}); }

  template <typename Fn>
  void for_each_near(const Point& p, Fn&& fn) const {
    const std::int64_t cr = cell_of(p.row);
    const std::int64_t cc = cell_of(p.col);
    for (std::int64_t dr = -1; dr <= 1; ++dr)
      for (std::int64_t dc = -1; dc <= 1; ++dc) {
        const auto it = buckets_.find(key(cr + dr, cc + dc));
        if (it == buckets_.end()) continue;
        for (const auto& e : it->second) fn(e.p, e.id);
      }
  }

 private:
  struct Entry {
    Point p;
    std::int32_t id;
  };
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::int64_t key(std::int64_t r, std::int64_t c) { return (r << 32) ^ (c & 0xffffffff); }

  double cell_;
  std::unordered_map<std::int64_t, std::vector<Entry>> buckets_;
};

double dist2(const Point& a, const Point& b) {
  const double dr = a.row - b.row;
  const double dc = a.col - b.col;
  return dr * dr + dc * dc;
}

}  // namespace

void AciniDetectParams::validate() const {
  require(nms_radius_px > 0.0, "nms_radius_px must be positive");
  require(nms_threshold > 0.0 && nms_threshold < 1.0, "nms_threshold must be in (0,1)");
  require(target_sigma_px > 0.0, "target_sigma_px must be positive");
  require(match_radius_px > 0.0, "match_radius_px must be positive");
}

void CentroidSet::validate() const {
  require(scores.empty() || scores.size() == points.size(), "scores must be empty or one per point");
  for (const auto& p : points) {
    require(p.row >= -0.5 && p.row < static_cast<double>(meta.height) - 0.5 && p.col >= -0.5 &&
                p.col < static_cast<double>(meta.width) - 0.5,
            "centroid outside raster bounds");
  }
}

DetectionScore DetectionScore::from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  DetectionScore s{tp, fp, fn, 0.0, 0.0, 0.0};
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

void render_soft_centroids_window(std::span<const Point> points, double sigma, const Rect& window,
                                  std::span<float> out) {
  require(static_cast<std::int64_t>(out.size()) == window.area(), "render window size mismatch");
  const double reach = 4.0 * sigma;
  const double reach2 = reach * reach;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (const auto& p : points) {
    const auto r0 = std::max<std::int64_t>(window.row0, static_cast<std::int64_t>(std::ceil(p.row - reach)));
    const auto r1 = std::min<std::int64_t>(window.row1() - 1, static_cast<std::int64_t>(std::floor(p.row + reach)));
    const auto c0 = std::max<std::int64_t>(window.col0, static_cast<std::int64_t>(std::ceil(p.col - reach)));
    const auto c1 = std::min<std::int64_t>(window.col1() - 1, static_cast<std::int64_t>(std::floor(p.col + reach)));
    for (std::int64_t r = r0; r <= r1; ++r) {
      const double dr = static_cast<double>(r) - p.row;
      float* row = out.data() + (r - window.row0) * window.cols - window.col0;
      for (std::int64_t c = c0; c <= c1; ++c) {
        const double dc = static_cast<double>(c) - p.col;
        const double d2 = dr * dr + dc * dc;
        if (d2 > reach2) continue;
        const auto v = static_cast<float>(std::exp(-d2 * inv));
        if (v > row[c]) row[c] = v;
      }
    }
  }
}

PredictionMap render_soft_centroids(const CentroidSet& points, const AciniDetectParams& params,
                                    const RasterMeta& meta) {
  params.validate();
  PredictionMap map(meta, 0.0f);
  render_soft_centroids_window(points.points, params.target_sigma_px, Rect{0, 0, meta.height, meta.width},
                               map.values());
  return map;
}

void collect_peak_candidates(std::span<const float> window, const Rect& rect, std::int64_t raster_width,
                             double threshold, std::vector<PeakCandidate>& out) {
  const auto t = static_cast<float>(threshold);
  for (std::int64_t r = 0; r < rect.rows; ++r) {
    const float* row = window.data() + r * rect.cols;
    const std::int64_t base = (rect.row0 + r) * raster_width + rect.col0;
    for (std::int64_t c = 0; c < rect.cols; ++c)
      if (row[c] >= t) out.push_back({row[c], base + c});
  }
}

CentroidSet suppress_peaks(std::vector<PeakCandidate> candidates, const RasterMeta& meta,
                           const AciniDetectParams& params) {
  params.validate();
  std::sort(candidates.begin(), candidates.end(), [](const PeakCandidate& a, const PeakCandidate& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  });
  const double r2 = params.nms_radius_px * params.nms_radius_px;
  PointBuckets accepted(params.nms_radius_px);
  CentroidSet out{meta, {}, {}};
  for (const auto& cand : candidates) {
    const Point p{static_cast<double>(cand.index / meta.width), static_cast<double>(cand.index % meta.width)};
    bool suppressed = false;
    accepted.for_each_near(p, [&](const Point& q, std::int32_t) { suppressed = suppressed || dist2(p, q) <= r2; });
    if (suppressed) continue;
    accepted.insert(p, static_cast<std::int32_t>(out.points.size()));
    out.points.push_back(p);
    out.scores.push_back(cand.score);
  }
  return out;
}

CentroidSet nms_peaks(const PredictionMap& map, const AciniDetectParams& params) {
  params.validate();
  std::vector<PeakCandidate> candidates;
  collect_peak_candidates(map.values(), Rect{0, 0, map.height(), map.width()}, map.width(), params.nms_threshold,
                          candidates);
  return suppress_peaks(std::move(candidates), map.meta(), params);
}

DetectionScore match_detections(const CentroidSet& pred, const CentroidSet& truth, double match_radius_px) {
  require(match_radius_px > 0.0, "match radius must be positive");
  require_same_geometry(pred.meta, truth.meta, "match_detections");
  PointBuckets truth_buckets(match_radius_px);
  for (std::size_t j = 0; j < truth.points.size(); ++j)
    truth_buckets.insert(truth.points[j], static_cast<std::int32_t>(j));

  const double r2 = match_radius_px * match_radius_px;
  std::vector<std::tuple<double, std::int32_t, std::int32_t>> pairs;
  for (std::size_t i = 0; i < pred.points.size(); ++i) {
    truth_buckets.for_each_near(pred.points[i], [&](const Point& q, std::int32_t j) {
      const double d2 = dist2(pred.points[i], q);
      if (d2 <= r2) pairs.emplace_back(d2, static_cast<std::int32_t>(i), j);
    });
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::uint8_t> pred_used(pred.points.size(), 0);
  std::vector<std::uint8_t> truth_used(truth.points.size(), 0);
  std::int64_t tp = 0;
  for (const auto& [d2, i, j] : pairs) {
    if (pred_used[i] || truth_used[j]) continue;
    pred_used[i] = truth_used[j] = 1;
    ++tp;
  }
  const auto np = static_cast<std::int64_t>(pred.points.size());
  const auto nt = static_cast<std::int64_t>(truth.points.size());
  return DetectionScore::from_counts(tp, np - tp, nt - tp);
}

}  // namespace involukit
