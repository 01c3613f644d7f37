#include <doctest.h>

#include <cmath>
#include <random>

#include "involukit/acini.hpp"
#include "support.hpp"

using namespace involukit;
using namespace testsupport;

namespace {

std::vector<Point> spaced_points(std::int64_t h, std::int64_t w, int n, double min_dist, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(5.0, static_cast<double>(h) - 6.0), uc(5.0, static_cast<double>(w) - 6.0);
  std::vector<Point> pts;
  for (int tries = 0; static_cast<int>(pts.size()) < n && tries < 100000; ++tries) {
    const Point p{ur(rng), uc(rng)};
    bool ok = true;
    for (const auto& q : pts) ok = ok && std::hypot(p.row - q.row, p.col - q.col) > min_dist;
    if (ok) pts.push_back(p);
  }
  return pts;
}

/// Bumps of the given peak heights, max-combined.
PredictionMap bumps(std::int64_t h, std::int64_t w, const std::vector<Point>& centers, const std::vector<float>& peaks,
                    double sigma) {
  PredictionMap m(meta_of(h, w), 0.0f);
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      for (std::size_t i = 0; i < centers.size(); ++i) {
        const double d2 = (r - centers[i].row) * (r - centers[i].row) + (c - centers[i].col) * (c - centers[i].col);
        m.at(r, c) = std::max(m.at(r, c), static_cast<float>(peaks[i] * std::exp(-d2 / (2 * sigma * sigma))));
      }
  return m;
}

CentroidSet set_of(const RasterMeta& meta, std::vector<Point> pts) { return CentroidSet{meta, std::move(pts), {}}; }

}  // namespace

TEST_SUITE("acini") {
  TEST_CASE("render then NMS recovers well separated points") {
    const AciniDetectParams params;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto meta = meta_of(300, 400);
      const auto truth = set_of(meta, spaced_points(300, 400, 25, 2 * params.nms_radius_px + 0.5, seed));
      const auto map = render_soft_centroids(truth, params, meta);
      const auto found = nms_peaks(map, params);
      CHECK(found.points.size() == truth.points.size());
      for (const auto& p : truth.points) {
        double best = 1e9;
        for (const auto& q : found.points) best = std::min(best, std::hypot(p.row - q.row, p.col - q.col));
        CHECK(best <= 1.0);
      }
      CHECK(match_detections(found, truth, params.match_radius_px).f1 == 1.0);
    }
  }

  TEST_CASE("NMS suppression and threshold fixtures") {
    const AciniDetectParams params;
    {
      const auto m = bumps(80, 80, {{40, 30}, {40, 45}}, {0.9f, 0.8f}, 3.0);
      const auto found = nms_peaks(m, params);
      REQUIRE(found.points.size() == 1);
      CHECK(found.points[0] == Point{40, 30});
      CHECK(found.scores[0] == doctest::Approx(0.9));
    }
    CHECK(nms_peaks(bumps(60, 60, {{30, 30}}, {0.40f}, 3.0), params).points.empty());

    // A pixel exactly at the threshold is a candidate.
    PredictionMap edge(meta_of(10, 10), 0.0f);
    edge.at(4, 4) = 0.48f;
    CHECK(nms_peaks(edge, params).points.size() == 1);
    edge.at(4, 4) = std::nextafter(0.48f, 0.0f);
    CHECK(nms_peaks(edge, params).points.empty());

    // The radius is inclusive: 20 px apart suppresses, 21 px does not.
    PredictionMap pair(meta_of(10, 40), 0.0f);
    pair.at(5, 5) = 0.9f;
    pair.at(5, 25) = 0.8f;
    CHECK(nms_peaks(pair, params).points.size() == 1);
    pair.at(5, 25) = 0.0f;
    pair.at(5, 26) = 0.8f;
    CHECK(nms_peaks(pair, params).points.size() == 2);
  }

  TEST_CASE("NMS plateau resolves by raster order") {
    PredictionMap m(meta_of(10, 10), 0.0f);
    m.at(3, 7) = 0.7f;
    m.at(3, 8) = 0.7f;
    m.at(4, 2) = 0.7f;
    const auto found = nms_peaks(m, AciniDetectParams{});
    REQUIRE(found.points.size() == 1);
    CHECK(found.points[0] == Point{3, 7});
  }

  TEST_CASE("NMS count is non-increasing in threshold") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int trial = 0; trial < 5; ++trial) {
      PredictionMap m(meta_of(80, 90), 0.0f);
      for (auto& v : m.values()) v = u(rng);
      AciniDetectParams p;
      p.nms_radius_px = 4.0;
      std::size_t prev = SIZE_MAX;
      for (double t : {0.1, 0.3, 0.48, 0.6, 0.8, 0.95}) {
        p.nms_threshold = t;
        const auto n = nms_peaks(m, p).points.size();
        CHECK(n <= prev);
        prev = n;
      }
    }
  }

  TEST_CASE("NMS count is non-increasing in radius on soft-centroid maps") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto meta = meta_of(200, 200);
      AciniDetectParams p;
      const auto truth = set_of(meta, spaced_points(200, 200, 60, 6.0, seed));
      const auto map = render_soft_centroids(truth, p, meta);
      std::size_t prev = SIZE_MAX;
      for (double r : {1.0, 3.0, 8.0, 15.0, 20.0, 30.0, 50.0}) {
        p.nms_radius_px = r;
        const auto n = nms_peaks(map, p).points.size();
        CHECK(n <= prev);
        prev = n;
      }
    }
  }

  TEST_CASE("match_detections symmetry and zero denominators") {
    const auto meta = meta_of(200, 200);
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto a = set_of(meta, spaced_points(200, 200, 30, 3.0, seed));
      const auto b = set_of(meta, spaced_points(200, 200, 25, 3.0, seed + 50));
      const auto ab = match_detections(a, b, 20.0);
      const auto ba = match_detections(b, a, 20.0);
      CHECK(ab.true_positives == ba.true_positives);
      CHECK(ab.false_positives == ba.false_negatives);
      CHECK(ab.false_negatives == ba.false_positives);
      CHECK(ab.f1 == doctest::Approx(ba.f1).epsilon(1e-15));
    }
    const auto empty = set_of(meta, {});
    const auto one = set_of(meta, {{10, 10}});
    CHECK(match_detections(empty, empty, 20.0).f1 == 0.0);
    const auto s = match_detections(empty, one, 20.0);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.false_negatives == 1);
  }

  TEST_CASE("matching is one to one and respects the radius") {
    const auto meta = meta_of(100, 100);
    const auto pred = set_of(meta, {{10, 10}, {10, 12}});
    const auto truth = set_of(meta, {{10, 11}});
    const auto s = match_detections(pred, truth, 20.0);
    CHECK(s.true_positives == 1);
    CHECK(s.false_positives == 1);
    CHECK(match_detections(set_of(meta, {{10, 10}}), set_of(meta, {{10, 31}}), 20.0).true_positives == 0);
    CHECK(match_detections(set_of(meta, {{10, 10}}), set_of(meta, {{10, 30}}), 20.0).true_positives == 1);
  }

  TEST_CASE("rendered window equals the same window of a full render") {
    const AciniDetectParams params;
    const auto meta = meta_of(150, 170);
    const auto pts = set_of(meta, spaced_points(150, 170, 15, 10.0, 9));
    const auto full = render_soft_centroids(pts, params, meta);
    const Rect win{37, 51, 60, 45};
    std::vector<float> out(static_cast<std::size_t>(win.area()));
    render_soft_centroids_window(pts.points, params.target_sigma_px, win, out);
    for (std::int64_t r = 0; r < win.rows; ++r)
      for (std::int64_t c = 0; c < win.cols; ++c) CHECK(out[r * win.cols + c] == full.at(win.row0 + r, win.col0 + c));
  }
}
