#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "involukit/raster.hpp"

namespace involukit {

struct AciniDetectParams {
  double nms_radius_px = 20.0;
  double nms_threshold = 0.48;
  double target_sigma_px = 10.0;
  double match_radius_px = 20.0;

  void validate() const;
};

struct CentroidSet {
  RasterMeta meta;
  std::vector<Point> points;
  std::vector<double> scores;  // empty, or one per point

  void validate() const;
  bool operator==(const CentroidSet&) const = default;
};

struct DetectionScore {
  std::int64_t true_positives = 0;
  std::int64_t false_positives = 0;
  std::int64_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static DetectionScore from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn);
};

/// Isotropic Gaussian per point (peak 1 at the centroid, cut at 4 sigma),
/// overlapping bumps combined by per-pixel maximum.
PredictionMap render_soft_centroids(const CentroidSet& points, const AciniDetectParams& params,
                                    const RasterMeta& meta);

/// Max-combines the soft-centroid bumps of `points` into a window of a larger
/// raster; `out` is window.rows x window.cols, row-major.
void render_soft_centroids_window(std::span<const Point> points, double sigma, const Rect& window,
                                  std::span<float> out);

/// A pixel that passed the NMS threshold; `index` is row * width + col.
struct PeakCandidate {
  float score = 0.0f;
  std::int64_t index = 0;
};

/// Appends pixels of a window with value >= threshold.
void collect_peak_candidates(std::span<const float> window, const Rect& rect, std::int64_t raster_width,
                             double threshold, std::vector<PeakCandidate>& out);

/// Greedy suppression over candidates gathered anywhere on the raster:
/// descending score (row-major order among equal scores), each accepted peak
/// suppresses every candidate within nms_radius_px (inclusive).
CentroidSet suppress_peaks(std::vector<PeakCandidate> candidates, const RasterMeta& meta,
                           const AciniDetectParams& params);

CentroidSet nms_peaks(const PredictionMap& map, const AciniDetectParams& params);

/// Greedy one-to-one matching by ascending distance over pairs within
/// match_radius_px; ties in distance resolve by (pred index, truth index).
DetectionScore match_detections(const CentroidSet& pred, const CentroidSet& truth, double match_radius_px);

}  // namespace involukit
