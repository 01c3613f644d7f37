#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "involukit/acini.hpp"
#include "involukit/geometry.hpp"
#include "involukit/io.hpp"
#include "involukit/measures.hpp"

namespace involukit {

struct CountRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool operator==(const CountRange&) const = default;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const RealRange&) const = default;
};

/// Integer range drawn with relative weight `weight`.
struct WeightedRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  double weight = 1.0;
  bool operator==(const WeightedRange&) const = default;
};

struct PhantomNoise {
  double gaussian_sigma = 0.05;
  double blur_sigma = 2.0;
  /// Sub-2500-px distractor blobs per mm^2 of canvas, TDLU map only.
  double false_blob_rate = 0.0;
  bool operator==(const PhantomNoise&) const = default;
};

struct PhantomConfig {
  RasterMeta canvas{8192, 8192, 0.16};
  CountRange n_tdlus{5, 10};
  std::vector<WeightedRange> acini_per_tdlu{{1, 3, 1.0}, {4, 20, 2.0}, {22, 40, 1.0}};
  RealRange tdlu_radius_um{30.0, 70.0};
  double acinus_spacing_um = 7.2;
  RealRange adipose_blob_fraction{0.05, 0.25};
  CountRange orphan_acini{0, 3};
  double acinus_sigma_px = 10.0;
  PhantomNoise noise;
  std::uint64_t seed = 1;
  /// Placement attempts per object before PlacementExhausted.
  std::int64_t retry_budget = 4000;

  void validate() const;
  bool operator==(const PhantomConfig&) const = default;
};

struct Scene {
  RasterMeta canvas;
  std::uint64_t seed = 0;
  Polygon tissue;
  std::vector<Polygon> tdlus;
  std::vector<std::vector<Point>> acini;  // acini[i] lie inside tdlus[i]
  std::vector<Point> orphan_acini;
  std::vector<Polygon> adipose;
  std::vector<Polygon> distractors;
  InvolutionReport true_measures;

  /// TDLU lists in order, then orphans.
  CentroidSet all_acini() const;
  bool operator==(const Scene&) const = default;
};

/// Deterministic for a given config. Throws PlacementExhausted when the
/// geometry constraints cannot be met within the retry budget.
Scene generate_scene(const PhantomConfig& cfg, const CalibrationModel& cal = {}, const ReportOptions& options = {});

/// Analytic report for a scene: polygon areas and moments, exact counts.
InvolutionReport analytic_measures(const Scene& scene, const CalibrationModel& cal = {},
                                   const ReportOptions& options = {});

enum class PhantomLayer { Acini, Tdlu, Adipose };

/// Renders any window of a scene's maps. A window matches the same window
/// cut from a full-raster render bit for bit.
class PhantomRenderer {
 public:
  PhantomRenderer(Scene scene, PhantomConfig cfg);

  const Scene& scene() const { return scene_; }
  const RasterMeta& meta() const { return scene_.canvas; }
  void render(PhantomLayer layer, const Rect& window, std::span<float> out) const;
  void render_tissue(const Rect& window, std::span<std::uint8_t> out) const;
  /// Rasterized TDLU polygons without blur or noise.
  void render_truth_tdlu(const Rect& window, std::span<std::uint8_t> out) const;

 private:
  Scene scene_;
  PhantomConfig cfg_;
  std::vector<Polygon> tdlu_layer_;
  std::vector<BoundingBox> tdlu_boxes_;
  std::vector<BoundingBox> adipose_boxes_;
  std::vector<BoundingBox> tissue_box_;
  std::vector<BoundingBox> truth_boxes_;
  std::vector<Point> acini_points_;
};

struct PhantomMaps {
  PredictionMap acini_map;
  PredictionMap tdlu_map;
  PredictionMap adipose_map;
  BinaryMask tissue_mask;
};

PhantomMaps render_prediction_maps(const Scene& scene, const PhantomConfig& cfg);

class PhantomFloatSource final : public FloatSource {
 public:
  PhantomFloatSource(std::shared_ptr<const PhantomRenderer> renderer, PhantomLayer layer)
      : renderer_(std::move(renderer)), layer_(layer) {}
  const RasterMeta& meta() const override { return renderer_->meta(); }
  void read(const Rect& window, std::span<float> out) const override { renderer_->render(layer_, window, out); }

 private:
  std::shared_ptr<const PhantomRenderer> renderer_;
  PhantomLayer layer_;
};

class PhantomTissueSource final : public MaskSource {
 public:
  explicit PhantomTissueSource(std::shared_ptr<const PhantomRenderer> renderer) : renderer_(std::move(renderer)) {}
  const RasterMeta& meta() const override { return renderer_->meta(); }
  void read(const Rect& window, std::span<std::uint8_t> out) const override { renderer_->render_tissue(window, out); }

 private:
  std::shared_ptr<const PhantomRenderer> renderer_;
};

/// Writes the maps, tissue mask and truth TDLU mask as .fmap files in
/// horizontal bands of `band_rows` rows, so memory stays O(width * band_rows).
void write_phantom_maps(const PhantomRenderer& renderer, const std::filesystem::path& dir,
                        std::int64_t band_rows = 256);

}  // namespace involukit
