#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "involukit/acini.hpp"
#include "involukit/adipose.hpp"
#include "involukit/io.hpp"
#include "involukit/measures.hpp"
#include "involukit/tdlu.hpp"
#include "involukit/tiled.hpp"

namespace involukit {

struct TileSpec {
  std::int64_t tile_size_px = 4096;
  std::int64_t halo_px = 20;

  /// Smallest halo that covers every local operator of the given parameters.
  static std::int64_t required_halo(const AciniDetectParams& acini, const TdluPostprocParams& tdlu);
  void validate(const AciniDetectParams& acini, const TdluPostprocParams& tdlu) const;
  bool operator==(const TileSpec&) const = default;
};

struct PipelineParams {
  std::string slide_id = "slide";
  AciniDetectParams acini;
  TdluPostprocParams tdlu;
  AdiposeParams adipose;
  TissueMaskParams tissue;
  CalibrationModel calibration;
  ReportOptions report;
  TileSpec tiles;
  /// False: adipose fraction 0, adjusted area = tissue area.
  bool use_adipose = true;

  void validate() const;
};

/// Non-owning; every source shares the TDLU map's geometry. With neither a
/// tissue mask nor an RGB image the whole raster counts as tissue.
struct PipelineInputs {
  const FloatSource* acini_map = nullptr;
  const FloatSource* tdlu_map = nullptr;
  const FloatSource* adipose_map = nullptr;
  const MaskSource* tissue_mask = nullptr;
  const RgbImage* rgb = nullptr;
};

struct PipelineResult {
  InvolutionReport report;
  std::vector<TdluRegion> regions;
  CentroidSet detections;
  /// Region label per detection, 0 for orphans.
  std::vector<std::int32_t> detection_labels;
  TiledMask tdlu_mask;
  TiledMask adipose_mask;  // restricted to tissue
  TiledMask tissue_mask;
  TiledComponents tdlu_components;
};

/// Tiled execution: memory is bounded by the tile buffers plus run-length
/// state, and the result equals run_pipeline_monolithic bit for bit.
PipelineResult run_pipeline(const PipelineInputs& inputs, const PipelineParams& params);

struct ReferenceResult {
  InvolutionReport report;
  std::vector<TdluRegion> regions;
  CentroidSet detections;
  std::vector<std::int32_t> detection_labels;
  BinaryMask tdlu_mask;
  BinaryMask adipose_mask;
  BinaryMask tissue_mask;
  LabelMap labels;
};

/// Whole-raster execution of the same stages with the grid_core operators.
ReferenceResult run_pipeline_monolithic(const PipelineInputs& inputs, const PipelineParams& params);

}  // namespace involukit
