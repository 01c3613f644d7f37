#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "involukit/grid_core.hpp"
#include "involukit/raster.hpp"

namespace involukit {

/// Partition of a raster into tile_size x tile_size blocks in raster order;
/// the last row and column of tiles may be smaller.
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(RasterMeta meta, std::int64_t tile_size);

  const RasterMeta& meta() const { return meta_; }
  std::int64_t tile_size() const { return tile_size_; }
  std::int64_t tiles_x() const { return tiles_x_; }
  std::int64_t tiles_y() const { return tiles_y_; }
  std::int64_t count() const { return tiles_x_ * tiles_y_; }
  Rect tile(std::int64_t index) const;
  Rect tile(std::int64_t ty, std::int64_t tx) const { return tile(ty * tiles_x_ + tx); }
  bool operator==(const TileGrid&) const = default;

 private:
  RasterMeta meta_;
  std::int64_t tile_size_ = 0;
  std::int64_t tiles_x_ = 0;
  std::int64_t tiles_y_ = 0;
};

/// Runs fn(i) for i in [0, n) across OpenMP threads; the exception of the
/// lowest failing index is rethrown after all iterations finish.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

/// Horizontal foreground run [c0, c1) in raster columns.
struct Run {
  std::int32_t c0 = 0;
  std::int32_t c1 = 0;
  bool operator==(const Run&) const = default;
};

/// Run-length encoding of one tile; runs are clipped to the tile and maximal
/// within it.
struct TileRuns {
  std::vector<std::uint32_t> row_start;  // rows + 1 offsets into runs
  std::vector<Run> runs;

  std::span<const Run> row(std::int64_t local_row) const {
    return {runs.data() + row_start[local_row], runs.data() + row_start[local_row + 1]};
  }
  /// Encodes `bits` (window.rows x window.cols, nonzero = set).
  static TileRuns encode(std::span<const std::uint8_t> bits, const Rect& window);
  bool operator==(const TileRuns&) const = default;
};

/// Binary raster stored as per-tile run-length encodings. Memory grows with
/// the number of runs, not the number of pixels.
class TiledMask {
 public:
  TiledMask() = default;
  explicit TiledMask(TileGrid grid);

  /// Builds every tile from fill(tile_index, tile_rect, bits), in parallel.
  static TiledMask build(const TileGrid& grid,
                         const std::function<void(std::int64_t, const Rect&, std::span<std::uint8_t>)>& fill);
  static TiledMask from_mask(const BinaryMask& mask, std::int64_t tile_size);

  const TileGrid& grid() const { return grid_; }
  const RasterMeta& meta() const { return grid_.meta(); }
  const TileRuns& tile(std::int64_t i) const { return tiles_[static_cast<std::size_t>(i)]; }
  TileRuns& tile(std::int64_t i) { return tiles_[static_cast<std::size_t>(i)]; }

  std::int64_t count() const;
  std::int64_t run_count() const;
  bool at(std::int64_t r, std::int64_t c) const;
  /// Fills `out` with the window; pixels outside the raster take the value of
  /// the nearest edge pixel when `replicate`, else 0.
  void read_window(const Rect& window, std::span<std::uint8_t> out, bool replicate) const;
  BinaryMask to_mask() const;

  TiledMask complement() const;
  TiledMask intersect(const TiledMask& other) const;

  bool operator==(const TiledMask&) const = default;

 private:
  TileGrid grid_;
  std::vector<TileRuns> tiles_;
};

/// Global components of a tiled mask.
struct TiledComponents {
  /// labels[tile][run] is the 1-based global label; labels are dense in
  /// order of each component's first pixel in raster order.
  std::vector<std::vector<std::int32_t>> labels;
  std::vector<MomentSums> moments;            // moments[label - 1]
  std::vector<std::uint8_t> touches_border;   // touches_border[label - 1]

  std::int32_t count() const { return static_cast<std::int32_t>(moments.size()); }
  /// 0 for background.
  std::int32_t label_at(const TiledMask& mask, std::int64_t r, std::int64_t c) const;
};

/// Per-tile labelling followed by a union-find over labels adjacent across
/// tile seams (corners included for 8-connectivity).
TiledComponents merge_components_across_tiles(const TiledMask& mask, Connectivity connectivity = kForeground);

/// Global counterparts of area_open, fill_holes and median_filter_binary.
TiledMask tiled_area_open(const TiledMask& mask, std::int64_t min_area_px, Connectivity connectivity = kForeground);
TiledMask tiled_fill_holes(const TiledMask& mask, std::int64_t max_hole_px);
/// Each tile reads a kernel/2 halo from its neighbours.
TiledMask tiled_median_filter(const TiledMask& mask, int kernel);

/// Region statistics in label order.
std::vector<RegionStats> tiled_region_stats(const TiledComponents& components);

/// LabelMap of the components; for tests and small rasters.
LabelMap to_label_map(const TiledMask& mask, const TiledComponents& components);

}  // namespace involukit
