#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "involukit/error.hpp"

namespace involukit {

/// Geometry shared by every raster derived from one slide.
struct RasterMeta {
  std::int64_t width = 0;
  std::int64_t height = 0;
  double microns_per_pixel = 0.0;

  std::int64_t pixel_count() const { return width * height; }
  /// Area of one pixel in mm^2.
  double pixel_area_mm2() const { return microns_per_pixel * microns_per_pixel * 1e-6; }

  void validate() const;
  bool operator==(const RasterMeta&) const = default;
};

/// Axis-aligned pixel window, half-open.
struct Rect {
  std::int64_t row0 = 0;
  std::int64_t col0 = 0;
  std::int64_t rows = 0;
  std::int64_t cols = 0;

  std::int64_t row1() const { return row0 + rows; }
  std::int64_t col1() const { return col0 + cols; }
  std::int64_t area() const { return rows * cols; }
  bool empty() const { return rows <= 0 || cols <= 0; }
  bool operator==(const Rect&) const = default;
};

/// Point in pixel coordinates; pixel (r, c) has its center at (r, c).
struct Point {
  double row = 0.0;
  double col = 0.0;
  bool operator==(const Point&) const = default;
};

template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(RasterMeta meta, T fill = T{}) : meta_(meta) {
    meta_.validate();
    data_.assign(static_cast<std::size_t>(meta_.pixel_count()), fill);
  }
  Grid(RasterMeta meta, std::vector<T> data) : meta_(meta), data_(std::move(data)) {
    meta_.validate();
    require(static_cast<std::int64_t>(data_.size()) == meta_.pixel_count(),
            "raster payload size does not match width*height");
  }

  const RasterMeta& meta() const { return meta_; }
  std::int64_t width() const { return meta_.width; }
  std::int64_t height() const { return meta_.height; }

  T& at(std::int64_t r, std::int64_t c) { return data_[static_cast<std::size_t>(r * meta_.width + c)]; }
  const T& at(std::int64_t r, std::int64_t c) const {
    return data_[static_cast<std::size_t>(r * meta_.width + c)];
  }
  std::span<T> row(std::int64_t r) {
    return {data_.data() + r * meta_.width, static_cast<std::size_t>(meta_.width)};
  }
  std::span<const T> row(std::int64_t r) const {
    return {data_.data() + r * meta_.width, static_cast<std::size_t>(meta_.width)};
  }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool operator==(const Grid&) const = default;

 protected:
  RasterMeta meta_;
  std::vector<T> data_;
};

/// Single-channel float raster in [0,1]; the interface to any upstream model.
class PredictionMap : public Grid<float> {
 public:
  using Grid<float>::Grid;
  /// Throws InvalidArgument on NaN/Inf or values outside [0,1].
  void validate() const;
};

class BinaryMask : public Grid<std::uint8_t> {
 public:
  using Grid<std::uint8_t>::Grid;
  std::int64_t count() const;
};

class LabelMap : public Grid<std::int32_t> {
 public:
  LabelMap() = default;
  LabelMap(RasterMeta meta, std::vector<std::int32_t> labels, std::int32_t component_count)
      : Grid<std::int32_t>(meta, std::move(labels)), component_count_(component_count) {}

  std::int32_t component_count() const { return component_count_; }
  bool operator==(const LabelMap&) const = default;

 private:
  std::int32_t component_count_ = 0;
};

/// Interleaved RGB in [0,1].
struct RgbImage {
  RasterMeta meta;
  std::vector<float> rgb;  // 3 * width * height
};

void require_same_geometry(const RasterMeta& a, const RasterMeta& b, const char* what);

}  // namespace involukit
