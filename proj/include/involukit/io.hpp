#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "involukit/raster.hpp"

namespace involukit {

// .fmap: one line of JSON {width, height, microns_per_pixel, dtype, order},
// a newline, then the little-endian row-major payload (f32 or u8).

enum class PixelType { F32, U8 };

struct FmapHeader {
  RasterMeta meta;
  PixelType dtype = PixelType::F32;
  std::int64_t payload_offset = 0;
};

FmapHeader read_fmap_header(const std::filesystem::path& path);

void write_fmap(const std::filesystem::path& path, const PredictionMap& map);
void write_fmap(const std::filesystem::path& path, const BinaryMask& mask);

PredictionMap read_fmap_map(const std::filesystem::path& path);
BinaryMask read_fmap_mask(const std::filesystem::path& path);

/// Creates the file up front and accepts windows in any order. Thread-safe
/// for disjoint windows.
class FmapWriter {
 public:
  FmapWriter(const std::filesystem::path& path, const RasterMeta& meta, PixelType dtype);
  ~FmapWriter();
  FmapWriter(const FmapWriter&) = delete;
  FmapWriter& operator=(const FmapWriter&) = delete;

  void write(const Rect& window, std::span<const float> values);
  void write(const Rect& window, std::span<const std::uint8_t> values);
  void close();

 private:
  void write_bytes(const Rect& window, const void* data, std::size_t elem);

  int fd_ = -1;
  RasterMeta meta_;
  PixelType dtype_;
  std::int64_t offset_ = 0;
  std::filesystem::path path_;
};

/// Random-access window reads over a raster of floats in [0,1].
class FloatSource {
 public:
  virtual ~FloatSource() = default;
  virtual const RasterMeta& meta() const = 0;
  /// `window` lies inside the raster; `out` is window.rows x window.cols.
  virtual void read(const Rect& window, std::span<float> out) const = 0;
};

/// Random-access window reads over a 0/1 raster.
class MaskSource {
 public:
  virtual ~MaskSource() = default;
  virtual const RasterMeta& meta() const = 0;
  virtual void read(const Rect& window, std::span<std::uint8_t> out) const = 0;
};

class GridFloatSource final : public FloatSource {
 public:
  explicit GridFloatSource(std::shared_ptr<const PredictionMap> map) : map_(std::move(map)) {}
  const RasterMeta& meta() const override { return map_->meta(); }
  void read(const Rect& window, std::span<float> out) const override;

 private:
  std::shared_ptr<const PredictionMap> map_;
};

class GridMaskSource final : public MaskSource {
 public:
  explicit GridMaskSource(std::shared_ptr<const BinaryMask> mask) : mask_(std::move(mask)) {}
  const RasterMeta& meta() const override { return mask_->meta(); }
  void read(const Rect& window, std::span<std::uint8_t> out) const override;

 private:
  std::shared_ptr<const BinaryMask> mask_;
};

/// Every pixel set.
class FullMaskSource final : public MaskSource {
 public:
  explicit FullMaskSource(RasterMeta meta) : meta_(meta) {}
  const RasterMeta& meta() const override { return meta_; }
  void read(const Rect& window, std::span<std::uint8_t> out) const override;

 private:
  RasterMeta meta_;
};

/// pread-backed; f32 payloads only.
class FmapFloatSource final : public FloatSource {
 public:
  explicit FmapFloatSource(const std::filesystem::path& path);
  ~FmapFloatSource() override;
  const RasterMeta& meta() const override { return header_.meta; }
  void read(const Rect& window, std::span<float> out) const override;

 private:
  FmapHeader header_;
  std::filesystem::path path_;
  int fd_ = -1;
};

/// pread-backed; u8 payloads, any nonzero byte is foreground.
class FmapMaskSource final : public MaskSource {
 public:
  explicit FmapMaskSource(const std::filesystem::path& path);
  ~FmapMaskSource() override;
  const RasterMeta& meta() const override { return header_.meta; }
  void read(const Rect& window, std::span<std::uint8_t> out) const override;

 private:
  FmapHeader header_;
  std::filesystem::path path_;
  int fd_ = -1;
};

struct PngImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  int channels = 0;  // 1 or 3
  std::vector<float> values;  // interleaved, scaled to [0,1]
  /// From the pHYs chunk when it is in meters.
  std::optional<double> microns_per_pixel;
};

/// 8- or 16-bit grayscale or RGB(A); alpha is dropped, palettes expanded.
PngImage read_png(const std::filesystem::path& path);

/// Grayscale PNG as a prediction map. Resolution comes from `mpp` when given,
/// otherwise from the file; neither is InvalidArgument.
PredictionMap png_to_map(const PngImage& png, std::optional<double> mpp);
RgbImage png_to_rgb(const PngImage& png, std::optional<double> mpp);

/// Opens .fmap or .png by extension.
std::unique_ptr<FloatSource> open_float_source(const std::filesystem::path& path, std::optional<double> mpp = {});
std::unique_ptr<MaskSource> open_mask_source(const std::filesystem::path& path, std::optional<double> mpp = {});

}  // namespace involukit
