#include "involukit/io.hpp"

#include <fcntl.h>
#include <png.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <csetjmp>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace involukit {

static_assert(std::endian::native == std::endian::little, ".fmap payloads are read in host byte order");

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void unreadable(const std::filesystem::path& path, const std::string& why) {
  fail(ErrorCode::UnreadableInput, path.string() + ": " + why);
}

std::string_view dtype_name(PixelType t) { return t == PixelType::F32 ? "f32" : "u8"; }
std::size_t dtype_size(PixelType t) { return t == PixelType::F32 ? 4 : 1; }

std::string header_line(const RasterMeta& meta, PixelType dtype) {
  ordered_json j;
  j["width"] = meta.width;
  j["height"] = meta.height;
  j["microns_per_pixel"] = meta.microns_per_pixel;
  j["dtype"] = dtype_name(dtype);
  j["order"] = "row-major";
  return j.dump() + "\n";
}

void pread_all(int fd, void* buf, std::size_t n, std::int64_t offset, const std::filesystem::path& path) {
  auto* p = static_cast<char*>(buf);
  while (n > 0) {
    const ssize_t got = ::pread(fd, p, n, offset);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) unreadable(path, got == 0 ? "unexpected end of file" : std::strerror(errno));
    p += got;
    n -= static_cast<std::size_t>(got);
    offset += got;
  }
}

void pwrite_all(int fd, const void* buf, std::size_t n, std::int64_t offset, const std::filesystem::path& path) {
  const auto* p = static_cast<const char*>(buf);
  while (n > 0) {
    const ssize_t put = ::pwrite(fd, p, n, offset);
    if (put < 0 && errno == EINTR) continue;
    if (put <= 0) fail(ErrorCode::InvalidArgument, path.string() + ": write failed: " + std::strerror(errno));
    p += put;
    n -= static_cast<std::size_t>(put);
    offset += put;
  }
}

int open_read(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) unreadable(path, std::strerror(errno));
  return fd;
}

void require_inside(const Rect& window, const RasterMeta& meta) {
  require(window.row0 >= 0 && window.col0 >= 0 && window.row1() <= meta.height && window.col1() <= meta.width &&
              !window.empty(),
          "window outside the raster");
}

template <typename T>
void read_window(int fd, const FmapHeader& h, const Rect& window, std::span<T> out,
                 const std::filesystem::path& path) {
  require_inside(window, h.meta);
  require(static_cast<std::int64_t>(out.size()) == window.area(), "window buffer size mismatch");
  if (window.col0 == 0 && window.cols == h.meta.width) {
    pread_all(fd, out.data(), out.size() * sizeof(T),
              h.payload_offset + window.row0 * h.meta.width * static_cast<std::int64_t>(sizeof(T)), path);
    return;
  }
  for (std::int64_t r = 0; r < window.rows; ++r) {
    const std::int64_t offset =
        h.payload_offset + ((window.row0 + r) * h.meta.width + window.col0) * static_cast<std::int64_t>(sizeof(T));
    pread_all(fd, out.data() + r * window.cols, static_cast<std::size_t>(window.cols) * sizeof(T), offset, path);
  }
}

void check_unit_interval(std::span<const float> v, const std::filesystem::path& path) {
  for (float x : v)
    if (!(x >= 0.0f && x <= 1.0f)) fail(ErrorCode::InvalidArgument, path.string() + ": value outside [0,1]");
}

}  // namespace

FmapHeader read_fmap_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) unreadable(path, "cannot open");
  std::string line;
  if (!std::getline(in, line)) unreadable(path, "missing header line");
  FmapHeader h;
  try {
    const auto j = nlohmann::json::parse(line);
    h.meta.width = j.at("width").get<std::int64_t>();
    h.meta.height = j.at("height").get<std::int64_t>();
    h.meta.microns_per_pixel = j.at("microns_per_pixel").get<double>();
    const auto dtype = j.at("dtype").get<std::string>();
    if (dtype == "f32")
      h.dtype = PixelType::F32;
    else if (dtype == "u8")
      h.dtype = PixelType::U8;
    else
      unreadable(path, "unknown dtype '" + dtype + "'");
    if (j.value("order", std::string("row-major")) != "row-major") unreadable(path, "only row-major order is supported");
  } catch (const nlohmann::json::exception& e) {
    unreadable(path, std::string("bad header: ") + e.what());
  }
  try {
    h.meta.validate();
  } catch (const Error& e) {
    unreadable(path, e.what());
  }
  h.payload_offset = static_cast<std::int64_t>(line.size()) + 1;
  const auto expected = h.payload_offset + h.meta.pixel_count() * static_cast<std::int64_t>(dtype_size(h.dtype));
  if (static_cast<std::int64_t>(std::filesystem::file_size(path)) != expected)
    unreadable(path, "payload size does not match the header");
  return h;
}

FmapWriter::FmapWriter(const std::filesystem::path& path, const RasterMeta& meta, PixelType dtype)
    : meta_(meta), dtype_(dtype), path_(path) {
  meta_.validate();
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(ErrorCode::InvalidArgument, path.string() + ": " + std::strerror(errno));
  const std::string header = header_line(meta, dtype);
  pwrite_all(fd_, header.data(), header.size(), 0, path_);
  offset_ = static_cast<std::int64_t>(header.size());
  const auto total = offset_ + meta.pixel_count() * static_cast<std::int64_t>(dtype_size(dtype));
  if (::ftruncate(fd_, total) != 0) fail(ErrorCode::InvalidArgument, path.string() + ": " + std::strerror(errno));
}

FmapWriter::~FmapWriter() {
  if (fd_ >= 0) ::close(fd_);
}

void FmapWriter::close() {
  if (fd_ >= 0 && ::close(fd_) != 0) {
    fd_ = -1;
    fail(ErrorCode::InvalidArgument, path_.string() + ": close failed");
  }
  fd_ = -1;
}

void FmapWriter::write_bytes(const Rect& window, const void* data, std::size_t elem) {
  require_inside(window, meta_);
  require(fd_ >= 0, "writer is closed");
  const auto* bytes = static_cast<const char*>(data);
  for (std::int64_t r = 0; r < window.rows; ++r) {
    const std::int64_t offset =
        offset_ + ((window.row0 + r) * meta_.width + window.col0) * static_cast<std::int64_t>(elem);
    pwrite_all(fd_, bytes + r * window.cols * static_cast<std::int64_t>(elem),
               static_cast<std::size_t>(window.cols) * elem, offset, path_);
  }
}

void FmapWriter::write(const Rect& window, std::span<const float> values) {
  require(dtype_ == PixelType::F32, "writer expects u8 pixels");
  require(static_cast<std::int64_t>(values.size()) == window.area(), "window buffer size mismatch");
  write_bytes(window, values.data(), sizeof(float));
}

void FmapWriter::write(const Rect& window, std::span<const std::uint8_t> values) {
  require(dtype_ == PixelType::U8, "writer expects f32 pixels");
  require(static_cast<std::int64_t>(values.size()) == window.area(), "window buffer size mismatch");
  write_bytes(window, values.data(), 1);
}

void write_fmap(const std::filesystem::path& path, const PredictionMap& map) {
  FmapWriter w(path, map.meta(), PixelType::F32);
  w.write(Rect{0, 0, map.height(), map.width()}, map.values());
  w.close();
}

void write_fmap(const std::filesystem::path& path, const BinaryMask& mask) {
  FmapWriter w(path, mask.meta(), PixelType::U8);
  w.write(Rect{0, 0, mask.height(), mask.width()}, mask.values());
  w.close();
}

PredictionMap read_fmap_map(const std::filesystem::path& path) {
  FmapFloatSource src(path);
  PredictionMap map(src.meta(), 0.0f);
  src.read(Rect{0, 0, map.height(), map.width()}, map.values());
  return map;
}

BinaryMask read_fmap_mask(const std::filesystem::path& path) {
  FmapMaskSource src(path);
  BinaryMask mask(src.meta(), std::uint8_t{0});
  src.read(Rect{0, 0, mask.height(), mask.width()}, mask.values());
  return mask;
}

void GridFloatSource::read(const Rect& window, std::span<float> out) const {
  require_inside(window, map_->meta());
  require(static_cast<std::int64_t>(out.size()) == window.area(), "window buffer size mismatch");
  for (std::int64_t r = 0; r < window.rows; ++r) {
    const auto row = map_->row(window.row0 + r);
    std::copy_n(row.begin() + window.col0, window.cols, out.begin() + r * window.cols);
  }
}

void GridMaskSource::read(const Rect& window, std::span<std::uint8_t> out) const {
  require_inside(window, mask_->meta());
  require(static_cast<std::int64_t>(out.size()) == window.area(), "window buffer size mismatch");
  for (std::int64_t r = 0; r < window.rows; ++r) {
    const auto row = mask_->row(window.row0 + r);
    for (std::int64_t c = 0; c < window.cols; ++c) out[r * window.cols + c] = row[window.col0 + c] != 0;
  }
}

void FullMaskSource::read(const Rect& window, std::span<std::uint8_t> out) const {
  require_inside(window, meta_);
  require(static_cast<std::int64_t>(out.size()) == window.area(), "window buffer size mismatch");
  std::fill(out.begin(), out.end(), std::uint8_t{1});
}

FmapFloatSource::FmapFloatSource(const std::filesystem::path& path) : header_(read_fmap_header(path)), path_(path) {
  if (header_.dtype != PixelType::F32) unreadable(path, "expected an f32 map");
  fd_ = open_read(path);
}

FmapFloatSource::~FmapFloatSource() {
  if (fd_ >= 0) ::close(fd_);
}

void FmapFloatSource::read(const Rect& window, std::span<float> out) const {
  read_window(fd_, header_, window, out, path_);
  check_unit_interval(out, path_);
}

FmapMaskSource::FmapMaskSource(const std::filesystem::path& path) : header_(read_fmap_header(path)), path_(path) {
  if (header_.dtype != PixelType::U8) unreadable(path, "expected a u8 mask");
  fd_ = open_read(path);
}

FmapMaskSource::~FmapMaskSource() {
  if (fd_ >= 0) ::close(fd_);
}

void FmapMaskSource::read(const Rect& window, std::span<std::uint8_t> out) const {
  read_window(fd_, header_, window, out, path_);
  for (auto& b : out) b = b != 0;
}

namespace {

struct PngReadState {
  FILE* file = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReadState() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (file) std::fclose(file);
  }
};

}  // namespace

PngImage read_png(const std::filesystem::path& path) {
  PngReadState s;
  s.file = std::fopen(path.c_str(), "rb");
  if (!s.file) unreadable(path, std::strerror(errno));
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, s.file) != 8 || png_sig_cmp(sig, 0, 8) != 0) unreadable(path, "not a PNG file");
  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!s.png) unreadable(path, "libpng init failed");
  s.info = png_create_info_struct(s.png);
  if (!s.info) unreadable(path, "libpng init failed");

  PngImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> raw;
  int bit_depth = 8;
  if (setjmp(png_jmpbuf(s.png))) unreadable(path, "corrupt PNG data");

  png_init_io(s.png, s.file);
  png_set_sig_bytes(s.png, 8);
  png_read_info(s.png, s.info);
  const auto color = png_get_color_type(s.png, s.info);
  bit_depth = png_get_bit_depth(s.png, s.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(s.png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(s.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(s.png);
  if (bit_depth == 16) png_set_swap(s.png);
  png_read_update_info(s.png, s.info);

  img.width = png_get_image_width(s.png, s.info);
  img.height = png_get_image_height(s.png, s.info);
  img.channels = png_get_channels(s.png, s.info);
  bit_depth = png_get_bit_depth(s.png, s.info);
  if (img.channels != 1 && img.channels != 3) unreadable(path, "unsupported channel layout");
  const std::size_t row_bytes = png_get_rowbytes(s.png, s.info);
  raw.resize(row_bytes * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (std::int64_t r = 0; r < img.height; ++r) rows[r] = raw.data() + r * row_bytes;
  png_read_image(s.png, rows.data());
  png_read_end(s.png, nullptr);

  png_uint_32 res_x = 0, res_y = 0;
  int unit = 0;
  if (png_get_pHYs(s.png, s.info, &res_x, &res_y, &unit) && unit == PNG_RESOLUTION_METER && res_x > 0)
    img.microns_per_pixel = 1e6 / static_cast<double>(res_x);

  const std::size_t n = static_cast<std::size_t>(img.width * img.height * img.channels);
  img.values.resize(n);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint16_t v;
      std::memcpy(&v, raw.data() + 2 * i, 2);
      img.values[i] = static_cast<float>(v) / 65535.0f;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) img.values[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  return img;
}

namespace {

RasterMeta png_meta(const PngImage& png, std::optional<double> mpp) {
  const auto res = mpp ? mpp : png.microns_per_pixel;
  require(res.has_value(), "PNG input needs microns_per_pixel (no pHYs chunk in the file)");
  RasterMeta meta{png.width, png.height, *res};
  meta.validate();
  return meta;
}

}  // namespace

PredictionMap png_to_map(const PngImage& png, std::optional<double> mpp) {
  require(png.channels == 1, "prediction maps must be single-channel PNGs");
  return PredictionMap(png_meta(png, mpp), png.values);
}

RgbImage png_to_rgb(const PngImage& png, std::optional<double> mpp) {
  require(png.channels == 3, "expected an RGB PNG");
  return RgbImage{png_meta(png, mpp), png.values};
}

std::unique_ptr<FloatSource> open_float_source(const std::filesystem::path& path, std::optional<double> mpp) {
  if (path.extension() == ".png")
    return std::make_unique<GridFloatSource>(std::make_shared<PredictionMap>(png_to_map(read_png(path), mpp)));
  return std::make_unique<FmapFloatSource>(path);
}

std::unique_ptr<MaskSource> open_mask_source(const std::filesystem::path& path, std::optional<double> mpp) {
  if (path.extension() == ".png") {
    const auto png = read_png(path);
    require(png.channels == 1, "masks must be single-channel PNGs");
    BinaryMask mask(png_meta(png, mpp), std::uint8_t{0});
    auto dst = mask.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = png.values[i] > 0.5f;
    return std::make_unique<GridMaskSource>(std::make_shared<BinaryMask>(std::move(mask)));
  }
  return std::make_unique<FmapMaskSource>(path);
}

}  // namespace involukit
