#include "involukit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "involukit/error.hpp"

namespace involukit::kernels {

namespace {

constexpr int kNormalTableBits = 16;

const std::vector<float>& normal_table() {
  static const std::vector<float> table = [] {
    const std::size_t n = std::size_t{1} << kNormalTableBits;
    std::vector<float> t(n);
    const boost::math::normal_distribution<double> standard;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<float>(boost::math::quantile(standard, (static_cast<double>(i) + 0.5) / n));
    }
    return t;
  }();
  return table;
}

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t stream_key(const NoiseSpec& spec) {
  return mix64(spec.seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(spec.stream) + 1));
}

inline float deviate(const float* table, std::uint64_t key, std::int64_t linear_index) {
  const std::uint64_t h = mix64(key + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(linear_index));
  return table[h >> (64 - kNormalTableBits)];
}

inline void noise_row(float* row, std::int64_t cols, std::int64_t first_index, std::uint64_t key,
                      float sigma, const float* table) {
  for (std::int64_t c = 0; c < cols; ++c) row[c] += sigma * deviate(table, key, first_index + c);
  for (std::int64_t c = 0; c < cols; ++c) row[c] = std::clamp(row[c], 0.0f, 1.0f);
}

// Vertical then horizontal pass for one output row; shared by both variants so
// the summation order per pixel is identical.
inline void blur_row(const float* in, std::int64_t in_cols, std::int64_t r, std::int64_t cols,
                     std::span<const float> taps, float* vertical, float* out_row) {
  const std::size_t n = taps.size();
  std::fill(vertical, vertical + in_cols, 0.0f);
  for (std::size_t k = 0; k < n; ++k) {
    const float w = taps[k];
    const float* src = in + (r + static_cast<std::int64_t>(k)) * in_cols;
    for (std::int64_t j = 0; j < in_cols; ++j) vertical[j] += w * src[j];
  }
  std::fill(out_row, out_row + cols, 0.0f);
  for (std::size_t k = 0; k < n; ++k) {
    const float w = taps[k];
    const float* src = vertical + k;
    for (std::int64_t c = 0; c < cols; ++c) out_row[c] += w * src[c];
  }
}

// Majority over a band of output rows [r_begin, r_end) using running column
// counts; identical integer arithmetic whichever way the rows are split.
void majority_band(const std::uint8_t* padded, std::int64_t cols, int kernel, std::int64_t r_begin,
                   std::int64_t r_end, std::uint8_t* out) {
  const std::int64_t pcols = cols + kernel - 1;
  const int need = (kernel * kernel + 1) / 2;
  std::vector<std::uint16_t> colsum(static_cast<std::size_t>(pcols), 0);
  for (int k = 0; k < kernel; ++k) {
    const std::uint8_t* src = padded + (r_begin + k) * pcols;
    for (std::int64_t j = 0; j < pcols; ++j) colsum[j] = static_cast<std::uint16_t>(colsum[j] + src[j]);
  }
  for (std::int64_t r = r_begin; r < r_end; ++r) {
    std::uint8_t* dst = out + r * cols;
    int window = 0;
    for (int k = 0; k < kernel; ++k) window += colsum[k];
    dst[0] = window >= need;
    for (std::int64_t c = 1; c < cols; ++c) {
      window += colsum[c + kernel - 1] - colsum[c - 1];
      dst[c] = window >= need;
    }
    if (r + 1 < r_end) {
      const std::uint8_t* drop = padded + r * pcols;
      const std::uint8_t* add = padded + (r + kernel) * pcols;
      for (std::int64_t j = 0; j < pcols; ++j)
        colsum[j] = static_cast<std::uint16_t>(colsum[j] - drop[j] + add[j]);
    }
  }
}

void check_majority_args(std::span<const std::uint8_t> padded, std::int64_t rows, std::int64_t cols, int kernel,
                         std::span<std::uint8_t> out) {
  require(kernel >= 1 && kernel % 2 == 1 && kernel <= 255, "median kernel must be odd and in [1,255]");
  require(static_cast<std::int64_t>(padded.size()) == (rows + kernel - 1) * (cols + kernel - 1),
          "padded window has the wrong size");
  require(static_cast<std::int64_t>(out.size()) == rows * cols, "output window has the wrong size");
}

void check_blur_args(std::span<const float> in, std::int64_t rows, std::int64_t cols, std::span<const float> taps,
                     std::span<float> out) {
  require(taps.size() % 2 == 1, "blur needs an odd tap count");
  const auto pad = static_cast<std::int64_t>(taps.size()) - 1;
  require(static_cast<std::int64_t>(in.size()) == (rows + pad) * (cols + pad), "blur input has the wrong size");
  require(static_cast<std::int64_t>(out.size()) == rows * cols, "blur output has the wrong size");
}

}  // namespace

std::array<float, 64> gaussian_taps(double sigma, int radius) {
  require(radius >= 0 && 2 * radius + 1 <= 64, "blur radius out of range");
  std::array<float, 64> taps{};
  if (sigma <= 0.0) {
    taps[radius] = 1.0f;
    return taps;
  }
  double total = 0.0;
  std::array<double, 64> w{};
  for (int k = -radius; k <= radius; ++k) {
    w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    total += w[k + radius];
  }
  for (int k = 0; k <= 2 * radius; ++k) taps[k] = static_cast<float>(w[k] / total);
  return taps;
}

float normal_deviate(const NoiseSpec& spec, std::int64_t linear_index) {
  return deviate(normal_table().data(), stream_key(spec), linear_index);
}

namespace serial {

Histogram256 histogram256(std::span<const float> values) {
  Histogram256 h{};
  for (float v : values) ++h[bin_of(v)];
  return h;
}

void threshold_at_least(std::span<const float> in, float t, std::span<std::uint8_t> out) {
  require(in.size() == out.size(), "threshold size mismatch");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] >= t;
}

void box_majority(std::span<const std::uint8_t> padded, std::int64_t rows, std::int64_t cols, int kernel,
                  std::span<std::uint8_t> out) {
  check_majority_args(padded, rows, cols, kernel, out);
  if (rows == 0 || cols == 0) return;
  majority_band(padded.data(), cols, kernel, 0, rows, out.data());
}

void separable_blur(std::span<const float> in, std::int64_t rows, std::int64_t cols, std::span<const float> taps,
                    std::span<float> out) {
  check_blur_args(in, rows, cols, taps, out);
  const std::int64_t in_cols = cols + static_cast<std::int64_t>(taps.size()) - 1;
  std::vector<float> vertical(static_cast<std::size_t>(in_cols));
  for (std::int64_t r = 0; r < rows; ++r) blur_row(in.data(), in_cols, r, cols, taps, vertical.data(), out.data() + r * cols);
}

void add_noise_clamped(std::span<float> data, std::int64_t rows, std::int64_t cols, std::int64_t row0,
                       std::int64_t col0, const NoiseSpec& spec) {
  require(static_cast<std::int64_t>(data.size()) == rows * cols, "noise window has the wrong size");
  if (spec.sigma == 0.0f) return;
  const float* table = normal_table().data();
  const std::uint64_t key = stream_key(spec);
  for (std::int64_t r = 0; r < rows; ++r)
    noise_row(data.data() + r * cols, cols, (row0 + r) * spec.raster_width + col0, key, spec.sigma, table);
}

}  // namespace serial

namespace omp {

Histogram256 histogram256(std::span<const float> values) {
#ifdef _OPENMP
  Histogram256 total{};
  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel
  {
    Histogram256 local{};
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) ++local[bin_of(values[i])];
#pragma omp critical
    for (int b = 0; b < 256; ++b) total[b] += local[b];
  }
  return total;
#else
  return serial::histogram256(values);
#endif
}

void threshold_at_least(std::span<const float> in, float t, std::span<std::uint8_t> out) {
  require(in.size() == out.size(), "threshold size mismatch");
  const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = in[i] >= t;
}

void box_majority(std::span<const std::uint8_t> padded, std::int64_t rows, std::int64_t cols, int kernel,
                  std::span<std::uint8_t> out) {
  check_majority_args(padded, rows, cols, kernel, out);
  if (rows == 0 || cols == 0) return;
#ifdef _OPENMP
  const std::int64_t bands = std::min<std::int64_t>(rows, 4 * static_cast<std::int64_t>(omp_get_max_threads()));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < bands; ++b) {
    const std::int64_t r0 = rows * b / bands;
    const std::int64_t r1 = rows * (b + 1) / bands;
    if (r1 > r0) majority_band(padded.data(), cols, kernel, r0, r1, out.data());
  }
#else
  majority_band(padded.data(), cols, kernel, 0, rows, out.data());
#endif
}

void separable_blur(std::span<const float> in, std::int64_t rows, std::int64_t cols, std::span<const float> taps,
                    std::span<float> out) {
  check_blur_args(in, rows, cols, taps, out);
  const std::int64_t in_cols = cols + static_cast<std::int64_t>(taps.size()) - 1;
#pragma omp parallel
  {
    std::vector<float> vertical(static_cast<std::size_t>(in_cols));
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r)
      blur_row(in.data(), in_cols, r, cols, taps, vertical.data(), out.data() + r * cols);
  }
}

void add_noise_clamped(std::span<float> data, std::int64_t rows, std::int64_t cols, std::int64_t row0,
                       std::int64_t col0, const NoiseSpec& spec) {
  require(static_cast<std::int64_t>(data.size()) == rows * cols, "noise window has the wrong size");
  if (spec.sigma == 0.0f) return;
  const float* table = normal_table().data();
  const std::uint64_t key = stream_key(spec);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r)
    noise_row(data.data() + r * cols, cols, (row0 + r) * spec.raster_width + col0, key, spec.sigma, table);
}

}  // namespace omp

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace involukit::kernels
