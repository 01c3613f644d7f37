#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference kept for testing and benchmarking, `omp` is what the library
// calls. Both produce bit-identical output for the same input; per-pixel
// floating-point work is performed in the same order in both.

#include <array>
#include <cstdint>
#include <span>

namespace involukit::kernels {

using Histogram256 = std::array<std::uint64_t, 256>;

/// Bin of a value in [0,1] on the fixed 256-bin histogram.
inline int bin_of(float v) {
  const int b = static_cast<int>(v * 256.0f);
  return b > 255 ? 255 : (b < 0 ? 0 : b);
}

/// 2R+1 normalized Gaussian taps, tap[R] is the center.
std::array<float, 64> gaussian_taps(double sigma, int radius);

/// Everything the noise kernel needs to address a pixel globally, so a window
/// rendered on its own matches the same window cut from a full render.
struct NoiseSpec {
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  float sigma = 0.0f;
  std::int64_t raster_width = 0;
};

/// Standard-normal deviate for a (seed, stream, pixel) triple; stateless.
float normal_deviate(const NoiseSpec& spec, std::int64_t linear_index);

namespace serial {

Histogram256 histogram256(std::span<const float> values);

/// out[i] = in[i] >= t
void threshold_at_least(std::span<const float> in, float t, std::span<std::uint8_t> out);

/// Majority vote of each kernel x kernel window. `padded` is
/// (rows + kernel - 1) x (cols + kernel - 1) holding 0/1; `out` is rows x cols.
void box_majority(std::span<const std::uint8_t> padded, std::int64_t rows, std::int64_t cols, int kernel,
                  std::span<std::uint8_t> out);

/// Separable convolution with `taps` (length 2R+1). `in` is
/// (rows + 2R) x (cols + 2R); `out` is rows x cols.
void separable_blur(std::span<const float> in, std::int64_t rows, std::int64_t cols,
                    std::span<const float> taps, std::span<float> out);

/// data = clamp(data + sigma * N(0,1), 0, 1) for a window whose top-left
/// pixel sits at (row0, col0) of the full raster.
void add_noise_clamped(std::span<float> data, std::int64_t rows, std::int64_t cols, std::int64_t row0,
                       std::int64_t col0, const NoiseSpec& spec);

}  // namespace serial

namespace omp {

Histogram256 histogram256(std::span<const float> values);
void threshold_at_least(std::span<const float> in, float t, std::span<std::uint8_t> out);
void box_majority(std::span<const std::uint8_t> padded, std::int64_t rows, std::int64_t cols, int kernel,
                  std::span<std::uint8_t> out);
void separable_blur(std::span<const float> in, std::int64_t rows, std::int64_t cols,
                    std::span<const float> taps, std::span<float> out);
void add_noise_clamped(std::span<float> data, std::int64_t rows, std::int64_t cols, std::int64_t row0,
                       std::int64_t col0, const NoiseSpec& spec);

}  // namespace omp

bool openmp_enabled();
int max_threads();
/// No-op without OpenMP.
void set_threads(int n);

}  // namespace involukit::kernels
