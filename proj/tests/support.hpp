#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "involukit/error.hpp"
#include "involukit/grid_core.hpp"
#include "involukit/raster.hpp"

namespace testsupport {

using namespace involukit;

inline RasterMeta meta_of(std::int64_t h, std::int64_t w, double mpp = 0.5) { return RasterMeta{w, h, mpp}; }

inline BinaryMask random_mask(std::int64_t h, std::int64_t w, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(density);
  BinaryMask m(meta_of(h, w), std::uint8_t{0});
  for (auto& v : m.values()) v = coin(rng);
  return m;
}

/// Union of random axis-aligned rectangles and disks; gives components of
/// many sizes with holes.
inline BinaryMask blob_mask(std::int64_t h, std::int64_t w, int n_shapes, std::int64_t max_extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BinaryMask m(meta_of(h, w), std::uint8_t{0});
  std::uniform_int_distribution<std::int64_t> rr(0, h - 1), cc(0, w - 1), ext(1, max_extent);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < n_shapes; ++i) {
    const auto r0 = rr(rng), c0 = cc(rng), e1 = ext(rng), e2 = ext(rng);
    const bool disk = coin(rng), erase = coin(rng) && coin(rng);
    for (std::int64_t r = std::max<std::int64_t>(0, r0 - e1); r < std::min(h, r0 + e1); ++r)
      for (std::int64_t c = std::max<std::int64_t>(0, c0 - e2); c < std::min(w, c0 + e2); ++c) {
        if (disk && (r - r0) * (r - r0) + (c - c0) * (c - c0) > e1 * e1) continue;
        m.at(r, c) = erase ? 0 : 1;
      }
  }
  return m;
}

inline BinaryMask disk_mask(std::int64_t h, std::int64_t w, double cr, double cc, double radius) {
  BinaryMask m(meta_of(h, w), std::uint8_t{0});
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      m.at(r, c) = (r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius;
  return m;
}

/// Breadth-first labelling; labels dense in first-pixel raster order.
inline std::vector<std::int32_t> flood_labels(const BinaryMask& m, int connectivity, std::int32_t* count = nullptr) {
  const std::int64_t h = m.height(), w = m.width();
  std::vector<std::int32_t> lab(static_cast<std::size_t>(h * w), 0);
  std::int32_t next = 0;
  std::deque<std::int64_t> q;
  for (std::int64_t i = 0; i < h * w; ++i) {
    if (!m.values()[i] || lab[i]) continue;
    lab[i] = ++next;
    q.push_back(i);
    while (!q.empty()) {
      const auto p = q.front();
      q.pop_front();
      const auto r = p / w, c = p % w;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (!dr && !dc) continue;
          if (connectivity == 4 && dr && dc) continue;
          const auto nr = r + dr, nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
          const auto j = nr * w + nc;
          if (m.values()[j] && !lab[j]) {
            lab[j] = next;
            q.push_back(j);
          }
        }
    }
  }
  if (count) *count = next;
  return lab;
}

inline BinaryMask area_open_oracle(const BinaryMask& m, std::int64_t min_area) {
  std::int32_t n = 0;
  const auto lab = flood_labels(m, 8, &n);
  std::vector<std::int64_t> area(static_cast<std::size_t>(n) + 1, 0);
  for (auto l : lab) ++area[l];
  BinaryMask out(m.meta(), std::uint8_t{0});
  for (std::size_t i = 0; i < lab.size(); ++i) out.values()[i] = lab[i] && area[lab[i]] >= min_area;
  return out;
}

inline BinaryMask fill_holes_oracle(const BinaryMask& m, std::int64_t max_hole) {
  BinaryMask inv(m.meta(), std::uint8_t{0});
  for (std::size_t i = 0; i < inv.values().size(); ++i) inv.values()[i] = !m.values()[i];
  std::int32_t n = 0;
  const auto lab = flood_labels(inv, 4, &n);
  std::vector<std::int64_t> area(static_cast<std::size_t>(n) + 1, 0);
  std::vector<bool> border(static_cast<std::size_t>(n) + 1, false);
  const std::int64_t h = m.height(), w = m.width();
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      const auto l = lab[r * w + c];
      ++area[l];
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) border[l] = true;
    }
  BinaryMask out = m;
  for (std::size_t i = 0; i < lab.size(); ++i)
    if (lab[i] && !border[lab[i]] && area[lab[i]] < max_hole) out.values()[i] = 1;
  return out;
}

inline BinaryMask median_oracle(const BinaryMask& m, int kernel) {
  const std::int64_t h = m.height(), w = m.width(), half = kernel / 2;
  BinaryMask out(m.meta(), std::uint8_t{0});
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      int ones = 0;
      for (std::int64_t dr = -half; dr <= half; ++dr)
        for (std::int64_t dc = -half; dc <= half; ++dc)
          ones += m.at(std::clamp<std::int64_t>(r + dr, 0, h - 1), std::clamp<std::int64_t>(c + dc, 0, w - 1));
      out.at(r, c) = 2 * ones > kernel * kernel;
    }
  return out;
}

/// True when two labelings induce the same partition of the pixels.
inline bool same_partition(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::int32_t, std::int32_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (!a[i]) continue;
    auto [it1, new1] = ab.emplace(a[i], b[i]);
    auto [it2, new2] = ba.emplace(b[i], a[i]);
    if (it1->second != b[i] || it2->second != a[i]) return false;
  }
  return true;
}

inline std::vector<std::int32_t> label_vector(const LabelMap& l) {
  return std::vector<std::int32_t>(l.values().begin(), l.values().end());
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / ("involukit-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

/// Runs f and reports the ErrorCode it threw, or nullopt.
template <typename F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline PredictionMap constant_map(std::int64_t h, std::int64_t w, float v, double mpp = 0.5) {
  return PredictionMap(meta_of(h, w, mpp), v);
}

}  // namespace testsupport
