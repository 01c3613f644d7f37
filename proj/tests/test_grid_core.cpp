#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "involukit/grid_core.hpp"
#include "involukit/kernels.hpp"
#include "support.hpp"

using namespace involukit;
using namespace testsupport;

namespace {

/// Cut maximizing w0*w1*(mu0-mu1)^2 with class means taken over the pixels'
/// bin indices directly; the lowest cut wins ties.
int otsu_oracle(const PredictionMap& map) {
  std::vector<int> bins;
  for (float v : map.values()) bins.push_back(std::min(255, static_cast<int>(v * 256.0f)));
  double best = -1.0;
  int best_cut = -1;
  for (int k = 0; k < 255; ++k) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (int b : bins) {
      if (b <= k) {
        ++n0;
        s0 += b;
      } else {
        ++n1;
        s1 += b;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    const double n = n0 + n1;
    const double between = (n0 / n) * (n1 / n) * (s0 / n0 - s1 / n1) * (s0 / n0 - s1 / n1);
    if (between > best * (1.0 + 1e-12)) {
      best = between;
      best_cut = k;
    }
  }
  return best_cut;
}

BinaryMask rect_mask(std::int64_t h, std::int64_t w, std::int64_t r0, std::int64_t c0, std::int64_t rows,
                     std::int64_t cols) {
  BinaryMask m(meta_of(h, w), std::uint8_t{0});
  for (std::int64_t r = r0; r < r0 + rows; ++r)
    for (std::int64_t c = c0; c < c0 + cols; ++c) m.at(r, c) = 1;
  return m;
}

BinaryMask transpose(const BinaryMask& m) {
  BinaryMask t(meta_of(m.width(), m.height()), std::uint8_t{0});
  for (std::int64_t r = 0; r < m.height(); ++r)
    for (std::int64_t c = 0; c < m.width(); ++c) t.at(c, r) = m.at(r, c);
  return t;
}

RegionStats only_region(const BinaryMask& m) {
  const auto stats = region_stats(connected_components(m));
  REQUIRE(stats.size() == 1);
  return stats[0];
}

}  // namespace

TEST_SUITE("grid_core") {
  TEST_CASE("otsu separates a bimodal map") {
    PredictionMap map(meta_of(10, 10), 0.1f);
    for (int i = 0; i < 80; ++i) map.values()[i] = 0.9f;
    const float t = otsu_threshold(map);
    CHECK(t > 0.1f);
    CHECK(t < 0.9f);
  }

  TEST_CASE("otsu on a constant map is degenerate") {
    const auto map = constant_map(8, 8, 0.5f);
    try {
      (void)otsu_threshold(map);
      FAIL("expected DegenerateHistogram");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateHistogram);
    }
  }

  TEST_CASE("otsu matches exhaustive search on random mixtures") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      std::normal_distribution<float> lo(0.2f + 0.01f * trial, 0.08f), hi(0.75f, 0.1f);
      std::bernoulli_distribution pick(0.3 + 0.02 * trial);
      PredictionMap map(meta_of(40, 50), 0.0f);
      for (auto& v : map.values()) v = std::clamp(pick(rng) ? hi(rng) : lo(rng), 0.0f, 1.0f);
      const int cut = otsu_cut(kernels::serial::histogram256(map.values()));
      CHECK(cut == otsu_oracle(map));
      CHECK(otsu_threshold(map) == otsu_threshold_from_cut(cut));
    }
  }

  TEST_CASE("threshold foreground is exactly the bins above the cut") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    PredictionMap map(meta_of(64, 64), 0.0f);
    for (auto& v : map.values()) v = u(rng);
    map.values()[0] = 100.0f / 256.0f;  // exactly on a bin edge
    const int cut = 99;
    const float t = otsu_threshold_from_cut(cut);
    std::vector<std::uint8_t> out(map.values().size());
    kernels::serial::threshold_at_least(map.values(), t, out);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK((out[i] != 0) == (kernels::bin_of(map.values()[i]) > cut));
  }

  TEST_CASE("connected components: square and diagonal pixels") {
    auto sq = rect_mask(7, 7, 2, 2, 3, 3);
    const auto l = connected_components(sq);
    CHECK(l.component_count() == 1);
    CHECK(region_stats(l)[0].area_px == 9);

    BinaryMask diag(meta_of(4, 4), std::uint8_t{0});
    diag.at(1, 1) = 1;
    diag.at(2, 2) = 1;
    CHECK(connected_components(diag, Connectivity::Eight).component_count() == 1);
    CHECK(connected_components(diag, Connectivity::Four).component_count() == 2);
  }

  TEST_CASE("connected components equal the flood-fill oracle") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
      const auto m = random_mask(64, 64, 0.45, seed);
      for (int conn : {4, 8}) {
        std::int32_t n = 0;
        const auto oracle = flood_labels(m, conn, &n);
        const auto l = connected_components(m, static_cast<Connectivity>(conn));
        CHECK(l.component_count() == n);
        CHECK(label_vector(l) == oracle);  // same dense first-pixel order
      }
    }
  }

  TEST_CASE("area_open removes strictly smaller components") {
    auto keep = rect_mask(60, 60, 5, 5, 50, 50);  // 2500 px
    CHECK(area_open(keep, 2500) == keep);
    auto drop = keep;
    drop.at(5, 5) = 0;  // 2499 px
    CHECK(area_open(drop, 2500).count() == 0);
    const BinaryMask empty(meta_of(10, 10), std::uint8_t{0});
    CHECK(area_open(empty, 2500) == empty);
  }

  TEST_CASE("area_open matches oracle and is idempotent") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto m = blob_mask(120, 100, 25, 12, seed);
      for (std::int64_t a : {1, 5, 60, 400}) {
        const auto once = area_open(m, a);
        CHECK(once == area_open_oracle(m, a));
        CHECK(area_open(once, a) == once);
      }
    }
  }

  TEST_CASE("median filter fixtures") {
    BinaryMask ones(meta_of(20, 20), std::uint8_t{1});
    CHECK(median_filter_binary(ones, 11) == ones);
    BinaryMask dot(meta_of(30, 30), std::uint8_t{0});
    dot.at(15, 15) = 1;
    CHECK(median_filter_binary(dot, 11).count() == 0);
    // 61 of 121 set is a majority, 60 is not.
    BinaryMask block(meta_of(11, 11), std::uint8_t{0});
    for (int i = 0; i < 61; ++i) block.values()[i] = 1;
    // Centre pixel (5,5) sees the whole 11x11 raster without replication.
    CHECK(median_filter_binary(block, 11).at(5, 5) == 1);
    block.values()[60] = 0;
    CHECK(median_filter_binary(block, 11).at(5, 5) == 0);
  }

  TEST_CASE("median filter equals the brute-force window oracle") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto m = random_mask(37, 53, 0.5, seed);
      for (int k : {1, 3, 5, 11}) CHECK(median_filter_binary(m, k) == median_oracle(m, k));
    }
  }

  TEST_CASE("fill_holes fixtures") {
    // Ring with a 3x3 hole.
    auto ring = rect_mask(20, 20, 5, 5, 9, 9);
    for (int r = 8; r < 11; ++r)
      for (int c = 8; c < 11; ++c) ring.at(r, c) = 0;
    CHECK(fill_holes(ring, 2500) == rect_mask(20, 20, 5, 5, 9, 9));

    // 50x50 hole, exactly 2500 px: kept.
    auto big = rect_mask(70, 70, 5, 5, 60, 60);
    for (int r = 10; r < 60; ++r)
      for (int c = 10; c < 60; ++c) big.at(r, c) = 0;
    CHECK(fill_holes(big, 2500) == big);
    CHECK(fill_holes(big, 2501).count() == 3600);

    const auto plain = rect_mask(20, 20, 0, 0, 10, 20);
    CHECK(fill_holes(plain, 2500) == plain);
  }

  TEST_CASE("fill_holes matches oracle and is idempotent") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto m = blob_mask(100, 120, 30, 15, seed + 100);
      for (std::int64_t a : {1, 10, 200, 5000}) {
        const auto once = fill_holes(m, a);
        CHECK(once == fill_holes_oracle(m, a));
        CHECK(fill_holes(once, a) == once);
      }
    }
  }

  TEST_CASE("moments: disk, rectangle, rotation") {
    const auto disk = only_region(disk_mask(140, 140, 70, 70, 50));
    CHECK(disk.major_axis_px == doctest::Approx(100.0).epsilon(0.02));
    CHECK(disk.minor_axis_px == doctest::Approx(100.0).epsilon(0.02));

    const auto rect = only_region(rect_mask(50, 80, 10, 10, 30, 60));
    CHECK(rect.major_axis_px == doctest::Approx(2.0 * 60.0 / std::sqrt(3.0)).epsilon(0.02));
    CHECK(rect.major_axis_px == doctest::Approx(69.28).epsilon(0.02));
    // With the unit-square correction the rectangle's axes are exact.
    CHECK(rect.major_axis_px == doctest::Approx(4.0 * std::sqrt(3600.0 / 12.0)).epsilon(1e-12));
    CHECK(rect.minor_axis_px == doctest::Approx(4.0 * std::sqrt(900.0 / 12.0)).epsilon(1e-12));

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto m = area_open(blob_mask(90, 70, 6, 20, seed + 40), 1);
      const auto l = connected_components(m);
      const auto s = region_stats(l);
      const auto st = region_stats(connected_components(transpose(m)));
      REQUIRE(s.size() == st.size());
      std::vector<std::array<double, 3>> a, b;
      for (const auto& x : s) a.push_back({static_cast<double>(x.area_px), x.major_axis_px, x.minor_axis_px});
      for (const auto& x : st) b.push_back({static_cast<double>(x.area_px), x.major_axis_px, x.minor_axis_px});
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i][0] == b[i][0]);
        CHECK(a[i][1] == doctest::Approx(b[i][1]).epsilon(0.01));
        CHECK(a[i][2] == doctest::Approx(b[i][2]).epsilon(0.01));
      }
    }
  }

  TEST_CASE("moments: rotation by 90 degrees of a disk-free shape") {
    // An L shape rotated 90 degrees (transpose plus flip).
    BinaryMask l(meta_of(60, 60), std::uint8_t{0});
    for (int r = 5; r < 55; ++r)
      for (int c = 5; c < 15; ++c) l.at(r, c) = 1;
    for (int r = 45; r < 55; ++r)
      for (int c = 5; c < 45; ++c) l.at(r, c) = 1;
    BinaryMask rot(meta_of(60, 60), std::uint8_t{0});
    for (int r = 0; r < 60; ++r)
      for (int c = 0; c < 60; ++c) rot.at(c, 59 - r) = l.at(r, c);
    const auto a = only_region(l), b = only_region(rot);
    CHECK(a.area_px == b.area_px);
    CHECK(a.major_axis_px == doctest::Approx(b.major_axis_px).epsilon(0.01));
    CHECK(a.minor_axis_px == doctest::Approx(b.minor_axis_px).epsilon(0.01));
  }

  TEST_CASE("region stats invariants on random masks") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto m = random_mask(50, 50, 0.55, seed + 7);
      const auto stats = region_stats(connected_components(m));
      std::int64_t total = 0;
      for (const auto& s : stats) {
        total += s.area_px;
        CHECK(s.major_axis_px >= s.minor_axis_px);
        CHECK(s.minor_axis_px >= 0.0);
        CHECK(s.cov[0] * s.cov[2] - s.cov[1] * s.cov[1] >= -1e-9);
      }
      CHECK(total == m.count());
    }
  }

  TEST_CASE("moment sums are additive over runs") {
    MomentSums a, b;
    for (std::int64_t c = 3; c < 40; ++c) a.add_pixel(7, c);
    b.add_run(7, 3, 40);
    CHECK(a == b);
  }
}
