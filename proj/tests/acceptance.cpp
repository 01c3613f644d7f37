// Acceptance runner: one PASS/FAIL line per criterion, tolerances fixed below.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "involukit/acini.hpp"
#include "involukit/adipose.hpp"
#include "involukit/io.hpp"
#include "involukit/kernels.hpp"
#include "involukit/phantom.hpp"
#include "involukit/pipeline.hpp"
#include "involukit/serialize.hpp"
#include "involukit/stats.hpp"
#include "involukit/tdlu.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace involukit;
using namespace testsupport;

namespace {

// Closed loop.
constexpr int kLoopScenes = 20;
constexpr int kLoopMinExact = 18;
constexpr double kLoopDensityTol = 0.05;
constexpr double kLoopSpanTol = 0.10;
constexpr double kLoopAciniTol = 0.10;
constexpr double kLoopBudgetS = 60.0;
// Tiling transparency.
constexpr int kTilingMaps = 10;
constexpr std::int64_t kTilingSize = 4608;
constexpr double kTilingBudgetS = 30.0;
// Moments.
constexpr double kMomentTol = 0.02;
constexpr double kRotationTol = 0.01;
// Statistics.
constexpr double kIccTol = 1e-10;
constexpr double kRankTol = 1e-12;
constexpr double kOlsTol = 1e-10;
constexpr std::int64_t kExactEnumerationLimit = 12;
// Calibration.
constexpr double kCalibrationTol = 1e-12;
// Memory.
constexpr std::int64_t kMemorySize = 16384;
constexpr std::int64_t kMemoryTile = 4096;
constexpr long kMemoryBudgetKb = 512L * 1024L;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail << "first failure: " << what << "; ";
      ok = false;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

struct ChildResult {
  int status = -1;
  long maxrss_kb = 0;
};

ChildResult run_cli(const std::vector<std::string>& args, const std::filesystem::path& log,
                    const std::vector<std::string>& env = {}) {
  std::vector<std::string> argv_store{INVOLUKIT_CLI_PATH};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  const pid_t pid = fork();
  if (pid == 0) {
    std::FILE* f = std::fopen(log.c_str(), "w");
    if (f) {
      dup2(fileno(f), STDOUT_FILENO);
      dup2(fileno(f), STDERR_FILENO);
    }
    for (const auto& e : env) putenv(const_cast<char*>(e.c_str()));
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(argv[0], argv.data());
    _exit(127);
  }
  ChildResult r;
  int raw = 0;
  rusage usage{};
  if (pid > 0 && wait4(pid, &raw, 0, &usage) == pid) {
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.maxrss_kb = usage.ru_maxrss;
  }
  return r;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Every regular file in `a` exists in `b` with the same bytes, and vice versa.
bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, std::string& why) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : std::filesystem::directory_iterator(a)) names_a.push_back(e.path().filename().string());
  for (const auto& e : std::filesystem::directory_iterator(b)) names_b.push_back(e.path().filename().string());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) {
    why = "file lists differ";
    return false;
  }
  for (const auto& n : names_a)
    if (file_bytes(a / n) != file_bytes(b / n)) {
      why = n + " differs";
      return false;
    }
  return true;
}

struct PhantomInputs {
  std::shared_ptr<const PhantomRenderer> renderer;
  PhantomFloatSource acini, tdlu, adipose;
  PhantomTissueSource tissue;

  explicit PhantomInputs(std::shared_ptr<const PhantomRenderer> r)
      : renderer(r),
        acini(r, PhantomLayer::Acini),
        tdlu(r, PhantomLayer::Tdlu),
        adipose(r, PhantomLayer::Adipose),
        tissue(r) {}
  PipelineInputs inputs() const { return {&acini, &tdlu, &adipose, &tissue, nullptr}; }
};

// ---------------------------------------------------------------------------

Check closed_loop() {
  Check c;
  int exact_n = 0, exact_labels = 0;
  double worst_density = 0, worst_span = 0, worst_acini = 0, min_f1 = 1.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int seed = 1; seed <= kLoopScenes; ++seed) {
    PhantomConfig cfg;
    cfg.canvas = RasterMeta{8192, 8192, 0.16};
    cfg.noise.gaussian_sigma = 0.05;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto renderer = std::make_shared<const PhantomRenderer>(generate_scene(cfg), cfg);
    const PhantomInputs in(renderer);
    const auto res = run_pipeline(in.inputs(), PipelineParams{});
    const auto& truth = renderer->scene().true_measures;
    const auto& got = res.report;

    exact_n += got.n_tdlus == truth.n_tdlus;
    exact_labels += got.russo_predominant == truth.russo_predominant && got.baer == truth.baer;
    const double dd = std::abs(got.tdlu_per_mm2 - truth.tdlu_per_mm2) / truth.tdlu_per_mm2;
    worst_density = std::max(worst_density, dd);
    c.expect(dd <= kLoopDensityTol, "tdlu_per_mm2 seed " + std::to_string(seed));
    const bool have = got.median_span_um && truth.median_span_um && got.median_acini_raw && truth.median_acini_raw;
    c.expect(have, "medians present seed " + std::to_string(seed));
    if (have) {
      const double ds = std::abs(*got.median_span_um - *truth.median_span_um) / *truth.median_span_um;
      const double da = std::abs(*got.median_acini_raw - *truth.median_acini_raw) / *truth.median_acini_raw;
      worst_span = std::max(worst_span, ds);
      worst_acini = std::max(worst_acini, da);
      c.expect(ds <= kLoopSpanTol, "median_span_um seed " + std::to_string(seed));
      c.expect(da <= kLoopAciniTol, "median_acini_raw seed " + std::to_string(seed));
    }
    const auto score = match_detections(res.detections, renderer->scene().all_acini(),
                                        AciniDetectParams{}.match_radius_px);
    min_f1 = std::min(min_f1, score.f1);
  }
  const double elapsed = seconds_since(t0);
  c.expect(exact_n >= kLoopMinExact, "n_tdlus exact in " + std::to_string(exact_n) + " scenes");
  c.expect(exact_labels >= kLoopMinExact, "labels exact in " + std::to_string(exact_labels) + " scenes");
  c.expect(elapsed < kLoopBudgetS, "runtime");
  c.detail << "n exact " << exact_n << "/" << kLoopScenes << ", labels exact " << exact_labels << "/" << kLoopScenes
           << ", worst density " << worst_density << ", span " << worst_span << ", acini " << worst_acini
           << ", min acini F1 " << min_f1 << ", " << elapsed << " s on " << kernels::max_threads() << " thread(s)";
  return c;
}

Check tiling_transparency() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  int compared = 0;
  for (int k = 0; k < kTilingMaps; ++k) {
    PhantomConfig cfg;
    cfg.canvas = RasterMeta{kTilingSize, kTilingSize, 0.16};
    cfg.n_tdlus = {3, 6};
    cfg.noise.gaussian_sigma = 0.05;
    cfg.noise.false_blob_rate = 10.0;
    cfg.seed = static_cast<std::uint64_t>(1000 + k);
    const auto renderer = std::make_shared<const PhantomRenderer>(generate_scene(cfg), cfg);
    const PhantomInputs in(renderer);
    PipelineParams params;
    const auto mono = run_pipeline_monolithic(in.inputs(), params);
    for (std::int64_t tile : {1024, 4096}) {
      params.tiles.tile_size_px = tile;
      const auto tiled = run_pipeline(in.inputs(), params);
      const std::string tag = " map " + std::to_string(k) + " tile " + std::to_string(tile);
      c.expect(tiled.tdlu_mask.to_mask() == mono.tdlu_mask, "tdlu mask" + tag);
      c.expect(tiled.adipose_mask.to_mask() == mono.adipose_mask, "adipose mask" + tag);
      c.expect(tiled.tissue_mask.to_mask() == mono.tissue_mask, "tissue mask" + tag);
      c.expect(tiled.report == mono.report, "report" + tag);
      c.expect(tiled.regions == mono.regions, "regions" + tag);
      c.expect(tiled.detections == mono.detections, "detections" + tag);
      ++compared;
    }
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < kTilingBudgetS, "runtime");
  c.detail << compared << " tiled runs vs monolithic on " << kTilingSize << "^2 maps, " << elapsed << " s";
  return c;
}

BinaryMask rect_mask(std::int64_t h, std::int64_t w, Rect r) {
  BinaryMask m(meta_of(h, w), std::uint8_t{0});
  for (std::int64_t i = r.row0; i < r.row1(); ++i)
    for (std::int64_t j = r.col0; j < r.col1(); ++j) m.at(i, j) = 1;
  return m;
}

Check rule_fidelity() {
  Check c;
  const TdluPostprocParams tdlu;
  // Area rule: 2499 px removed, 2500 px kept (49 x 51 and 50 x 50, plus a 2499 px L shape).
  {
    const auto below = rect_mask(200, 200, {20, 20, 49, 51});
    const auto at = rect_mask(200, 200, {20, 20, 50, 50});
    c.expect(area_open(below, tdlu.min_object_px).count() == 0, "2499 px object removed");
    c.expect(area_open(at, tdlu.min_object_px) == at, "2500 px object kept");
    auto ell = at;
    ell.at(69, 69) = 0;
    c.expect(area_open(ell, tdlu.min_object_px).count() == 0, "2499 px L shape removed");
    for (std::int64_t tile : {64, 128}) {
      c.expect(tiled_area_open(TiledMask::from_mask(below, tile), tdlu.min_object_px).count() == 0,
               "tiled 2499 px removed");
      c.expect(tiled_area_open(TiledMask::from_mask(at, tile), tdlu.min_object_px).to_mask() == at,
               "tiled 2500 px kept");
    }
  }
  // Hole rule: 2499 px hole filled, 2500 px hole kept.
  {
    auto ring_below = rect_mask(200, 200, {10, 10, 80, 80});
    auto ring_at = ring_below;
    for (std::int64_t i = 25; i < 74; ++i)
      for (std::int64_t j = 25; j < 76; ++j) ring_below.at(i, j) = 0;
    for (std::int64_t i = 25; i < 75; ++i)
      for (std::int64_t j = 25; j < 75; ++j) ring_at.at(i, j) = 0;
    const auto solid = rect_mask(200, 200, {10, 10, 80, 80});
    c.expect(fill_holes(ring_below, tdlu.max_hole_px) == solid, "2499 px hole filled");
    c.expect(fill_holes(ring_at, tdlu.max_hole_px) == ring_at, "2500 px hole kept");
    c.expect(tiled_fill_holes(TiledMask::from_mask(ring_below, 64), tdlu.max_hole_px).to_mask() == solid,
             "tiled 2499 px hole filled");
    c.expect(tiled_fill_holes(TiledMask::from_mask(ring_at, 64), tdlu.max_hole_px).to_mask() == ring_at,
             "tiled 2500 px hole kept");
  }
  // Median kernel 11: a pixel flips on with 61 of 121 window pixels set, stays off with 60.
  {
    const int k = tdlu.median_kernel;
    c.expect(k == 11, "default kernel is 11");
    for (int ones : {60, 61}) {
      BinaryMask m(meta_of(41, 41), std::uint8_t{0});
      int placed = 0;
      for (std::int64_t i = 15; i < 26 && placed < ones; ++i)
        for (std::int64_t j = 15; j < 26 && placed < ones; ++j)
          if (!(i == 20 && j == 20)) {
            m.at(i, j) = 1;
            ++placed;
          }
      const auto out = median_filter_binary(m, k);
      c.expect(out.at(20, 20) == (ones == 61 ? 1 : 0), "majority at " + std::to_string(ones) + " of 121");
    }
    auto lone = BinaryMask(meta_of(41, 41), std::uint8_t{0});
    lone.at(20, 20) = 1;
    c.expect(median_filter_binary(lone, k).count() == 0, "isolated pixel removed");
    const BinaryMask full(meta_of(30, 30), std::uint8_t{1});
    c.expect(median_filter_binary(full, k) == full, "all-ones unchanged");
  }
  // Adipose cutoff 0.6, inclusive.
  {
    const AdiposeParams adipose;
    c.expect(adipose.threshold == 0.6, "default adipose threshold");
    const PredictionMap at(meta_of(20, 20), 0.6f);
    const PredictionMap below(meta_of(20, 20), std::nextafter(0.6f, 0.0f));
    const PredictionMap low(meta_of(20, 20), 0.59f);
    c.expect(postprocess_adipose_map(at, adipose).count() == 400, "0.6 is adipose");
    c.expect(postprocess_adipose_map(below, adipose).count() == 0, "just below 0.6 is not adipose");
    c.expect(postprocess_adipose_map(low, adipose).count() == 0, "0.59 is not adipose");
  }
  // NMS radius 20 (inclusive) and threshold 0.48 (inclusive).
  {
    const AciniDetectParams acini;
    c.expect(acini.nms_radius_px == 20.0 && acini.nms_threshold == 0.48, "default NMS parameters");
    for (std::int64_t gap : {15, 20, 21}) {
      PredictionMap m(meta_of(60, 80), 0.0f);
      m.at(30, 20) = 0.9f;
      m.at(30, 20 + gap) = 0.8f;
      const auto d = nms_peaks(m, acini);
      const std::size_t want = gap <= 20 ? 1 : 2;
      c.expect(d.points.size() == want, "peaks " + std::to_string(gap) + " px apart");
      c.expect(!d.points.empty() && d.points[0] == Point{30, 20}, "strongest peak kept");
    }
    PredictionMap diag(meta_of(60, 60), 0.0f);
    diag.at(10, 10) = 0.9f;
    diag.at(22, 26) = 0.8f;  // distance exactly 20
    c.expect(nms_peaks(diag, acini).points.size() == 1, "diagonal distance 20 suppressed");
    for (float peak : {0.48f, std::nextafter(0.48f, 0.0f), 0.40f}) {
      PredictionMap m(meta_of(30, 30), 0.0f);
      m.at(15, 15) = peak;
      const std::size_t want = peak >= 0.48f ? 1 : 0;
      c.expect(nms_peaks(m, acini).points.size() == want, "threshold at peak " + std::to_string(peak));
    }
    // Gaussian bumps (sigma 3) peaking at 0.9 and 0.8, 15 px apart.
    PredictionMap bumps(meta_of(100, 100), 0.0f);
    for (std::int64_t i = 0; i < 100; ++i)
      for (std::int64_t j = 0; j < 100; ++j) {
        const double a = (i - 50.0) * (i - 50.0) + (j - 40.0) * (j - 40.0);
        const double b = (i - 50.0) * (i - 50.0) + (j - 55.0) * (j - 55.0);
        bumps.at(i, j) = static_cast<float>(std::max(0.9 * std::exp(-a / 18.0), 0.8 * std::exp(-b / 18.0)));
      }
    const auto d = nms_peaks(bumps, acini);
    c.expect(d.points.size() == 1 && d.points[0] == Point{50, 40}, "bumps 15 px apart give one detection");
  }
  c.detail << "area, hole, median, adipose and NMS boundary fixtures";
  return c;
}

double major_axis_of(const BinaryMask& m) {
  const auto r = region_stats(connected_components(m));
  return r.size() == 1 ? r[0].major_axis_px : -1.0;
}

Check moments() {
  Check c;
  BinaryMask disk(meta_of(160, 160), std::uint8_t{0});
  for (std::int64_t i = 0; i < 160; ++i)
    for (std::int64_t j = 0; j < 160; ++j)
      disk.at(i, j) = std::hypot(static_cast<double>(i) - 80.0, static_cast<double>(j) - 80.0) <= 50.0;
  const double d = major_axis_of(disk);
  c.expect(within(d, 100.0, kMomentTol), "disk r=50");

  const double expect_rect = 4.0 * std::sqrt(60.0 * 60.0 / 12.0);
  const double r0 = major_axis_of(rect_mask(100, 120, {35, 30, 30, 60}));
  c.expect(within(r0, expect_rect, kMomentTol), "rectangle 60x30");

  double worst = 0.0;
  for (double deg : {10.0, 22.5, 30.0, 45.0, 60.0, 77.0, 90.0, 135.0}) {
    const double a = deg * std::numbers::pi / 180.0;
    Polygon p;
    for (const auto& [u, v] : {std::pair{-15.0, -30.0}, {-15.0, 30.0}, {15.0, 30.0}, {15.0, -30.0}})
      p.vertices.push_back({100.0 + u * std::cos(a) - v * std::sin(a), 100.0 + u * std::sin(a) + v * std::cos(a)});
    const double ra = major_axis_of(rasterize_polygons({p}, meta_of(200, 200)));
    worst = std::max(worst, std::abs(ra - r0) / r0);
  }
  c.expect(worst <= kRotationTol, "rotation invariance");
  c.detail << "disk " << d << " px, rectangle " << r0 << " px (expected " << expect_rect
           << "), worst rotation change " << worst;
  return c;
}

Check statistics() {
  using namespace involukit::stats;
  using namespace oracles;
  Check c;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z(10.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    RaterMatrix m(6 + t, 2 + t % 4);
    for (auto& v : m.data) v = z(rng);
    const auto r = icc3_1(m);
    c.expect(std::abs(r.statistic - icc_oracle(m)) < kIccTol, "icc vs ANOVA sums");
    c.expect(*r.ci_low <= r.statistic && r.statistic <= *r.ci_high, "icc CI brackets the statistic");
  }
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(12), y(12);
    for (auto& v : x) v = std::round(z(rng));
    for (auto& v : y) v = std::round(z(rng));
    c.expect(std::abs(spearman_rho(x, y).statistic - pearson_oracle(rank_oracle(x), rank_oracle(y))) < kRankTol,
             "spearman vs pearson on midranks");
  }
  for (std::int64_t m = 1; m < kExactEnumerationLimit; ++m)
    for (std::int64_t n = 1; m + n <= kExactEnumerationLimit; ++n) {
      std::vector<double> pool(static_cast<std::size_t>(m + n));
      std::iota(pool.begin(), pool.end(), 1.0);
      std::shuffle(pool.begin(), pool.end(), rng);
      const std::vector<double> a(pool.begin(), pool.begin() + m), b(pool.begin() + m, pool.end());
      const auto r = mann_whitney_u(a, b);
      c.expect(std::abs(*r.p_value - std::min(1.0, mwu_enumeration_p(m, n, r.statistic))) < kRankTol,
               "mann-whitney exact p m=" + std::to_string(m) + " n=" + std::to_string(n));
    }
  for (int t = 0; t < 20; ++t) {
    std::vector<std::vector<double>> g(3);
    for (std::size_t k = 0; k < g.size(); ++k) {
      g[k].resize(4 + k + t % 3);
      for (auto& v : g[k]) v = std::round(z(rng) + static_cast<double>(k));
    }
    c.expect(std::abs(kruskal_wallis(g).statistic - kruskal_oracle(g)) < kRankTol, "kruskal-wallis");
  }
  std::uniform_int_distribution<std::int64_t> cnt(1, 40);
  for (int t = 0; t < 20; ++t) {
    const std::int64_t rows = 2 + t % 3, cols = 2 + (t / 3) % 3;
    CountTable tab(rows, cols);
    for (auto& v : tab.data) v = cnt(rng);
    const double want = rows == 2 && cols == 2
                            ? yates_oracle(static_cast<double>(tab(0, 0)), static_cast<double>(tab(0, 1)),
                                           static_cast<double>(tab(1, 0)), static_cast<double>(tab(1, 1)))
                            : pearson_chi2_oracle(tab);
    c.expect(std::abs(chi_squared(tab).statistic - want) < kRankTol, "chi-squared");
  }
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 20; ++t) {
    LabelMatrix labels(12, 2 + t % 4);
    for (auto& l : labels.data) l = coin(rng) ? 1 : (coin(rng) ? 2 : 0);
    const auto counts = rating_counts(labels, 3);
    const auto [kappa, p] = fleiss_oracle(counts);
    c.expect(std::abs(fleiss_kappa(counts).statistic - kappa) < kRankTol, "fleiss kappa");
  }
  std::uniform_real_distribution<double> u(1.0, 30.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = u(rng);
      y[i] = 3.888 * x[i] + 2.0 * (t % 3) + noise(rng);
    }
    const auto [slope, intercept] = ols_oracle(x, y);
    const auto fit = fit_calibration(x, y);
    c.expect(std::abs(fit.slope - slope) < kOlsTol && std::abs(fit.intercept - intercept) < kOlsTol,
             "OLS vs normal equations");
  }
  c.expect(interpret_icc(std::nextafter(0.5, 0.0)) == IccBand::Poor, "band below 0.5");
  c.expect(interpret_icc(0.5) == IccBand::Moderate, "band at 0.5");
  c.expect(interpret_icc(std::nextafter(0.75, 0.0)) == IccBand::Moderate, "band below 0.75");
  c.expect(interpret_icc(0.75) == IccBand::Good, "band at 0.75");
  c.expect(interpret_icc(std::nextafter(0.9, 0.0)) == IccBand::Good, "band below 0.9");
  c.expect(interpret_icc(0.9) == IccBand::Excellent, "band at 0.9");
  // Published "0.80 (0.63, 0.90)".
  c.expect(interpret_icc(0.80) == IccBand::Good, "0.80 reads as good");
  c.expect(0.63 <= 0.80 && 0.80 <= 0.90, "published interval brackets its estimate");
  c.detail << "icc, spearman, mann-whitney (n <= " << kExactEnumerationLimit
           << "), kruskal-wallis, chi-squared, fleiss, OLS and band edges";
  return c;
}

Check calibration() {
  Check c;
  const CalibrationModel model{3.888, 0.0, std::nullopt};
  const double v = model.apply(10.0);
  c.expect(std::abs(v - 38.88) <= kCalibrationTol, "3.888 * 10");

  TdluRegion r;
  r.span_um = 100.0;
  r.area_mm2 = 0.01;
  const std::vector<TdluRegion> regions{r, r, r};
  const std::vector<std::int64_t> counts{8, 10, 15};
  const auto rep = compute_report(regions, counts, 33, AreaSummary{1.0, 0.0, 1.0}, model);
  c.expect(rep.median_acini_raw && *rep.median_acini_raw == 10.0, "raw median 10");
  c.expect(rep.median_acini_per_tdlu && std::abs(*rep.median_acini_per_tdlu - 38.88) <= kCalibrationTol,
           "reported calibrated median");
  c.detail << std::setprecision(17) << "calibrated median " << (rep.median_acini_per_tdlu ? *rep.median_acini_per_tdlu : -1.0);
  return c;
}

Check memory_bound() {
  Check c;
  const TempDir dir("accept-memory");
  const auto cfg = dir / "cfg.ini";
  std::ofstream(cfg) << "[phantom]\nwidth = " << kMemorySize << "\nheight = " << kMemorySize
                     << "\nmicrons_per_pixel = 0.16\n[tiling]\ntile_size_px = " << kMemoryTile << "\n";
  const auto phantom = run_cli({"phantom", "--seed", "3", "--config", cfg.string(), "--out", (dir / "truth").string()},
                               dir / "phantom.log");
  c.expect(phantom.status == 0, "phantom exit " + std::to_string(phantom.status));
  const auto truth = dir / "truth";
  const auto run = run_cli({"run", "--acini-map", (truth / "acini_map.fmap").string(), "--tdlu-map",
                            (truth / "tdlu_map.fmap").string(), "--adipose-map", (truth / "adipose_map.fmap").string(),
                            "--tissue-mask", (truth / "tissue_mask.fmap").string(), "--config", cfg.string(),
                            "--out", (dir / "pred").string()},
                           dir / "run.log");
  c.expect(run.status == 0, "run exit " + std::to_string(run.status));
  c.expect(run.maxrss_kb < kMemoryBudgetKb, "run resident set");
  if (run.status == 0) {
    const auto rep = Json::parse(read_text_file(dir / "pred" / "report.json"));
    const auto want = Json::parse(read_text_file(truth / "true_report.json"));
    c.expect(rep["n_tdlus"] == want["n_tdlus"], "n_tdlus recovered at 16384^2");
  }
  // ru_maxrss of a forked child also counts the parent pages it started with, so this is an upper bound.
  c.detail << kMemorySize << "^2, tile " << kMemoryTile << ": run peak RSS <= " << run.maxrss_kb / 1024
           << " MB (phantom writer <= " << phantom.maxrss_kb / 1024 << " MB)";
  return c;
}

Check determinism() {
  Check c;
  const TempDir dir("accept-determinism");
  const auto cfg = dir / "cfg.ini";
  std::ofstream(cfg) << "[phantom]\nwidth = 3072\nheight = 3072\nmicrons_per_pixel = 0.16\nn_tdlus = 2-4\n"
                        "tdlu_radius_um = 30-50\nfalse_blob_rate = 10\n[tiling]\ntile_size_px = 1024\n";
  std::string why;
  for (const char* name : {"a", "b"}) {
    const auto r = run_cli({"phantom", "--seed", "11", "--config", cfg.string(), "--out", (dir / name).string()},
                           dir / "phantom.log");
    c.expect(r.status == 0, "phantom exit");
  }
  c.expect(same_tree(dir / "a", dir / "b", why), "phantom outputs: " + why);
  const auto maps = [&](const std::filesystem::path& out, const std::string& tile) {
    const auto t = dir / "a";
    return std::vector<std::string>{"run", "--acini-map", (t / "acini_map.fmap").string(), "--tdlu-map",
                                    (t / "tdlu_map.fmap").string(), "--adipose-map", (t / "adipose_map.fmap").string(),
                                    "--tissue-mask", (t / "tissue_mask.fmap").string(), "--config", cfg.string(),
                                    "--tile-size", tile, "--overlays", "--out", out.string()};
  };
  c.expect(run_cli(maps(dir / "p1", "1024"), dir / "run.log", {"INVOLUKIT_THREADS=1"}).status == 0, "run 1");
  c.expect(run_cli(maps(dir / "p2", "1024"), dir / "run.log", {"INVOLUKIT_THREADS=3"}).status == 0, "run 2");
  c.expect(run_cli(maps(dir / "p3", "1024"), dir / "run.log", {"INVOLUKIT_THREADS=1"}).status == 0, "run 3");
  c.expect(same_tree(dir / "p1", dir / "p3", why), "repeated run: " + why);
  c.expect(same_tree(dir / "p1", dir / "p2", why), "thread count: " + why);

  PhantomConfig pc;
  pc.canvas = RasterMeta{2048, 2048, 0.32};
  pc.n_tdlus = {2, 4};
  pc.tdlu_radius_um = {30.0, 50.0};
  pc.seed = 5;
  c.expect(generate_scene(pc) == generate_scene(pc), "scene generation");
  c.detail << "phantom twice, run three times (threads 1, 3, 1), in-process scene twice";
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"involukit acceptance checks"};
  std::vector<std::string> only;
  app.add_option("--only", only, "Run only the named criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"closed_loop_phantom", closed_loop},
      {"tiling_transparency", tiling_transparency},
      {"postprocessing_rule_fidelity", rule_fidelity},
      {"region_moments", moments},
      {"statistics_oracles", statistics},
      {"calibration_semantics", calibration},
      {"memory_bound", memory_bound},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << "exception: " << e.what();
    }
    failed += !c.ok;
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << " | " << c.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
