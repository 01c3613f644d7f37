#include "involukit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "involukit/kernels.hpp"
#include "involukit/tiled.hpp"
#include "involukit/version.hpp"

namespace involukit {

namespace {

constexpr double kTdluLow = 0.1;
constexpr double kTdluHigh = 0.9;
constexpr double kAdiposeLow = 0.25;
constexpr double kAdiposeHigh = 0.95;
constexpr double kAcinusMarginPx = 20.0;
constexpr double kTdluGapPx = 40.0;
constexpr double kTissueMarginPx = 30.0;
constexpr double kOrphanClearancePx = 30.0;
constexpr int kHarmonics = 3;
constexpr double kTdluMaxAmplitude = 0.08;
constexpr double kBlobMaxAmplitude = 0.1;

// splitmix64; split() derives an independent stream from the current state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  Rng split(std::uint64_t tag) const {
    Rng child(state_ ^ (tag * 0xD1B54A32D192ED03ull));
    child.next();
    return child;
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }

 private:
  std::uint64_t state_;
};

struct Blob {
  Polygon poly;
  Point center;
  double max_radius = 0.0;
};

Blob random_star(Rng& rng, const Point& center, double radius, double max_amplitude) {
  std::vector<double> amps(kHarmonics), phases(kHarmonics);
  double total = 0.0;
  for (int m = 0; m < kHarmonics; ++m) {
    amps[m] = rng.uniform(0.0, max_amplitude);
    phases[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    total += amps[m];
  }
  return Blob{star_polygon(center, radius, amps, phases), center, radius * (1.0 + total)};
}

double dist(const Point& a, const Point& b) { return std::hypot(a.row - b.row, a.col - b.col); }

Point point_in_box(Rng& rng, const BoundingBox& box) {
  const double r = rng.uniform(box.row_min, box.row_max);
  const double c = rng.uniform(box.col_min, box.col_max);
  return {r, c};
}

bool inside_with_margin(const Polygon& poly, const Point& p, double margin) {
  return point_in_polygon(poly, p) && distance_to_boundary(poly, p) >= margin;
}

bool far_from_points(const std::vector<Point>& points, const Point& p, double spacing) {
  return std::all_of(points.begin(), points.end(), [&](const Point& q) { return dist(p, q) >= spacing; });
}

std::int64_t draw_count(Rng& rng, const std::vector<WeightedRange>& dist) {
  double total = 0.0;
  for (const auto& w : dist) total += w.weight;
  double u = rng.uniform() * total;
  for (const auto& w : dist) {
    if (u < w.weight) return rng.integer(w.lo, w.hi);
    u -= w.weight;
  }
  return rng.integer(dist.back().lo, dist.back().hi);
}

template <typename T>
void render_levels(const std::vector<Polygon>& polys, const std::vector<BoundingBox>& boxes, T background,
                   T foreground, const Rect& window, std::span<T> out) {
  require(static_cast<std::int64_t>(out.size()) == window.area(), "render window size mismatch");
  std::fill(out.begin(), out.end(), background);
  for (std::size_t i = 0; i < polys.size(); ++i) {
    const auto& b = boxes[i];
    if (b.row_max < static_cast<double>(window.row0) || b.row_min > static_cast<double>(window.row1() - 1) ||
        b.col_max < static_cast<double>(window.col0) || b.col_min > static_cast<double>(window.col1() - 1))
      continue;
    const auto r0 = std::max(window.row0, static_cast<std::int64_t>(std::ceil(b.row_min)));
    const auto r1 = std::min(window.row1() - 1, static_cast<std::int64_t>(std::floor(b.row_max)));
    for (std::int64_t r = r0; r <= r1; ++r) {
      T* row = out.data() + (r - window.row0) * window.cols - window.col0;
      polygon_row_spans(polys[i], r, window.col0, window.col1(),
                        [&](std::int64_t c0, std::int64_t c1) { std::fill(row + c0, row + c1, foreground); });
    }
  }
}

// Blurred two-level rendering. Pixels farther than `radius` from every box
// get the blurred background, computed by the same kernel on a constant
// block; only the neighborhoods of boxes are blurred for real.
void blur_levels(const std::vector<Polygon>& polys, const std::vector<BoundingBox>& boxes, float background,
                 float foreground, int radius, std::span<const float> taps, const Rect& window, std::span<float> out) {
  const std::int64_t side = 2 * radius + 1;
  const std::vector<float> flat(static_cast<std::size_t>(side * side), background);
  float blurred_background = 0.0f;
  kernels::serial::separable_blur(flat, 1, 1, taps, std::span<float>(&blurred_background, 1));
  std::fill(out.begin(), out.end(), blurred_background);

  std::vector<float> base, block;
  for (const auto& b : boxes) {
    const auto r0 = std::max(window.row0, static_cast<std::int64_t>(std::ceil(b.row_min)) - radius);
    const auto r1 = std::min(window.row1(), static_cast<std::int64_t>(std::floor(b.row_max)) + radius + 1);
    const auto c0 = std::max(window.col0, static_cast<std::int64_t>(std::ceil(b.col_min)) - radius);
    const auto c1 = std::min(window.col1(), static_cast<std::int64_t>(std::floor(b.col_max)) + radius + 1);
    if (r0 >= r1 || c0 >= c1) continue;
    const Rect target{r0, c0, r1 - r0, c1 - c0};
    const Rect padded{r0 - radius, c0 - radius, target.rows + 2 * radius, target.cols + 2 * radius};
    base.resize(static_cast<std::size_t>(padded.area()));
    block.resize(static_cast<std::size_t>(target.area()));
    render_levels<float>(polys, boxes, background, foreground, padded, base);
    kernels::omp::separable_blur(base, target.rows, target.cols, taps, block);
    for (std::int64_t r = 0; r < target.rows; ++r)
      std::copy_n(block.begin() + r * target.cols, target.cols,
                  out.begin() + (r0 - window.row0 + r) * window.cols + (c0 - window.col0));
  }
}

[[noreturn]] void exhausted(const std::string& what) { fail(ErrorCode::PlacementExhausted, what); }

}  // namespace

void PhantomConfig::validate() const {
  canvas.validate();
  require(n_tdlus.lo >= 0 && n_tdlus.lo <= n_tdlus.hi, "n_tdlus range is empty");
  require(!acini_per_tdlu.empty(), "acini_per_tdlu needs at least one range");
  for (const auto& w : acini_per_tdlu)
    require(w.lo >= 0 && w.lo <= w.hi && w.weight > 0.0, "acini_per_tdlu ranges must be nonempty with positive weight");
  require(tdlu_radius_um.lo > 0.0 && tdlu_radius_um.lo <= tdlu_radius_um.hi, "tdlu_radius_um range is empty");
  require(acinus_spacing_um > 0.0, "acinus_spacing_um must be positive");
  require(adipose_blob_fraction.lo >= 0.0 && adipose_blob_fraction.lo <= adipose_blob_fraction.hi &&
              adipose_blob_fraction.hi < 1.0,
          "adipose_blob_fraction must be a range inside [0,1)");
  require(orphan_acini.lo >= 0 && orphan_acini.lo <= orphan_acini.hi, "orphan_acini range is empty");
  require(acinus_sigma_px > 0.0, "acinus_sigma_px must be positive");
  require(noise.gaussian_sigma >= 0.0 && noise.gaussian_sigma <= 1.0, "gaussian_sigma must be in [0,1]");
  require(noise.blur_sigma >= 0.0 && noise.blur_sigma <= 10.0, "blur_sigma must be in [0,10]");
  require(noise.false_blob_rate >= 0.0, "false_blob_rate must be >= 0");
  require(retry_budget >= 1, "retry_budget must be >= 1");
}

CentroidSet Scene::all_acini() const {
  CentroidSet set;
  set.meta = canvas;
  for (const auto& list : acini) set.points.insert(set.points.end(), list.begin(), list.end());
  set.points.insert(set.points.end(), orphan_acini.begin(), orphan_acini.end());
  return set;
}

InvolutionReport analytic_measures(const Scene& scene, const CalibrationModel& cal, const ReportOptions& options) {
  const double mpp = scene.canvas.microns_per_pixel;
  const double pixel_mm2 = scene.canvas.pixel_area_mm2();
  std::vector<TdluRegion> regions;
  std::vector<std::int64_t> counts;
  for (std::size_t i = 0; i < scene.tdlus.size(); ++i) {
    const auto pm = polygon_moments(scene.tdlus[i]);
    TdluRegion region;
    region.stats.label = static_cast<std::int32_t>(i + 1);
    region.stats.area_px = std::llround(pm.area);
    region.stats.centroid = pm.centroid;
    region.stats.cov = pm.cov;
    region.stats.major_axis_px = pm.major_axis;
    region.stats.minor_axis_px = pm.minor_axis;
    region.span_um = pm.major_axis * mpp;
    region.area_mm2 = pm.area * pixel_mm2;
    regions.push_back(region);
    counts.push_back(static_cast<std::int64_t>(scene.acini[i].size()));
  }
  const double tissue_px = polygon_area(scene.tissue);
  double adipose_px = 0.0;
  for (const auto& a : scene.adipose) adipose_px += polygon_area(a);
  AreaSummary area;
  area.tissue_area_mm2 = tissue_px * pixel_mm2;
  area.adipose_fraction = adipose_px / tissue_px;
  area.adjusted_area_mm2 = area.tissue_area_mm2 * (1.0 - area.adipose_fraction);

  auto rep = compute_report(regions, counts, static_cast<std::int64_t>(scene.orphan_acini.size()), area, cal, options);
  rep.slide_id = "phantom-" + std::to_string(scene.seed);
  rep.provenance.tool_version = std::string(kVersion);
  rep.provenance.width = scene.canvas.width;
  rep.provenance.height = scene.canvas.height;
  rep.provenance.microns_per_pixel = mpp;
  return rep;
}

Scene generate_scene(const PhantomConfig& cfg, const CalibrationModel& cal, const ReportOptions& options) {
  cfg.validate();
  cal.validate();
  const Rng root(cfg.seed);
  Rng tissue_rng = root.split(1);
  Rng tdlu_rng = root.split(2);
  Rng acini_rng = root.split(3);
  Rng adipose_rng = root.split(4);
  Rng orphan_rng = root.split(5);
  Rng distractor_rng = root.split(6);

  Scene scene;
  scene.canvas = cfg.canvas;
  scene.seed = cfg.seed;
  const double mpp = cfg.canvas.microns_per_pixel;
  const auto h = static_cast<double>(cfg.canvas.height);
  const auto w = static_cast<double>(cfg.canvas.width);
  const double spacing = cfg.acinus_spacing_um / mpp;

  const double tissue_radius = 0.42 * std::min(h, w);
  const Point tissue_center{0.5 * h + tissue_rng.uniform(-0.01, 0.01) * h, 0.5 * w + tissue_rng.uniform(-0.01, 0.01) * w};
  const Blob tissue = random_star(tissue_rng, tissue_center, tissue_radius, 0.05);
  scene.tissue = tissue.poly;
  const BoundingBox tissue_box = bounding_box(tissue.poly);

  // TDLUs with their acini.
  std::vector<Blob> tdlus;
  std::vector<Point> all_acini;
  const std::int64_t n_tdlus = tdlu_rng.integer(cfg.n_tdlus.lo, cfg.n_tdlus.hi);
  const double r_lo = cfg.tdlu_radius_um.lo / mpp;
  const double r_hi = cfg.tdlu_radius_um.hi / mpp;
  for (std::int64_t i = 0; i < n_tdlus; ++i) {
    bool placed = false;
    for (std::int64_t attempt = 0; attempt < cfg.retry_budget && !placed; ++attempt) {
      const std::int64_t count = draw_count(tdlu_rng, cfg.acini_per_tdlu);
      const double needed =
          (std::sqrt(static_cast<double>(count) * spacing * spacing * 2.5 / std::numbers::pi) + kAcinusMarginPx) /
          (1.0 - kHarmonics * kTdluMaxAmplitude);
      const double lo = std::max(r_lo, needed);
      if (lo > r_hi) continue;
      const double radius = tdlu_rng.uniform(lo, r_hi);
      const Point center = point_in_box(tdlu_rng, tissue_box);
      Blob blob = random_star(tdlu_rng, center, radius, kTdluMaxAmplitude);
      if (!inside_with_margin(tissue.poly, center, blob.max_radius + kTissueMarginPx)) continue;
      const bool clear = std::all_of(tdlus.begin(), tdlus.end(), [&](const Blob& o) {
        return dist(o.center, center) >= o.max_radius + blob.max_radius + kTdluGapPx;
      });
      if (!clear) continue;

      std::vector<Point> acini;
      const BoundingBox box = bounding_box(blob.poly);
      const std::int64_t tries = 500 * std::max<std::int64_t>(count, 1);
      for (std::int64_t t = 0; t < tries && static_cast<std::int64_t>(acini.size()) < count; ++t) {
        const Point p = point_in_box(acini_rng, box);
        if (inside_with_margin(blob.poly, p, kAcinusMarginPx) && far_from_points(acini, p, spacing) &&
            far_from_points(all_acini, p, spacing))
          acini.push_back(p);
      }
      if (static_cast<std::int64_t>(acini.size()) < count) continue;
      all_acini.insert(all_acini.end(), acini.begin(), acini.end());
      scene.tdlus.push_back(blob.poly);
      scene.acini.push_back(std::move(acini));
      tdlus.push_back(std::move(blob));
      placed = true;
    }
    if (!placed) exhausted("could not place TDLU " + std::to_string(i + 1) + " of " + std::to_string(n_tdlus));
  }

  // Adipose blobs, disjoint from TDLUs and each other.
  const double tissue_area = polygon_area(tissue.poly);
  const double target = adipose_rng.uniform(cfg.adipose_blob_fraction.lo, cfg.adipose_blob_fraction.hi) * tissue_area;
  double adipose_area = 0.0;
  std::vector<Blob> adipose;
  for (std::int64_t attempt = 0; attempt < cfg.retry_budget && adipose_area < target; ++attempt) {
    const double radius = adipose_rng.uniform(0.03, 0.12) * tissue_radius;
    const Point center = point_in_box(adipose_rng, tissue_box);
    Blob blob = random_star(adipose_rng, center, radius, kBlobMaxAmplitude);
    if (!inside_with_margin(tissue.poly, center, blob.max_radius + 10.0)) continue;
    const bool clear_tdlu = std::all_of(tdlus.begin(), tdlus.end(), [&](const Blob& o) {
      return dist(o.center, center) >= o.max_radius + blob.max_radius + kTdluGapPx;
    });
    const bool clear_fat = std::all_of(adipose.begin(), adipose.end(), [&](const Blob& o) {
      return dist(o.center, center) >= o.max_radius + blob.max_radius + 10.0;
    });
    if (!clear_tdlu || !clear_fat) continue;
    adipose_area += polygon_area(blob.poly);
    scene.adipose.push_back(blob.poly);
    adipose.push_back(std::move(blob));
  }
  if (adipose_area < cfg.adipose_blob_fraction.lo * tissue_area) exhausted("could not reach the adipose fraction");

  // Orphan acini in tissue, clear of every TDLU.
  const std::int64_t n_orphans = orphan_rng.integer(cfg.orphan_acini.lo, cfg.orphan_acini.hi);
  for (std::int64_t i = 0; i < n_orphans; ++i) {
    bool placed = false;
    for (std::int64_t attempt = 0; attempt < cfg.retry_budget && !placed; ++attempt) {
      const Point p = point_in_box(orphan_rng, tissue_box);
      if (!inside_with_margin(tissue.poly, p, kOrphanClearancePx)) continue;
      const bool clear = std::all_of(tdlus.begin(), tdlus.end(), [&](const Blob& o) {
        return !point_in_polygon(o.poly, p) && distance_to_boundary(o.poly, p) >= kOrphanClearancePx;
      });
      if (!clear || !far_from_points(all_acini, p, spacing)) continue;
      all_acini.push_back(p);
      scene.orphan_acini.push_back(p);
      placed = true;
    }
    if (!placed) exhausted("could not place an orphan acinus");
  }

  // Distractor blobs below the TDLU area rule.
  const double canvas_mm2 = static_cast<double>(cfg.canvas.pixel_count()) * cfg.canvas.pixel_area_mm2();
  const auto n_distractors = static_cast<std::int64_t>(std::llround(cfg.noise.false_blob_rate * canvas_mm2));
  std::vector<Blob> distractors;
  for (std::int64_t i = 0; i < n_distractors; ++i) {
    bool placed = false;
    for (std::int64_t attempt = 0; attempt < cfg.retry_budget && !placed; ++attempt) {
      const double radius = distractor_rng.uniform(8.0, 20.0);
      const Point center = point_in_box(distractor_rng, tissue_box);
      Blob blob = random_star(distractor_rng, center, radius, kBlobMaxAmplitude);
      if (!inside_with_margin(tissue.poly, center, blob.max_radius + 5.0)) continue;
      const bool clear_tdlu = std::all_of(tdlus.begin(), tdlus.end(), [&](const Blob& o) {
        return dist(o.center, center) >= o.max_radius + blob.max_radius + kTdluGapPx;
      });
      const bool clear_other = std::all_of(distractors.begin(), distractors.end(), [&](const Blob& o) {
        return dist(o.center, center) >= o.max_radius + blob.max_radius + 30.0;
      });
      if (!clear_tdlu || !clear_other) continue;
      scene.distractors.push_back(blob.poly);
      distractors.push_back(std::move(blob));
      placed = true;
    }
    if (!placed) exhausted("could not place a distractor blob");
  }

  scene.true_measures = analytic_measures(scene, cal, options);
  return scene;
}

PhantomRenderer::PhantomRenderer(Scene scene, PhantomConfig cfg) : scene_(std::move(scene)), cfg_(std::move(cfg)) {
  cfg_.validate();
  require(scene_.canvas == cfg_.canvas, "scene and config disagree on the canvas");
  tdlu_layer_ = scene_.tdlus;
  tdlu_layer_.insert(tdlu_layer_.end(), scene_.distractors.begin(), scene_.distractors.end());
  for (const auto& p : tdlu_layer_) tdlu_boxes_.push_back(bounding_box(p));
  for (const auto& p : scene_.adipose) adipose_boxes_.push_back(bounding_box(p));
  for (const auto& p : scene_.tdlus) truth_boxes_.push_back(bounding_box(p));
  tissue_box_.push_back(bounding_box(scene_.tissue));
  acini_points_ = scene_.all_acini().points;
}

void PhantomRenderer::render(PhantomLayer layer, const Rect& window, std::span<float> out) const {
  require(static_cast<std::int64_t>(out.size()) == window.area(), "render window size mismatch");
  std::uint32_t stream = 0;
  if (layer == PhantomLayer::Acini) {
    std::fill(out.begin(), out.end(), 0.0f);
    render_soft_centroids_window(acini_points_, cfg_.acinus_sigma_px, window, out);
    stream = 1;
  } else {
    const bool tdlu = layer == PhantomLayer::Tdlu;
    const auto& polys = tdlu ? tdlu_layer_ : scene_.adipose;
    const auto& boxes = tdlu ? tdlu_boxes_ : adipose_boxes_;
    const auto lo = static_cast<float>(tdlu ? kTdluLow : kAdiposeLow);
    const auto hi = static_cast<float>(tdlu ? kTdluHigh : kAdiposeHigh);
    stream = tdlu ? 2 : 3;
    const int radius = std::min(31, static_cast<int>(std::ceil(3.0 * cfg_.noise.blur_sigma)));
    if (radius == 0) {
      render_levels<float>(polys, boxes, lo, hi, window, out);
    } else {
      const auto all_taps = kernels::gaussian_taps(cfg_.noise.blur_sigma, radius);
      const std::span<const float> taps(all_taps.data(), static_cast<std::size_t>(2 * radius + 1));
      blur_levels(polys, boxes, lo, hi, radius, taps, window, out);
    }
  }
  const kernels::NoiseSpec spec{cfg_.seed, stream, static_cast<float>(cfg_.noise.gaussian_sigma), meta().width};
  kernels::omp::add_noise_clamped(out, window.rows, window.cols, window.row0, window.col0, spec);
}

void PhantomRenderer::render_tissue(const Rect& window, std::span<std::uint8_t> out) const {
  render_levels<std::uint8_t>({scene_.tissue}, tissue_box_, 0, 1, window, out);
}

void PhantomRenderer::render_truth_tdlu(const Rect& window, std::span<std::uint8_t> out) const {
  render_levels<std::uint8_t>(scene_.tdlus, truth_boxes_, 0, 1, window, out);
}

PhantomMaps render_prediction_maps(const Scene& scene, const PhantomConfig& cfg) {
  const PhantomRenderer renderer(scene, cfg);
  const RasterMeta& meta = scene.canvas;
  const Rect full{0, 0, meta.height, meta.width};
  PhantomMaps maps{PredictionMap(meta, 0.0f), PredictionMap(meta, 0.0f), PredictionMap(meta, 0.0f),
                   BinaryMask(meta, std::uint8_t{0})};
  renderer.render(PhantomLayer::Acini, full, maps.acini_map.values());
  renderer.render(PhantomLayer::Tdlu, full, maps.tdlu_map.values());
  renderer.render(PhantomLayer::Adipose, full, maps.adipose_map.values());
  renderer.render_tissue(full, maps.tissue_mask.values());
  return maps;
}

void write_phantom_maps(const PhantomRenderer& renderer, const std::filesystem::path& dir, std::int64_t band_rows) {
  require(band_rows >= 1, "band_rows must be >= 1");
  std::filesystem::create_directories(dir);
  const RasterMeta& meta = renderer.meta();
  FmapWriter acini(dir / "acini_map.fmap", meta, PixelType::F32);
  FmapWriter tdlu(dir / "tdlu_map.fmap", meta, PixelType::F32);
  FmapWriter adipose(dir / "adipose_map.fmap", meta, PixelType::F32);
  FmapWriter tissue(dir / "tissue_mask.fmap", meta, PixelType::U8);
  FmapWriter truth(dir / "truth_tdlu_mask.fmap", meta, PixelType::U8);
  const std::int64_t bands = (meta.height + band_rows - 1) / band_rows;
  parallel_for(bands, [&](std::int64_t b) {
    const Rect band{b * band_rows, 0, std::min(band_rows, meta.height - b * band_rows), meta.width};
    std::vector<float> values(static_cast<std::size_t>(band.area()));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(band.area()));
    renderer.render(PhantomLayer::Acini, band, values);
    acini.write(band, values);
    renderer.render(PhantomLayer::Tdlu, band, values);
    tdlu.write(band, values);
    renderer.render(PhantomLayer::Adipose, band, values);
    adipose.write(band, values);
    renderer.render_tissue(band, bits);
    tissue.write(band, bits);
    renderer.render_truth_tdlu(band, bits);
    truth.write(band, bits);
  });
  for (auto* w : {&acini, &tdlu, &adipose, &tissue, &truth}) w->close();
}

}  // namespace involukit
