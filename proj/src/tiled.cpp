#include "involukit/tiled.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <numeric>

#include "involukit/kernels.hpp"

namespace involukit {

namespace {

struct UnionFind {
  std::vector<std::int32_t> parent;

  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

// Calls link(i, j) for every pair of runs from two vertically adjacent rows
// that touch under the given connectivity. Both lists are sorted and disjoint.
template <typename Link>
void link_rows(std::span<const Run> upper, std::span<const Run> lower, int ext, Link&& link) {
  std::size_t j0 = 0;
  for (std::size_t i = 0; i < upper.size(); ++i) {
    const Run a = upper[i];
    while (j0 < lower.size() && lower[j0].c1 + ext <= a.c0) ++j0;
    for (std::size_t j = j0; j < lower.size() && lower[j].c0 < a.c1 + ext; ++j) link(i, j);
  }
}

int reach(Connectivity c) { return c == Connectivity::Eight ? 1 : 0; }

struct LocalComponents {
  std::vector<std::int32_t> run_component;
  std::vector<MomentSums> moments;
  std::vector<std::int64_t> first_pixel;
  std::vector<std::uint8_t> border;
};

LocalComponents label_tile(const TileRuns& t, const Rect& rect, const RasterMeta& meta, Connectivity conn) {
  LocalComponents out;
  const auto n = t.runs.size();
  UnionFind uf(n);
  const int ext = reach(conn);
  for (std::int64_t lr = 1; lr < rect.rows; ++lr) {
    const auto prev_base = t.row_start[lr - 1];
    const auto cur_base = t.row_start[lr];
    link_rows(t.row(lr - 1), t.row(lr), ext, [&](std::size_t i, std::size_t j) {
      uf.unite(static_cast<std::int32_t>(prev_base + i), static_cast<std::int32_t>(cur_base + j));
    });
  }
  out.run_component.assign(n, -1);
  std::vector<std::int32_t> dense(n, -1);
  for (std::int64_t lr = 0; lr < rect.rows; ++lr) {
    const std::int64_t r = rect.row0 + lr;
    for (auto k = t.row_start[lr]; k < t.row_start[lr + 1]; ++k) {
      const auto root = uf.find(static_cast<std::int32_t>(k));
      if (dense[root] < 0) {
        dense[root] = static_cast<std::int32_t>(out.moments.size());
        out.moments.emplace_back();
        out.first_pixel.push_back(r * meta.width + t.runs[k].c0);
        out.border.push_back(0);
      }
      const auto id = dense[root];
      const Run run = t.runs[k];
      out.run_component[k] = id;
      out.moments[id].add_run(r, run.c0, run.c1);
      if (r == 0 || r == meta.height - 1 || run.c0 == 0 || run.c1 == meta.width) out.border[id] = 1;
    }
  }
  return out;
}

std::size_t find_run(std::span<const Run> runs, std::int64_t c) {
  auto it = std::upper_bound(runs.begin(), runs.end(), c, [](std::int64_t v, const Run& r) { return v < r.c0; });
  if (it == runs.begin()) return runs.size();
  --it;
  return c < it->c1 ? static_cast<std::size_t>(it - runs.begin()) : runs.size();
}

template <typename Keep>
TiledMask filter_runs(const TiledMask& mask, Keep&& keep) {
  TiledMask out(mask.grid());
  parallel_for(mask.grid().count(), [&](std::int64_t i) {
    const auto& src = mask.tile(i);
    auto& dst = out.tile(i);
    dst.row_start.assign(src.row_start.size(), 0);
    dst.runs.clear();
    for (std::size_t lr = 0; lr + 1 < src.row_start.size(); ++lr) {
      for (auto k = src.row_start[lr]; k < src.row_start[lr + 1]; ++k)
        if (keep(i, k)) dst.runs.push_back(src.runs[k]);
      dst.row_start[lr + 1] = static_cast<std::uint32_t>(dst.runs.size());
    }
  });
  return out;
}

}  // namespace

TileGrid::TileGrid(RasterMeta meta, std::int64_t tile_size) : meta_(meta), tile_size_(tile_size) {
  meta_.validate();
  require(tile_size >= 1, "tile size must be >= 1");
  tiles_x_ = (meta.width + tile_size - 1) / tile_size;
  tiles_y_ = (meta.height + tile_size - 1) / tile_size;
}

Rect TileGrid::tile(std::int64_t index) const {
  const std::int64_t ty = index / tiles_x_;
  const std::int64_t tx = index % tiles_x_;
  const std::int64_t r0 = ty * tile_size_;
  const std::int64_t c0 = tx * tile_size_;
  return Rect{r0, c0, std::min(tile_size_, meta_.height - r0), std::min(tile_size_, meta_.width - c0)};
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

TileRuns TileRuns::encode(std::span<const std::uint8_t> bits, const Rect& window) {
  require(static_cast<std::int64_t>(bits.size()) == window.area(), "tile buffer size mismatch");
  TileRuns t;
  t.row_start.reserve(static_cast<std::size_t>(window.rows) + 1);
  t.row_start.push_back(0);
  for (std::int64_t r = 0; r < window.rows; ++r) {
    const std::uint8_t* row = bits.data() + r * window.cols;
    std::int64_t c = 0;
    while (c < window.cols) {
      while (c < window.cols && !row[c]) ++c;
      if (c == window.cols) break;
      const std::int64_t start = c;
      while (c < window.cols && row[c]) ++c;
      t.runs.push_back({static_cast<std::int32_t>(window.col0 + start), static_cast<std::int32_t>(window.col0 + c)});
    }
    t.row_start.push_back(static_cast<std::uint32_t>(t.runs.size()));
  }
  return t;
}

TiledMask::TiledMask(TileGrid grid) : grid_(std::move(grid)) {
  tiles_.resize(static_cast<std::size_t>(grid_.count()));
  for (std::int64_t i = 0; i < grid_.count(); ++i)
    tiles_[i].row_start.assign(static_cast<std::size_t>(grid_.tile(i).rows) + 1, 0);
}

TiledMask TiledMask::build(const TileGrid& grid,
                           const std::function<void(std::int64_t, const Rect&, std::span<std::uint8_t>)>& fill) {
  TiledMask out(grid);
  parallel_for(grid.count(), [&](std::int64_t i) {
    const Rect rect = grid.tile(i);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(rect.area()), 0);
    fill(i, rect, bits);
    out.tiles_[static_cast<std::size_t>(i)] = TileRuns::encode(bits, rect);
  });
  return out;
}

TiledMask TiledMask::from_mask(const BinaryMask& mask, std::int64_t tile_size) {
  return build(TileGrid(mask.meta(), tile_size), [&](std::int64_t, const Rect& rect, std::span<std::uint8_t> bits) {
    for (std::int64_t r = 0; r < rect.rows; ++r) {
      const auto row = mask.row(rect.row0 + r);
      std::copy_n(row.begin() + rect.col0, rect.cols, bits.begin() + r * rect.cols);
    }
  });
}

std::int64_t TiledMask::count() const {
  std::int64_t n = 0;
  for (const auto& t : tiles_)
    for (const auto& r : t.runs) n += r.c1 - r.c0;
  return n;
}

std::int64_t TiledMask::run_count() const {
  std::int64_t n = 0;
  for (const auto& t : tiles_) n += static_cast<std::int64_t>(t.runs.size());
  return n;
}

bool TiledMask::at(std::int64_t r, std::int64_t c) const {
  const auto ts = grid_.tile_size();
  const std::int64_t index = (r / ts) * grid_.tiles_x() + c / ts;
  const auto runs = tile(index).row(r - grid_.tile(index).row0);
  return find_run(runs, c) < runs.size();
}

void TiledMask::read_window(const Rect& window, std::span<std::uint8_t> out, bool replicate) const {
  require(static_cast<std::int64_t>(out.size()) == window.area(), "window buffer size mismatch");
  std::fill(out.begin(), out.end(), std::uint8_t{0});
  const std::int64_t w = meta().width;
  const std::int64_t h = meta().height;
  const std::int64_t ts = grid_.tile_size();
  const std::int64_t lo = std::max<std::int64_t>(0, window.col0);
  const std::int64_t hi = std::min(w, window.col1());
  for (std::int64_t r = 0; r < window.rows; ++r) {
    std::int64_t sr = window.row0 + r;
    if (sr < 0 || sr >= h) {
      if (!replicate) continue;
      sr = std::clamp<std::int64_t>(sr, 0, h - 1);
    }
    std::uint8_t* dst = out.data() + r * window.cols;
    const std::int64_t ty = sr / ts;
    if (lo < hi) {
      for (std::int64_t tx = lo / ts; tx <= (hi - 1) / ts; ++tx) {
        const std::int64_t index = ty * grid_.tiles_x() + tx;
        for (const Run& run : tile(index).row(sr - grid_.tile(index).row0)) {
          const std::int64_t a = std::max<std::int64_t>(run.c0, lo);
          const std::int64_t b = std::min<std::int64_t>(run.c1, hi);
          if (a < b) std::fill(dst + (a - window.col0), dst + (b - window.col0), std::uint8_t{1});
        }
      }
    }
    if (replicate) {
      if (window.col0 < 0) std::fill(dst, dst + std::min(window.cols, -window.col0), std::uint8_t{at(sr, 0)});
      if (window.col1() > w)
        std::fill(dst + std::max<std::int64_t>(0, w - window.col0), dst + window.cols, std::uint8_t{at(sr, w - 1)});
    }
  }
}

BinaryMask TiledMask::to_mask() const {
  BinaryMask mask(meta(), std::uint8_t{0});
  for (std::int64_t i = 0; i < grid_.count(); ++i) {
    const Rect rect = grid_.tile(i);
    for (std::int64_t lr = 0; lr < rect.rows; ++lr) {
      auto row = mask.row(rect.row0 + lr);
      for (const Run& run : tile(i).row(lr)) std::fill(row.begin() + run.c0, row.begin() + run.c1, std::uint8_t{1});
    }
  }
  return mask;
}

TiledMask TiledMask::complement() const {
  TiledMask out(grid_);
  parallel_for(grid_.count(), [&](std::int64_t i) {
    const Rect rect = grid_.tile(i);
    const auto& src = tile(i);
    auto& dst = out.tiles_[static_cast<std::size_t>(i)];
    dst.runs.clear();
    for (std::int64_t lr = 0; lr < rect.rows; ++lr) {
      auto c = static_cast<std::int32_t>(rect.col0);
      for (const Run& run : src.row(lr)) {
        if (run.c0 > c) dst.runs.push_back({c, run.c0});
        c = run.c1;
      }
      if (c < rect.col1()) dst.runs.push_back({c, static_cast<std::int32_t>(rect.col1())});
      dst.row_start[lr + 1] = static_cast<std::uint32_t>(dst.runs.size());
    }
  });
  return out;
}

TiledMask TiledMask::intersect(const TiledMask& other) const {
  require(grid_ == other.grid_, "intersect needs masks on the same tile grid");
  TiledMask out(grid_);
  parallel_for(grid_.count(), [&](std::int64_t i) {
    const Rect rect = grid_.tile(i);
    auto& dst = out.tiles_[static_cast<std::size_t>(i)];
    dst.runs.clear();
    for (std::int64_t lr = 0; lr < rect.rows; ++lr) {
      const auto a = tile(i).row(lr);
      const auto b = other.tile(i).row(lr);
      std::size_t p = 0, q = 0;
      while (p < a.size() && q < b.size()) {
        const auto lo = std::max(a[p].c0, b[q].c0);
        const auto hi = std::min(a[p].c1, b[q].c1);
        if (lo < hi) dst.runs.push_back({lo, hi});
        if (a[p].c1 < b[q].c1)
          ++p;
        else
          ++q;
      }
      dst.row_start[lr + 1] = static_cast<std::uint32_t>(dst.runs.size());
    }
  });
  return out;
}

std::int32_t TiledComponents::label_at(const TiledMask& mask, std::int64_t r, std::int64_t c) const {
  const auto& grid = mask.grid();
  const auto ts = grid.tile_size();
  const std::int64_t index = (r / ts) * grid.tiles_x() + c / ts;
  const auto& t = mask.tile(index);
  const std::int64_t lr = r - grid.tile(index).row0;
  const auto runs = t.row(lr);
  const auto k = find_run(runs, c);
  if (k == runs.size()) return 0;
  return labels[static_cast<std::size_t>(index)][t.row_start[lr] + k];
}

TiledComponents merge_components_across_tiles(const TiledMask& mask, Connectivity connectivity) {
  const TileGrid& grid = mask.grid();
  const RasterMeta& meta = mask.meta();
  const auto n_tiles = static_cast<std::size_t>(grid.count());
  std::vector<LocalComponents> local(n_tiles);
  parallel_for(grid.count(), [&](std::int64_t i) {
    local[static_cast<std::size_t>(i)] = label_tile(mask.tile(i), grid.tile(i), meta, connectivity);
  });

  std::vector<std::int32_t> offset(n_tiles + 1, 0);
  for (std::size_t i = 0; i < n_tiles; ++i)
    offset[i + 1] = offset[i] + static_cast<std::int32_t>(local[i].moments.size());
  UnionFind uf(static_cast<std::size_t>(offset[n_tiles]));
  const int ext = reach(connectivity);
  auto global_id = [&](std::int64_t tile, std::size_t run) {
    return offset[tile] + local[static_cast<std::size_t>(tile)].run_component[run];
  };

  // Vertical seams: the last run of a row on the left against the first run
  // of the same or a diagonal row on the right.
  for (std::int64_t ty = 0; ty < grid.tiles_y(); ++ty) {
    for (std::int64_t tx = 0; tx + 1 < grid.tiles_x(); ++tx) {
      const std::int64_t li = ty * grid.tiles_x() + tx;
      const std::int64_t ri = li + 1;
      const Rect rect = grid.tile(li);
      const auto seam = static_cast<std::int32_t>(rect.col1());
      const auto& lt = mask.tile(li);
      const auto& rt = mask.tile(ri);
      for (std::int64_t lr = 0; lr < rect.rows; ++lr) {
        const auto lrow = lt.row(lr);
        if (lrow.empty() || lrow.back().c1 != seam) continue;
        const auto a = global_id(li, lt.row_start[lr] + lrow.size() - 1);
        for (std::int64_t rr = std::max<std::int64_t>(0, lr - ext); rr <= std::min(rect.rows - 1, lr + ext); ++rr) {
          const auto rrow = rt.row(rr);
          if (!rrow.empty() && rrow.front().c0 == seam) uf.unite(a, global_id(ri, rt.row_start[rr]));
        }
      }
    }
  }

  // Horizontal seams: full raster rows on either side, which also covers
  // diagonal contact across tile corners.
  struct SeamRun {
    Run run;
    std::int32_t id;
  };
  std::vector<SeamRun> upper, lower;
  std::vector<Run> upper_runs, lower_runs;
  for (std::int64_t ty = 0; ty + 1 < grid.tiles_y(); ++ty) {
    upper.clear();
    lower.clear();
    for (std::int64_t tx = 0; tx < grid.tiles_x(); ++tx) {
      const std::int64_t ui = ty * grid.tiles_x() + tx;
      const std::int64_t di = ui + grid.tiles_x();
      const std::int64_t ulr = grid.tile(ui).rows - 1;
      const auto& ut = mask.tile(ui);
      const auto& dt = mask.tile(di);
      for (auto k = ut.row_start[ulr]; k < ut.row_start[ulr + 1]; ++k) upper.push_back({ut.runs[k], global_id(ui, k)});
      for (auto k = dt.row_start[0]; k < dt.row_start[1]; ++k) lower.push_back({dt.runs[k], global_id(di, k)});
    }
    upper_runs.clear();
    lower_runs.clear();
    for (const auto& s : upper) upper_runs.push_back(s.run);
    for (const auto& s : lower) lower_runs.push_back(s.run);
    link_rows(upper_runs, lower_runs, ext, [&](std::size_t i, std::size_t j) { uf.unite(upper[i].id, lower[j].id); });
  }

  // Aggregate per root and order the roots by first pixel.
  const auto total = static_cast<std::size_t>(offset[n_tiles]);
  std::vector<MomentSums> sums(total);
  std::vector<std::int64_t> first(total, std::numeric_limits<std::int64_t>::max());
  std::vector<std::uint8_t> border(total, 0);
  for (std::size_t t = 0; t < n_tiles; ++t) {
    for (std::size_t k = 0; k < local[t].moments.size(); ++k) {
      const auto root = static_cast<std::size_t>(uf.find(offset[t] + static_cast<std::int32_t>(k)));
      sums[root] += local[t].moments[k];
      first[root] = std::min(first[root], local[t].first_pixel[k]);
      border[root] |= local[t].border[k];
    }
  }
  std::vector<std::int32_t> roots;
  for (std::size_t g = 0; g < total; ++g)
    if (uf.find(static_cast<std::int32_t>(g)) == static_cast<std::int32_t>(g)) roots.push_back(static_cast<std::int32_t>(g));
  std::sort(roots.begin(), roots.end(), [&](std::int32_t a, std::int32_t b) { return first[a] < first[b]; });
  std::vector<std::int32_t> label_of(total, 0);
  TiledComponents out;
  out.moments.reserve(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) {
    label_of[roots[i]] = static_cast<std::int32_t>(i + 1);
    out.moments.push_back(sums[roots[i]]);
    out.touches_border.push_back(border[roots[i]]);
  }
  out.labels.resize(n_tiles);
  for (std::size_t t = 0; t < n_tiles; ++t) {
    auto& lab = out.labels[t];
    lab.resize(local[t].run_component.size());
    for (std::size_t k = 0; k < lab.size(); ++k) lab[k] = label_of[uf.find(offset[t] + local[t].run_component[k])];
  }
  return out;
}

TiledMask tiled_area_open(const TiledMask& mask, std::int64_t min_area_px, Connectivity connectivity) {
  require(min_area_px >= 1, "min_area_px must be >= 1");
  const TiledComponents comps = merge_components_across_tiles(mask, connectivity);
  return filter_runs(mask, [&](std::int64_t tile, std::uint32_t k) {
    return comps.moments[comps.labels[tile][k] - 1].area >= min_area_px;
  });
}

TiledMask tiled_fill_holes(const TiledMask& mask, std::int64_t max_hole_px) {
  const TiledMask background = mask.complement();
  const TiledComponents holes = merge_components_across_tiles(background, kBackground);
  TiledMask out(mask.grid());
  parallel_for(mask.grid().count(), [&](std::int64_t i) {
    const Rect rect = mask.grid().tile(i);
    const auto& fg = mask.tile(i);
    const auto& bg = background.tile(i);
    const auto& lab = holes.labels[static_cast<std::size_t>(i)];
    auto& dst = out.tile(i);
    dst.runs.clear();
    for (std::int64_t lr = 0; lr < rect.rows; ++lr) {
      const auto row_begin = dst.runs.size();
      auto emit = [&](Run r) {
        if (dst.runs.size() > row_begin && dst.runs.back().c1 == r.c0)
          dst.runs.back().c1 = r.c1;
        else
          dst.runs.push_back(r);
      };
      const auto f = fg.row(lr);
      const auto b = bg.row(lr);
      std::size_t p = 0, q = 0;
      while (p < f.size() || q < b.size()) {
        if (q == b.size() || (p < f.size() && f[p].c0 < b[q].c0)) {
          emit(f[p++]);
          continue;
        }
        const auto label = lab[bg.row_start[lr] + q];
        const bool fill = !holes.touches_border[label - 1] && holes.moments[label - 1].area < max_hole_px;
        if (fill) emit(b[q]);
        ++q;
      }
      dst.row_start[lr + 1] = static_cast<std::uint32_t>(dst.runs.size());
    }
  });
  return out;
}

TiledMask tiled_median_filter(const TiledMask& mask, int kernel) {
  require(kernel >= 1 && kernel % 2 == 1, "median kernel must be odd and >= 1");
  const int half = kernel / 2;
  return TiledMask::build(mask.grid(), [&](std::int64_t, const Rect& rect, std::span<std::uint8_t> bits) {
    const Rect window{rect.row0 - half, rect.col0 - half, rect.rows + 2 * half, rect.cols + 2 * half};
    std::vector<std::uint8_t> padded(static_cast<std::size_t>(window.area()));
    mask.read_window(window, padded, true);
    kernels::serial::box_majority(padded, rect.rows, rect.cols, kernel, bits);
  });
}

std::vector<RegionStats> tiled_region_stats(const TiledComponents& components) {
  std::vector<RegionStats> out;
  out.reserve(components.moments.size());
  for (std::size_t i = 0; i < components.moments.size(); ++i)
    out.push_back(stats_from_moments(static_cast<std::int32_t>(i + 1), components.moments[i]));
  return out;
}

LabelMap to_label_map(const TiledMask& mask, const TiledComponents& components) {
  std::vector<std::int32_t> labels(static_cast<std::size_t>(mask.meta().pixel_count()), 0);
  const auto w = mask.meta().width;
  for (std::int64_t i = 0; i < mask.grid().count(); ++i) {
    const Rect rect = mask.grid().tile(i);
    const auto& t = mask.tile(i);
    for (std::int64_t lr = 0; lr < rect.rows; ++lr)
      for (auto k = t.row_start[lr]; k < t.row_start[lr + 1]; ++k)
        std::fill(labels.begin() + (rect.row0 + lr) * w + t.runs[k].c0, labels.begin() + (rect.row0 + lr) * w + t.runs[k].c1,
                  components.labels[static_cast<std::size_t>(i)][k]);
  }
  return LabelMap(mask.meta(), std::move(labels), components.count());
}

}  // namespace involukit
