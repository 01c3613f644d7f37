#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "involukit/asap.hpp"
#include "involukit/config.hpp"
#include "involukit/io.hpp"
#include "involukit/kernels.hpp"
#include "involukit/phantom.hpp"
#include "involukit/pipeline.hpp"
#include "involukit/serialize.hpp"
#include "involukit/stats.hpp"
#include "involukit/tdlu.hpp"
#include "involukit/version.hpp"

namespace fs = std::filesystem;
using namespace involukit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateHistogram:
    case ErrorCode::EmptyTissue:
    case ErrorCode::ZeroAdjustedArea:
    case ErrorCode::NoRegions:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::DegenerateAgreement:
    case ErrorCode::ZeroVariance:
    case ErrorCode::AllValuesIdentical:
    case ErrorCode::ZeroMarginal:
      return kExitDegenerate;
    default:
      return kExitInput;
  }
}

void apply_threads(int requested) {
  int n = requested;
  if (const char* env = std::getenv("INVOLUKIT_THREADS"); env && *env) {
    try {
      n = std::stoi(env);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, std::string("INVOLUKIT_THREADS is not an integer: ") + env);
    }
  }
  if (n > 0) kernels::set_threads(n);
}

ToolConfig load_optional_config(const std::string& path) { return path.empty() ? ToolConfig{} : load_config(path); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_overlay(const TiledMask& mask, const fs::path& path) {
  FmapWriter writer(path, mask.meta(), PixelType::U8);
  parallel_for(mask.grid().count(), [&](std::int64_t i) {
    const Rect rect = mask.grid().tile(i);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(rect.area()));
    mask.read_window(rect, bits, false);
    writer.write(rect, bits);
  });
  writer.close();
}

struct RunArgs {
  std::string acini_map, tdlu_map, adipose_map, tissue_mask, rgb, config, out, slide_id;
  std::int64_t tile_size = 0;
  int threads = 0;
  bool no_adipose = false;
  bool overlays = false;
  double mpp = 0.0;
};

int cmd_run(const RunArgs& a) {
  apply_threads(a.threads);
  ToolConfig cfg = load_optional_config(a.config);
  PipelineParams params = cfg.pipeline;
  if (a.tile_size > 0) params.tiles.tile_size_px = a.tile_size;
  if (a.no_adipose) params.use_adipose = false;
  if (!a.slide_id.empty()) params.slide_id = a.slide_id;
  std::optional<double> mpp = cfg.microns_per_pixel;
  if (a.mpp > 0.0) mpp = a.mpp;

  const auto acini = open_float_source(a.acini_map, mpp);
  const auto tdlu = open_float_source(a.tdlu_map, mpp);
  std::unique_ptr<FloatSource> adipose;
  if (params.use_adipose) {
    require(!a.adipose_map.empty(), "--adipose-map is required unless --no-adipose is given");
    adipose = open_float_source(a.adipose_map, mpp);
  }
  std::unique_ptr<MaskSource> tissue;
  std::optional<RgbImage> rgb;
  if (!a.tissue_mask.empty()) tissue = open_mask_source(a.tissue_mask, mpp);
  if (!a.rgb.empty()) rgb = png_to_rgb(read_png(a.rgb), mpp);

  PipelineInputs in{acini.get(), tdlu.get(), adipose.get(), tissue.get(), rgb ? &*rgb : nullptr};
  const PipelineResult result = run_pipeline(in, params);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text_file(out / "report.json", dump(to_json(result.report)));
  write_text_file(out / "report.csv", report_csv(std::span(&result.report, 1)));
  write_text_file(out / "regions.json", dump(regions_json(result.regions)));
  write_text_file(out / "detections.json", dump(to_json(result.detections)));
  write_text_file(out / "detections.csv", detections_csv(result.detections));
  if (a.overlays) {
    write_overlay(result.tdlu_mask, out / "tdlu_mask.fmap");
    write_overlay(result.adipose_mask, out / "adipose_mask.fmap");
    write_overlay(result.tissue_mask, out / "tissue_mask.fmap");
  }

  std::cout << report_csv(std::span(&result.report, 1));
  for (const auto& f : result.report.flags) {
    if (cfg.fail_on_flags.count(f)) {
      std::cerr << "involukit: report flag '" << f << "' marks degenerate data\n";
      return kExitDegenerate;
    }
  }
  return kExitOk;
}

struct PhantomArgs {
  std::optional<std::uint64_t> seed;
  std::string config, out;
  int threads = 0;
  std::int64_t band_rows = 256;
  bool scene_only = false;
};

int cmd_phantom(const PhantomArgs& a) {
  apply_threads(a.threads);
  ToolConfig cfg = load_optional_config(a.config);
  PhantomConfig pc = cfg.phantom;
  if (a.seed) pc.seed = *a.seed;
  Scene scene = generate_scene(pc, cfg.pipeline.calibration, cfg.pipeline.report);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text_file(out / "scene.json", dump(to_json(scene)));
  write_text_file(out / "truth_acini.json", dump(to_json(scene.all_acini())));
  write_text_file(out / "true_report.json", dump(to_json(scene.true_measures)));
  if (!a.scene_only) {
    const PhantomRenderer renderer(std::move(scene), pc);
    write_phantom_maps(renderer, out, a.band_rows);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string pred, truth;
  double match_radius = 0.0;
  std::int64_t band_rows = 1024;
};

std::optional<double> streamed_dice(const fs::path& a_path, const fs::path& b_path, std::int64_t band_rows) {
  if (!fs::exists(a_path) || !fs::exists(b_path)) return std::nullopt;
  const FmapMaskSource a(a_path);
  const FmapMaskSource b(b_path);
  require_same_geometry(a.meta(), b.meta(), "truth mask");
  const RasterMeta& m = a.meta();
  std::int64_t inter = 0, total = 0;
  std::vector<std::uint8_t> ba, bb;
  for (std::int64_t r0 = 0; r0 < m.height; r0 += band_rows) {
    const Rect band{r0, 0, std::min(band_rows, m.height - r0), m.width};
    ba.resize(static_cast<std::size_t>(band.area()));
    bb.resize(ba.size());
    a.read(band, ba);
    b.read(band, bb);
    for (std::size_t i = 0; i < ba.size(); ++i) {
      inter += ba[i] & bb[i];
      total += ba[i] + bb[i];
    }
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

int cmd_eval(const EvalArgs& a) {
  const fs::path pred(a.pred), truth(a.truth);
  const CentroidSet p = centroids_from_json(Json::parse(read_text_file(pred / "detections.json")));
  const CentroidSet t = centroids_from_json(Json::parse(read_text_file(truth / "truth_acini.json")));
  const double radius = a.match_radius > 0.0 ? a.match_radius : AciniDetectParams{}.match_radius_px;
  const DetectionScore s = match_detections(p, t, radius);
  Json j{{"acini",
          {{"true_positives", s.true_positives},
           {"false_positives", s.false_positives},
           {"false_negatives", s.false_negatives},
           {"precision", s.precision},
           {"recall", s.recall},
           {"f1", s.f1},
           {"match_radius_px", radius}}}};
  const auto d = streamed_dice(pred / "tdlu_mask.fmap", truth / "truth_tdlu_mask.fmap", a.band_rows);
  j["tdlu_dice"] = d ? Json(*d) : Json(nullptr);
  std::cout << dump(j);
  return kExitOk;
}

std::vector<double> present(const std::vector<std::optional<double>>& column) {
  std::vector<double> out;
  for (const auto& v : column)
    if (v) out.push_back(*v);
  return out;
}

std::vector<std::vector<double>> complete_columns(const CsvTable& t, std::size_t n) {
  require(t.header.size() >= n, "the matrix needs at least " + std::to_string(n) + " columns");
  std::vector<std::vector<double>> cols(n);
  for (const auto& row : t.rows) {
    bool full = true;
    for (std::size_t c = 0; c < n; ++c) full = full && row[c].has_value();
    if (!full) continue;
    for (std::size_t c = 0; c < n; ++c) cols[c].push_back(*row[c]);
  }
  return cols;
}

int to_int_exact(double v) {
  const auto i = static_cast<int>(std::llround(v));
  require(static_cast<double>(i) == v, "expected integer cells, found " + std::to_string(v));
  return i;
}

/// Distinct values mapped to 0..K-1 in ascending order.
std::pair<stats::LabelMatrix, std::vector<int>> label_matrix(const CsvTable& t) {
  std::set<int> values;
  for (const auto& row : t.rows)
    for (const auto& v : row)
      if (v) values.insert(to_int_exact(*v));
  const std::vector<int> categories(values.begin(), values.end());
  std::map<int, int> code;
  for (std::size_t i = 0; i < categories.size(); ++i) code[categories[i]] = static_cast<int>(i);
  stats::LabelMatrix m(static_cast<std::int64_t>(t.rows.size()), static_cast<std::int64_t>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      if (const auto& v = t.rows[r][c]) m(static_cast<std::int64_t>(r), static_cast<std::int64_t>(c)) = code[to_int_exact(*v)];
  return {std::move(m), categories};
}

struct StatsArgs {
  std::string matrix, test;
  double confidence = 0.95;
  double alpha = 0.05;
};

int cmd_stats(const StatsArgs& a) {
  const CsvTable t = read_csv_table(a.matrix);
  require(!t.rows.empty(), "the matrix has no data rows");
  Json j{{"test", a.test}, {"columns", t.header}, {"n_rows", t.rows.size()}};
  if (a.test == "icc") {
    const auto cols = complete_columns(t, t.header.size());
    stats::RaterMatrix m(static_cast<std::int64_t>(cols[0].size()), static_cast<std::int64_t>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
      for (std::size_t r = 0; r < cols[c].size(); ++r) m(static_cast<std::int64_t>(r), static_cast<std::int64_t>(c)) = cols[c][r];
    const auto res = stats::icc3_1(m, a.confidence);
    j["result"] = to_json(res);
    j["interpretation"] = std::string(stats::to_string(stats::interpret_icc(res.statistic)));
  } else if (a.test == "fleiss") {
    auto [labels, categories] = label_matrix(t);
    j["categories"] = categories;
    j["result"] = to_json(stats::fleiss_kappa(stats::rating_counts(labels, static_cast<int>(categories.size()))));
  } else if (a.test == "consensus") {
    auto [labels, categories] = label_matrix(t);
    Json out = Json::array();
    for (const auto& v : stats::consensus_vote(labels)) out.push_back(v ? Json(categories[*v]) : Json(nullptr));
    j["consensus"] = out;
  } else if (a.test == "spearman") {
    const auto cols = complete_columns(t, 2);
    j["result"] = to_json(stats::spearman_rho(cols[0], cols[1]));
  } else if (a.test == "mwu") {
    require(t.header.size() == 2, "mwu needs exactly two columns");
    j["result"] = to_json(stats::mann_whitney_u(present(t.column(0)), present(t.column(1))));
  } else if (a.test == "kw") {
    std::vector<std::vector<double>> groups;
    for (std::size_t c = 0; c < t.header.size(); ++c) groups.push_back(present(t.column(c)));
    j["result"] = to_json(stats::kruskal_wallis(groups));
  } else if (a.test == "chi2") {
    stats::CountTable table(static_cast<std::int64_t>(t.rows.size()), static_cast<std::int64_t>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        require(t.rows[r][c].has_value(), "chi2 tables may not have empty cells");
        table(static_cast<std::int64_t>(r), static_cast<std::int64_t>(c)) = to_int_exact(*t.rows[r][c]);
      }
    j["result"] = to_json(stats::chi_squared(table));
  } else if (a.test == "calibrate") {
    const auto cols = complete_columns(t, 2);
    const auto fit = stats::fit_calibration(cols[0], cols[1], a.alpha);
    j["fit"] = {{"slope", fit.slope},
                {"intercept", fit.intercept},
                {"intercept_se", fit.intercept_se},
                {"intercept_p_value", fit.intercept_p_value},
                {"intercept_dropped", fit.intercept_dropped}};
    j["operative"] = {{"slope", fit.operative.slope}, {"intercept", fit.operative.intercept}};
  } else {
    fail(ErrorCode::InvalidArgument, "unknown test '" + a.test + "'");
  }
  std::cout << dump(j);
  return kExitOk;
}

struct AsapArgs {
  std::string xml, config, out;
};

int cmd_import_asap(const AsapArgs& a) {
  const ToolConfig cfg = load_config(a.config);
  require(!cfg.asap_groups.empty(), "the config needs an [asap_groups] section");
  const AnnotationSet set = import_asap_annotations(read_text_file(a.xml), cfg.asap_groups);
  auto polys = [](const std::vector<Polygon>& v) {
    Json arr = Json::array();
    for (const auto& p : v) arr.push_back(to_json(p));
    return arr;
  };
  Json acini = Json::array();
  for (const auto& p : set.acini) acini.push_back(Json::array({p.row, p.col}));
  const Json j{{"tissue", polys(set.tissue)},
               {"tdlus", polys(set.tdlus)},
               {"adipose", polys(set.adipose)},
               {"acini", acini},
               {"unknown_groups", set.unknown_groups}};
  for (const auto& g : set.unknown_groups)
    std::cerr << "involukit: " << to_string(ErrorCode::UnknownGroup) << ": skipped annotations in group '" << g
              << "'\n";
  if (a.out.empty())
    std::cout << dump(j);
  else
    write_text_file(a.out, dump(j));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Involution measures from breast tissue prediction maps"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Compute the involution report for one slide");
  run_cmd->add_option("--acini-map", run.acini_map, "Acini prediction map (.fmap or .png)")->required();
  run_cmd->add_option("--tdlu-map", run.tdlu_map, "TDLU prediction map")->required();
  run_cmd->add_option("--adipose-map", run.adipose_map, "Adipose prediction map");
  auto* tissue_opt = run_cmd->add_option("--tissue-mask", run.tissue_mask, "Tissue mask (.fmap u8 or .png)");
  run_cmd->add_option("--rgb", run.rgb, "RGB thumbnail (.png) for tissue detection")->excludes(tissue_opt);
  run_cmd->add_option("--config", run.config, "Config file");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--tile-size", run.tile_size, "Tile size in pixels");
  run_cmd->add_option("--threads", run.threads, "Worker threads");
  run_cmd->add_flag("--no-adipose", run.no_adipose, "Skip the adipose map");
  run_cmd->add_flag("--overlays", run.overlays, "Write the final masks as .fmap");
  run_cmd->add_option("--slide-id", run.slide_id, "Slide identifier for the report");
  run_cmd->add_option("--mpp", run.mpp, "Microns per pixel for PNG inputs");

  PhantomArgs phantom;
  auto* ph_cmd = app.add_subcommand("phantom", "Generate a synthetic scene and its maps");
  ph_cmd->add_option("--seed", phantom.seed, "Scene seed");
  ph_cmd->add_option("--config", phantom.config, "Config file");
  ph_cmd->add_option("--out", phantom.out, "Output directory")->required();
  ph_cmd->add_option("--threads", phantom.threads, "Worker threads");
  ph_cmd->add_option("--band-rows", phantom.band_rows, "Rows rendered per band")->check(CLI::PositiveNumber);
  ph_cmd->add_flag("--scene-only", phantom.scene_only, "Write the scene without maps");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a run directory against a phantom directory");
  eval_cmd->add_option("--pred", eval.pred, "Directory written by run")->required();
  eval_cmd->add_option("--truth", eval.truth, "Directory written by phantom")->required();
  eval_cmd->add_option("--match-radius", eval.match_radius, "Detection hit radius in pixels");

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Agreement and association statistics on a CSV matrix");
  stats_cmd->add_option("--matrix", st.matrix, "CSV with a header row")->required();
  stats_cmd->add_option("--test", st.test, "Test to run")
      ->required()
      ->check(CLI::IsMember({"icc", "fleiss", "spearman", "mwu", "kw", "chi2", "calibrate", "consensus"}));
  stats_cmd->add_option("--confidence", st.confidence, "ICC confidence level")->check(CLI::Range(0.5, 0.9999));
  stats_cmd->add_option("--alpha", st.alpha, "Intercept test level for calibrate")->check(CLI::Range(0.0, 1.0));

  AsapArgs asap;
  auto* asap_cmd = app.add_subcommand("import-asap", "Convert an ASAP XML annotation file to JSON");
  asap_cmd->add_option("--xml", asap.xml, "ASAP XML file")->required();
  asap_cmd->add_option("--config", asap.config, "Config file with [asap_groups]")->required();
  asap_cmd->add_option("--out", asap.out, "Output JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*ph_cmd) return cmd_phantom(phantom);
    if (*eval_cmd) return cmd_eval(eval);
    if (*stats_cmd) return cmd_stats(st);
    if (*asap_cmd) return cmd_import_asap(asap);
  } catch (const Error& e) {
    std::cerr << "involukit: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "involukit: " << to_string(ErrorCode::UnreadableInput) << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "involukit: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
