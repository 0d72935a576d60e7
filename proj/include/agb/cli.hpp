#pragma once

// The `agb` command line: gen, ingest, features, train, eval, map, scanplan
// and selftest. Exit codes: 0 success, 1 usage, 2 data/format, 3 numeric.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agb/core/error.hpp"
#include "agb/core/validate.hpp"
#include "agb/eval/map.hpp"
#include "agb/eval/metrics.hpp"
#include "agb/eval/split.hpp"
#include "agb/eval/suite.hpp"
#include "agb/features.hpp"
#include "agb/ingest/dataset_io.hpp"
#include "agb/ingest/formats.hpp"
#include "agb/ingest/sequence.hpp"
#include "agb/models/regressor.hpp"
#include "agb/scanplan.hpp"
#include "agb/selftest.hpp"
#include "agb/synthfield.hpp"
#include "agb/version.hpp"

namespace agb::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct ModelOptions {
  int trees = 100;
  int max_depth = -1;
  int min_leaf = 2;
  int mtry = 0;
  std::string svr_kernel = "rbf";
  double svr_c = 10.0;
  double svr_epsilon = 0.01;
  double svr_gamma = 0.0;
  int epochs = 15;
  int batch = 16;
  double lr = 0.001;
  double y_max = 1.0;
  int blocks = 4;
  int channels = 8;

  void add_to(CLI::App* app) {
    app->add_option("--trees", trees, "RFR tree count")->capture_default_str();
    app->add_option("--max-depth", max_depth, "RFR maximum depth (-1: unlimited)")->capture_default_str();
    app->add_option("--min-leaf", min_leaf, "RFR minimum samples per leaf")->capture_default_str();
    app->add_option("--mtry", mtry, "RFR features per split (0: ceil(sqrt(d)))")->capture_default_str();
    app->add_option("--svr-kernel", svr_kernel, "SVR kernel: rbf or linear")->capture_default_str();
    app->add_option("--svr-c", svr_c, "SVR box constraint C")->capture_default_str();
    app->add_option("--svr-epsilon", svr_epsilon, "SVR tube half-width")->capture_default_str();
    app->add_option("--svr-gamma", svr_gamma, "SVR RBF gamma (0: 1/d)")->capture_default_str();
    app->add_option("--epochs", epochs, "network training epochs")->capture_default_str();
    app->add_option("--batch", batch, "network mini-batch size")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--y-max", y_max, "sigmoid head scale, kg/m^2")->capture_default_str();
    app->add_option("--blocks", blocks, "CNN residual blocks")->capture_default_str();
    app->add_option("--channels", channels, "CNN channel width")->capture_default_str();
  }

  models::ModelParams resolve(std::uint64_t seed) const {
    models::ModelParams p;
    p.rfr.n_trees = trees;
    p.rfr.max_depth = max_depth;
    p.rfr.min_samples_leaf = min_leaf;
    p.rfr.features_per_split = mtry;
    p.rfr.seed = seed;
    if (svr_kernel == "rbf")
      p.svr.kernel = models::KernelKind::Rbf;
    else if (svr_kernel == "linear")
      p.svr.kernel = models::KernelKind::Linear;
    else
      throw UsageError("unknown SVR kernel '" + svr_kernel + "' (expected rbf or linear)");
    p.svr.C = svr_c;
    p.svr.epsilon = svr_epsilon;
    p.svr.gamma = svr_gamma;
    for (nn::NetParams* n : {&p.mlp, &p.cnn}) {
      if (epochs < 0 || batch < 1 || blocks < 0 || channels < 1)
        throw UsageError("epochs, batch, blocks and channels must be non-negative (batch, channels >= 1)");
      n->epochs = epochs;
      n->batch_size = static_cast<std::size_t>(batch);
      n->learning_rate = lr;
      n->y_max = y_max;
      n->seed = seed;
    }
    p.cnn.residual_blocks = static_cast<std::size_t>(blocks);
    p.cnn.stem_channels = static_cast<std::size_t>(channels);
    try {
      p.rfr.validate();
      p.svr.validate();
      p.mlp.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    return p;
  }

  json to_json() const {
    return {{"trees", trees},   {"max_depth", max_depth}, {"min_leaf", min_leaf}, {"mtry", mtry},
            {"svr_kernel", svr_kernel}, {"svr_c", svr_c}, {"svr_epsilon", svr_epsilon}, {"svr_gamma", svr_gamma},
            {"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"y_max", y_max},
            {"blocks", blocks}, {"channels", channels}};
  }
};

/// Values from a JSON config file fill every option not given on the
/// command line. Keys are long option names without dashes, either at the
/// top level or inside an object named after the subcommand.
inline void apply_config(CLI::App* sub, const fs::path& path) {
  json cfg = io::read_json(path);
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  const json& section = cfg.contains(sub->get_name()) && cfg[sub->get_name()].is_object() ? cfg[sub->get_name()] : cfg;
  for (const auto& [key, value] : section.items()) {
    if (value.is_object() || key == "config") continue;
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw UsageError("unknown config key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    const std::string text = value.is_string()    ? value.get<std::string>()
                             : value.is_boolean() ? (value.get<bool>() ? "true" : "false")
                                                  : value.dump();
    opt->add_result(text);
    opt->run_callback();
  }
}

inline void write_run_json(const fs::path& dir, const std::string& command, const json& config, const json& outputs,
                           const json& summary) {
  fs::create_directories(dir);
  json j{{"command", command}, {"build", kVersion}, {"config", config}, {"outputs", outputs}, {"summary", summary}};
  io::write_file(dir / "run.json", j.dump(2) + "\n");
}

inline void echo_config(std::ostream& out, const std::string& command, const json& config) {
  out << "agb " << command << " (build " << kVersion << ") config: " << config.dump() << "\n";
}

inline Dataset load_valid_dataset(const fs::path& dir) {
  Dataset ds = io::load_dataset(dir);
  const auto v = validate_dataset(ds);
  if (!v.empty()) {
    std::string msg = "dataset failed validation (" + std::to_string(v.size()) + " problems)";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, v.size()); ++i)
      msg += "\n  " + v[i].subject + ": " + v[i].message;
    throw DataError(msg);
  }
  return ds;
}

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline fs::path with_extension(fs::path p, const char* ext) {
  p.replace_extension(ext);
  return p;
}

/// Writes map.dmap-style raster plus a colour-ramp PPM next to it.
inline json write_map(const fs::path& dmap_path, const eval::BiomassMap& m, double y_max) {
  if (dmap_path.has_parent_path()) fs::create_directories(dmap_path.parent_path());
  io::write_dmap(dmap_path, m.raster);
  const fs::path ppm = with_extension(dmap_path, ".ppm");
  io::write_ppm(ppm, eval::render_map(m.raster, y_max));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t valid = 0;
  for (float v : m.raster.values())
    if (!std::isnan(v)) {
      lo = std::min(lo, double(v));
      hi = std::max(hi, double(v));
      ++valid;
    }
  return {{"dmap", dmap_path.filename().string()}, {"ppm", ppm.filename().string()},
          {"width", m.raster.width()}, {"height", m.raster.height()}, {"origin", {m.origin_x, m.origin_y}},
          {"cell_m", m.cell_m}, {"valid_cells", valid}, {"min", lo}, {"max", hi}};
}

inline eval::BiomassMap predict_map(const Dataset& ds, const models::Regressor& model, const eval::SampleInputs& in,
                                    double cell_m) {
  std::vector<double> preds(ds.samples.size());
  for (std::size_t i = 0; i < preds.size(); ++i) preds[i] = eval::predict_sample(model, in, i);
  return eval::biomass_map(ds.plots, eval::map_points(ds, preds), cell_m);
}

// --- subcommands ------------------------------------------------------------------------

struct GenOptions {
  std::uint64_t seed = 7;
  std::string out;
  int plots = 27;
  int quadrats = 5;
  int dates = 3;
  double noise = 0.02;
  int frames_per_sample = 1;
  double dropout = 0.0;
  int render_px = 128;
  int lidar_scans = 3;
};

inline int cmd_gen(const GenOptions& o, unsigned threads, std::ostream& out) {
  synth::FieldConfig cfg;
  cfg.seed = o.seed;
  cfg.n_plots = o.plots;
  cfg.quadrats_per_plot = o.quadrats;
  cfg.n_dates = o.dates;
  cfg.noise_sd = o.noise;
  cfg.frames_per_sample = o.frames_per_sample;
  cfg.dropout_rate = o.dropout;
  cfg.render_px = o.render_px;
  cfg.lidar_scans_per_plot = o.lidar_scans;
  const json config = synth::to_json(cfg);
  echo_config(out, "gen", config);

  const auto g = synth::generate_field(cfg, threads);
  const fs::path dir = o.out;
  io::save_dataset(g.dataset, dir);
  json lidar = json::array();
  if (o.lidar_scans > 0) {
    fs::create_directories(dir / "lidar");
    const auto sweeps = synth::plot_sweeps(cfg, g.field, threads);
    for (std::size_t i = 0; i < sweeps.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "lidar/plot_%03zu.lscn", i);
      io::write_lscn(dir / name, sweeps[i]);
      lidar.push_back(name);
    }
  }
  double lo = 1e300, hi = -1e300, sum = 0;
  for (const auto& s : g.dataset.samples) {
    lo = std::min(lo, s.dry_agb_kg_per_m2);
    hi = std::max(hi, s.dry_agb_kg_per_m2);
    sum += s.dry_agb_kg_per_m2;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, g.dataset.samples.size()));
  const json summary{{"plots", g.dataset.plots.size()}, {"samples", g.dataset.samples.size()},
                     {"frames", g.dataset.frames.size()}, {"agb_min", lo}, {"agb_max", hi}, {"agb_mean", sum / n}};
  write_run_json(dir, "gen", config, {{"manifest", "manifest.json"}, {"lidar", lidar}}, summary);
  out << "wrote " << g.dataset.samples.size() << " samples, " << g.dataset.frames.size() << " frames to "
      << dir.string() << "\n";
  return kOk;
}

inline int cmd_ingest(const std::string& manifest, const std::string& out_dir, std::ostream& out) {
  const json config{{"manifest", manifest}, {"out", out_dir}};
  echo_config(out, "ingest", config);
  Dataset ds = io::ingest_manifest(manifest);
  const auto v = validate_dataset(ds);
  for (const auto& x : v) out << "violation: " << x.subject << ": " << x.message << "\n";
  if (!v.empty()) throw DataError("ingested dataset has " + std::to_string(v.size()) + " validation problems");
  io::save_dataset(ds, out_dir);
  write_run_json(out_dir, "ingest", config, {{"manifest", "manifest.json"}},
                 {{"frames", ds.frames.size()}, {"samples", ds.samples.size()}, {"plots", ds.plots.size()}});
  out << "ingested " << ds.frames.size() << " frames, " << ds.samples.size() << " samples\n";
  return kOk;
}

inline int cmd_features(const std::string& dataset, const std::string& out_dir, unsigned threads, std::ostream& out) {
  const json config{{"dataset", dataset}, {"out", out_dir}};
  echo_config(out, "features", config);
  const Dataset ds = load_valid_dataset(dataset);
  const auto in = eval::extract_inputs(ds, false, eval::kWorkingResolution, threads);
  std::string csv = "sample_id,plot_id,date_index,frame_index";
  for (const char* n : features::FeatureVec::names()) csv += std::string(",") + n;
  csv += ",dry_agb_kg_per_m2\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    csv += std::to_string(s.id) + "," + std::to_string(s.quadrat.plot_id) + "," + std::to_string(s.date_index) + "," +
           std::to_string(s.frame_index);
    for (double v : in.features.row(i)) csv += "," + fmt_g(v);
    csv += "," + fmt_g(s.dry_agb_kg_per_m2) + "\n";
  }
  fs::create_directories(out_dir);
  io::write_file(fs::path(out_dir) / "features.csv", csv);
  write_run_json(out_dir, "features", config, {{"features", "features.csv"}}, {{"samples", ds.samples.size()}});
  out << "wrote features for " << ds.samples.size() << " samples\n";
  return kOk;
}

inline int cmd_train(const std::string& dataset, const std::string& model_name, const std::string& out_dir,
                     std::uint64_t seed, const ModelOptions& mo, unsigned threads, std::ostream& out) {
  const auto kind = models::parse_model_kind(model_name);
  const auto params = mo.resolve(seed);
  json config{{"dataset", dataset}, {"model", model_name}, {"out", out_dir}, {"seed", seed}, {"params", mo.to_json()}};
  echo_config(out, "train", config);
  const Dataset ds = load_valid_dataset(dataset);
  const auto in = eval::extract_inputs(ds, models::uses_tensors(kind), eval::kWorkingResolution, threads);
  std::vector<std::size_t> all(ds.samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto fit = models::train_model(kind, eval::subset(in, all), params, threads);
  fs::create_directories(out_dir);
  const fs::path model_path = fs::path(out_dir) / "model.cfmd";
  models::save_model(model_path, fit.model);
  json outputs{{"model", "model.cfmd"}};
  if (!fit.loss_trace.empty()) {
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < fit.loss_trace.size(); ++e) csv += std::to_string(e + 1) + "," + fmt_g(fit.loss_trace[e]) + "\n";
    io::write_file(fs::path(out_dir) / "loss.csv", csv);
    outputs["loss"] = "loss.csv";
  }
  std::vector<double> pred(ds.samples.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = eval::predict_sample(fit.model, in, i);
  const auto m = eval::compute_metrics(in.targets, pred);
  write_run_json(out_dir, "train", config, outputs,
                 {{"samples", ds.samples.size()}, {"train_r2", m.r2}, {"train_rmse", m.rmse}, {"loss_trace", fit.loss_trace}});
  out << "trained " << model_name << " on " << ds.samples.size() << " samples (training R² " << eval::format_fixed(m.r2, 3)
      << ")\n";
  return kOk;
}

struct EvalOptions {
  std::string dataset;
  std::string models = "rfr,svr,mlp,cnn";
  std::string split = "holdout:0.2";
  std::uint64_t seed = 7;
  std::string out = "report.txt";
  std::string map;
  double map_cell = 0.1;
};

inline int cmd_eval(const EvalOptions& o, const ModelOptions& mo, unsigned threads, std::ostream& out) {
  const auto kinds = models::parse_model_list(o.models);
  const auto spec = eval::SplitSpec::parse(o.split);
  const auto params = mo.resolve(o.seed);
  json config{{"dataset", o.dataset}, {"models", o.models}, {"split", o.split}, {"seed", o.seed},
              {"out", o.out},         {"map", o.map},       {"map_cell", o.map_cell}, {"params", mo.to_json()}};
  echo_config(out, "eval", config);
  const Dataset ds = load_valid_dataset(o.dataset);
  bool need_tensors = false;
  for (auto k : kinds) need_tensors |= models::uses_tensors(k);
  const auto in = eval::extract_inputs(ds, need_tensors, eval::kWorkingResolution, threads);
  const auto rep = eval::evaluate_suite(ds, kinds, params, spec, o.seed, threads, &in);
  const fs::path report = o.out;
  const fs::path dir = report.has_parent_path() ? report.parent_path() : fs::path(".");
  fs::create_directories(dir);
  const std::string text = rep.render();
  io::write_file(report, text);
  out << text;
  json outputs{{"report", report.filename().string()}};
  if (!o.map.empty()) {
    const eval::SuiteRow* src = nullptr;
    for (const auto& r : rep.rows)
      if (r.model) {
        src = &r;
        break;
      }
    if (!src) throw DataError("no model trained successfully; cannot draw a map");
    outputs["map"] = write_map(o.map, predict_map(ds, *src->model, in, o.map_cell), params.mlp.y_max);
    outputs["map"]["model"] = models::model_name(src->kind);
  }
  write_run_json(dir, "eval", config, outputs, rep.to_json());
  return kOk;
}

inline int cmd_map(const std::string& dataset, const std::string& model_path, const std::string& out_dir, double cell,
                   double y_max, unsigned threads, std::ostream& out) {
  json config{{"dataset", dataset}, {"model", model_path}, {"out", out_dir}, {"cell", cell}, {"y_max", y_max}};
  echo_config(out, "map", config);
  const Dataset ds = load_valid_dataset(dataset);
  const auto model = models::load_model(model_path);
  const auto in = eval::extract_inputs(ds, models::uses_tensors(model.kind()), eval::kWorkingResolution, threads);
  fs::create_directories(out_dir);
  const json info = write_map(fs::path(out_dir) / "map.dmap", predict_map(ds, model, in, cell), y_max);
  write_run_json(out_dir, "map", config, {{"map", info}}, {{"model", models::model_name(model.kind())}});
  out << "map " << info["width"] << "x" << info["height"] << " cells, range " << info["min"] << " .. " << info["max"]
      << " kg/m²\n";
  return kOk;
}

struct ScanOptions {
  double x_travel = scan::CartesianPlatform::kFrameWidthM;
  double y_travel = scan::CartesianPlatform::kFrameDepthM;
  double mount = scan::kLidarMountM;
  double camera = scan::kCameraMountM;
  double step = 0.25;
  double clearance = 0.85;
  double max_plant = stereo::kMaxPlantHeightM;
  double speed = 0.173;
  double fps = 5.0;
  double vfov = scan::kDefaultVfovDeg;
  double canopy = 0.0;
  std::string lscn;
  std::string out;
};

inline int cmd_scanplan(const ScanOptions& o, unsigned threads, std::ostream& out) {
  json config{{"x_travel", o.x_travel}, {"y_travel", o.y_travel}, {"mount", o.mount}, {"camera", o.camera},
              {"step", o.step},         {"clearance", o.clearance}, {"max_plant", o.max_plant}, {"speed", o.speed},
              {"fps", o.fps},           {"vfov", o.vfov},         {"canopy", o.canopy},       {"lscn", o.lscn},
              {"out", o.out}};
  echo_config(out, "scanplan", config);
  scan::CartesianPlatform lidar;
  lidar.x_travel_m = o.x_travel;
  lidar.y_travel_m = o.y_travel;
  lidar.mount_height_m = o.mount;
  scan::CartesianPlatform cam = lidar;
  cam.mount_height_m = o.camera;

  // The clearance requirement comes from the stereo camera; the LiDAR only
  // has to stay above the canopy.
  const auto cv = scan::working_volume(cam, o.clearance, o.max_plant);
  const auto wv = scan::working_volume(lidar, 0.0, o.max_plant);
  const auto path = scan::plan_sweep(lidar, o.step);
  const double overlap = scan::overlap_fraction(o.speed, o.fps, o.camera, o.canopy, o.vfov);

  out << "working volume: sensor x [" << fmt_g(wv.sensor_positions.x0) << ", " << fmt_g(wv.sensor_positions.x1())
      << "] y [" << fmt_g(wv.sensor_positions.y0) << ", " << fmt_g(wv.sensor_positions.y1()) << "] m\n";
  out << "lidar clearance " << fmt_g(wv.clearance_m) << " m, camera clearance " << fmt_g(cv.clearance_m) << " m\n";
  out << "lidar ground footprint y [" << fmt_g(wv.ground_footprint.y0) << ", " << fmt_g(wv.ground_footprint.y1())
      << "] m\n";
  out << "sweep: " << scan::pass_count(path) << " passes, " << path.size() << " waypoints\n";
  out << "frame overlap at " << fmt_g(o.speed) << " m/s, " << fmt_g(o.fps) << " fps: " << fmt_g(overlap) << "\n";

  fs::create_directories(o.out);
  std::string csv = "index,pass,qx_m,qy_m\n";
  for (std::size_t i = 0; i < path.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(path[i].pass) + "," + fmt_g(path[i].qx) + "," + fmt_g(path[i].qy) + "\n";
  io::write_file(fs::path(o.out) / "waypoints.csv", csv);
  json outputs{{"waypoints", "waypoints.csv"}};
  json summary{{"passes", scan::pass_count(path)},
               {"waypoints", path.size()},
               {"lidar_clearance_m", wv.clearance_m},
               {"camera_clearance_m", cv.clearance_m},
               {"overlap", overlap}};
  if (!o.lscn.empty()) {
    const auto scans = io::read_lscn(o.lscn);
    const auto cloud = scan::assemble_point_cloud(scans, threads);
    std::ostringstream xyz;
    scan::write_xyz(xyz, cloud);
    io::write_file(fs::path(o.out) / "cloud.xyz", xyz.str());
    outputs["cloud"] = "cloud.xyz";
    summary["cloud_points"] = cloud.points.size();
    out << "point cloud: " << cloud.points.size() << " points from " << scans.size() << " scans\n";
  }
  write_run_json(o.out, "scanplan", config, outputs, summary);
  return kOk;
}

inline int cmd_selftest(std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
  const json config{{"seed", seed}, {"out", out_dir}};
  echo_config(out, "selftest", config);
  bool ok = true;
  json results = json::array();
  for (const auto& r : selftest::run_all(seed)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (worst " << fmt_g(r.value) << ", limit " << fmt_g(r.limit)
        << ")\n";
    ok &= r.passed;
    results.push_back({{"name", r.name}, {"passed", r.passed}, {"worst", r.value}, {"limit", r.limit}});
  }
  if (!out_dir.empty()) write_run_json(out_dir, "selftest", config, json::object(), {{"checks", results}});
  return ok ? kOk : kNumeric;
}

// --- entry point ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cover-crop biomass pipeline: synthetic field generation, ingest, features, models, evaluation"};
  app.name("agb");
  app.set_version_flag("--version", std::string("agb ") + kVersion);
  app.require_subcommand(1, 1);
  unsigned threads = 1;
  std::string config_path;
  auto common = [&](CLI::App* s) {
    s->add_option("--threads", threads, "worker threads (results do not depend on this)")->capture_default_str();
    s->add_option("--config", config_path, "JSON config file; command-line flags take precedence");
  };

  GenOptions gen;
  auto* s_gen = app.add_subcommand("gen", "generate a synthetic field dataset");
  s_gen->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  s_gen->add_option("--out", gen.out, "output dataset directory");
  s_gen->add_option("--plots", gen.plots, "number of plots")->capture_default_str();
  s_gen->add_option("--quadrats", gen.quadrats, "quadrats per plot")->capture_default_str();
  s_gen->add_option("--dates", gen.dates, "sampling dates")->capture_default_str();
  s_gen->add_option("--noise", gen.noise, "biomass noise sd, kg/m^2")->capture_default_str();
  s_gen->add_option("--frames-per-sample", gen.frames_per_sample, "captures per quadrat")->capture_default_str();
  s_gen->add_option("--dropout", gen.dropout, "stereo no-match rate")->capture_default_str();
  s_gen->add_option("--render-px", gen.render_px, "frame size in pixels")->capture_default_str();
  s_gen->add_option("--lidar-scans", gen.lidar_scans, "LiDAR scans per plot (0: none)")->capture_default_str();
  common(s_gen);

  std::string ingest_manifest, ingest_out;
  auto* s_ingest = app.add_subcommand("ingest", "assemble and validate a dataset from an acquisition manifest");
  s_ingest->add_option("--manifest", ingest_manifest, "manifest JSON (dataset or frame sequences)");
  s_ingest->add_option("--out", ingest_out, "output dataset directory");
  common(s_ingest);

  std::string feat_dataset, feat_out;
  auto* s_feat = app.add_subcommand("features", "extract per-quadrat feature vectors");
  s_feat->add_option("--dataset", feat_dataset, "dataset directory");
  s_feat->add_option("--out", feat_out, "output directory");
  common(s_feat);

  std::string train_dataset, train_model = "rfr", train_out;
  std::uint64_t train_seed = 7;
  ModelOptions train_mo;
  auto* s_train = app.add_subcommand("train", "train one model on every sample of a dataset");
  s_train->add_option("--dataset", train_dataset, "dataset directory");
  s_train->add_option("--model", train_model, "rfr, svr, mlp or cnn")->capture_default_str();
  s_train->add_option("--out", train_out, "output directory");
  s_train->add_option("--seed", train_seed, "random seed")->capture_default_str();
  train_mo.add_to(s_train);
  common(s_train);

  EvalOptions ev;
  ModelOptions eval_mo;
  auto* s_eval = app.add_subcommand("eval", "train and compare models on a train/test split");
  s_eval->add_option("--dataset", ev.dataset, "dataset directory");
  s_eval->add_option("--models", ev.models, "comma-separated subset of rfr,svr,mlp,cnn")->capture_default_str();
  s_eval->add_option("--split", ev.split, "holdout:FRAC or kfold:K (append :samples to ignore plots)")
      ->capture_default_str();
  s_eval->add_option("--seed", ev.seed, "random seed")->capture_default_str();
  s_eval->add_option("--out", ev.out, "report text file")->capture_default_str();
  s_eval->add_option("--map", ev.map, "also write a biomass map (DMAP + PPM) from the first model");
  s_eval->add_option("--map-cell", ev.map_cell, "map cell size, m")->capture_default_str();
  eval_mo.add_to(s_eval);
  common(s_eval);

  std::string map_dataset, map_model, map_out;
  double map_cell = 0.1, map_ymax = 1.0;
  auto* s_map = app.add_subcommand("map", "rasterize model predictions into a field biomass map");
  s_map->add_option("--dataset", map_dataset, "dataset directory");
  s_map->add_option("--model", map_model, "trained model file (CFMD)");
  s_map->add_option("--out", map_out, "output directory");
  s_map->add_option("--cell", map_cell, "cell size, m")->capture_default_str();
  s_map->add_option("--y-max", map_ymax, "upper end of the colour ramp, kg/m^2")->capture_default_str();
  common(s_map);

  ScanOptions so;
  auto* s_scan = app.add_subcommand("scanplan", "platform kinematics, sweep plan, overlap and point clouds");
  s_scan->add_option("--x-travel", so.x_travel, "x carriage travel, m")->capture_default_str();
  s_scan->add_option("--y-travel", so.y_travel, "y carriage travel, m")->capture_default_str();
  s_scan->add_option("--mount", so.mount, "LiDAR mount height, m")->capture_default_str();
  s_scan->add_option("--camera", so.camera, "camera mount height, m")->capture_default_str();
  s_scan->add_option("--step", so.step, "sweep line spacing, m")->capture_default_str();
  s_scan->add_option("--clearance", so.clearance, "required clearance above the canopy, m")->capture_default_str();
  s_scan->add_option("--max-plant", so.max_plant, "tallest admissible canopy, m")->capture_default_str();
  s_scan->add_option("--speed", so.speed, "travel speed, m/s")->capture_default_str();
  s_scan->add_option("--fps", so.fps, "camera frame rate")->capture_default_str();
  s_scan->add_option("--vfov", so.vfov, "camera along-track field of view, degrees")->capture_default_str();
  s_scan->add_option("--canopy", so.canopy, "canopy height for the overlap estimate, m")->capture_default_str();
  s_scan->add_option("--lscn", so.lscn, "LSCN scan file to assemble into cloud.xyz");
  s_scan->add_option("--out", so.out, "output directory");
  common(s_scan);

  std::uint64_t st_seed = 7;
  std::string st_out;
  auto* s_self = app.add_subcommand("selftest", "metric oracle, gradient check and stereo round trip");
  s_self->add_option("--seed", st_seed, "random seed")->capture_default_str();
  s_self->add_option("--out", st_out, "optional output directory for run.json");
  common(s_self);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kUsage;
  }

  try {
    for (CLI::App* sub : app.get_subcommands()) {
      if (!config_path.empty()) {
        try {
          apply_config(sub, config_path);
        } catch (const CLI::ParseError& e) {
          throw UsageError(std::string("config: ") + e.what());
        } catch (const DataError& e) {
          throw UsageError(std::string("config: ") + e.what());
        }
      }
      if (threads < 1) throw UsageError("--threads must be at least 1");
      // Required options may come from the config file, so check them here.
      for (const char* name : {"--out", "--dataset", "--manifest", "--model"}) {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        if (opt && opt->count() == 0 && opt->get_default_str().empty() && sub != s_self && sub != s_eval)
          throw UsageError(std::string(name) + " is required for " + sub->get_name());
      }
      if (sub == s_eval && ev.dataset.empty()) throw UsageError("--dataset is required for eval");
      if (sub == s_gen) return cmd_gen(gen, threads, out);
      if (sub == s_ingest) return cmd_ingest(ingest_manifest, ingest_out, out);
      if (sub == s_feat) return cmd_features(feat_dataset, feat_out, threads, out);
      if (sub == s_train) return cmd_train(train_dataset, train_model, train_out, train_seed, train_mo, threads, out);
      if (sub == s_eval) return cmd_eval(ev, eval_mo, threads, out);
      if (sub == s_map) return cmd_map(map_dataset, map_model, map_out, map_cell, map_ymax, threads, out);
      if (sub == s_scan) return cmd_scanplan(so, threads, out);
      if (sub == s_self) return cmd_selftest(st_seed, st_out, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: malformed manifest: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace agb::cli
