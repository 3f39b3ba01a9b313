#include "amdnet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "amdnet/datagen.hpp"
#include "amdnet/errors.hpp"
#include "amdnet/eval.hpp"
#include "amdnet/model.hpp"
#include "amdnet/postprocess.hpp"

namespace fs = std::filesystem;

namespace amdnet {

namespace {

std::string scene_dir_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", i);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    std::string item = s.substr(start, comma - start);
    const size_t b = item.find_first_not_of(" \t");
    const size_t e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    start = comma + 1;
  }
  return out;
}

ScenarioParams scenario_from_kv(const KeyValues& kv) {
  ScenarioParams sp;
  sp.grid = grid_from_kv(kv, sp.grid);
  sp.frames = static_cast<int>(kv.get_int("frames", sp.frames));
  sp.dt = kv.get_double("dt", sp.dt);
  sp.min_movers = static_cast<int>(kv.get_int("min_movers", sp.min_movers));
  sp.max_movers = static_cast<int>(kv.get_int("max_movers", sp.max_movers));
  sp.mover_speed_min = kv.get_double("mover_speed_min", sp.mover_speed_min);
  sp.mover_speed_max = kv.get_double("mover_speed_max", sp.mover_speed_max);
  sp.mover_turn_rate_max =
      kv.get_double("mover_turn_rate_max", sp.mover_turn_rate_max);
  sp.ego_speed_min = kv.get_double("ego_speed_min", sp.ego_speed_min);
  sp.ego_speed_max = kv.get_double("ego_speed_max", sp.ego_speed_max);
  sp.ego_yaw_rate_max =
      kv.get_double("ego_yaw_rate_max", sp.ego_yaw_rate_max);
  sp.ground_plane = kv.get_bool("ground_plane", sp.ground_plane);
  sp.wall_count = static_cast<int>(kv.get_int("wall_count", sp.wall_count));
  sp.pole_count = static_cast<int>(kv.get_int("pole_count", sp.pole_count));
  sp.point_density = kv.get_double("point_density", sp.point_density);
  sp.dropout = kv.get_double("dropout", sp.dropout);
  if (kv.has("shapes")) {
    sp.shapes.clear();
    for (const std::string& name : split_list(kv.require_string("shapes")))
      sp.shapes.push_back(shape_from_name(name));
  }
  return sp;
}

TrainOptions train_options_from_kv(const KeyValues& kv) {
  TrainOptions opt;
  opt.steps = static_cast<int>(kv.get_int("steps", opt.steps));
  opt.batch_size = static_cast<int>(kv.get_int("batch_size", opt.batch_size));
  opt.lr = kv.get_double("lr", opt.lr);
  opt.weight_decay = kv.get_double("weight_decay", opt.weight_decay);
  opt.lr_drop_every =
      static_cast<int>(kv.get_int("lr_drop_every", opt.lr_drop_every));
  opt.lr_drop_factor = kv.get_double("lr_drop_factor", opt.lr_drop_factor);
  opt.augment = kv.get_bool("augment", opt.augment);
  opt.log_every = static_cast<int>(kv.get_int("log_every", opt.log_every));
  return opt;
}

std::string out_dir(const KeyValues& kv) {
  return kv.require_string("out");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

// Index entries are stored relative to the index file.
std::vector<std::string> resolve_entries(const std::string& index_path,
                                         const std::vector<std::string>& rel) {
  const fs::path base = fs::path(index_path).parent_path();
  std::vector<std::string> out;
  for (const std::string& r : rel) out.push_back((base / r).string());
  return out;
}

std::vector<SceneSequence> load_scenes(const std::vector<std::string>& dirs) {
  std::vector<SceneSequence> scenes;
  scenes.reserve(dirs.size());
  for (const std::string& d : dirs) scenes.push_back(load_scene(d));
  return scenes;
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? csv_num(*v) : std::string();
}

// Running mean over defined values only.
struct MeanAcc {
  double sum = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  void add(const std::optional<double>& v) {
    if (v) add(*v);
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / n;
  }
};

}  // namespace

void cmd_gen(const KeyValues& cfg) {
  const std::string out = out_dir(cfg);
  const uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed", 1));
  const int n = static_cast<int>(cfg.get_int("scenes", 20));
  const double split = cfg.get_double("split", 0.8);
  const ScenarioParams sp = scenario_from_kv(cfg);
  cfg.require_all_consumed();
  sp.validate();
  if (n < 0) throw InvalidSpec("scenes must be >= 0");
  if (split < 0.0 || split > 1.0) throw InvalidSpec("split must lie in [0,1]");

  ensure_dir(out);
  const Rng master(seed);
  DatasetIndex index;
  const int n_train = static_cast<int>(std::lround(split * n));
  for (int i = 0; i < n; ++i) {
    Rng rng = master.stream(static_cast<uint64_t>(i));
    const SceneSequence scene = generate_scene(sp, rng);
    const std::string name = scene_dir_name(i);
    save_scene(scene, out + "/" + name);
    (i < n_train ? index.train : index.val).push_back(name);
  }
  save_dataset_index(index, out + "/index.txt");
}

void cmd_train(const KeyValues& cfg) {
  const std::string out = out_dir(cfg);
  const std::string index_path = cfg.require_string("index");
  ModelConfig mc = model_config_from_kv(cfg, ModelConfig{});
  const TrainOptions base_opt = train_options_from_kv(cfg);
  const bool debug = cfg.get_bool("debug", false);
  cfg.require_all_consumed();

  const DatasetIndex index = load_dataset_index(index_path);
  const std::vector<SceneSequence> scenes =
      load_scenes(resolve_entries(index_path, index.train));

  Model model(mc);
  ensure_dir(out);
  TrainOptions opt = base_opt;
  std::ofstream debug_log;
  if (debug) {
    debug_log.open(out + "/debug.log");
    if (!debug_log) throw IoError("cannot write debug log under " + out);
    opt.debug_log = &debug_log;
  }

  Rng rng(mc.seed);
  const std::vector<CurvePoint> curve = train(model, scenes, opt, rng);

  save_checkpoint(model, out + "/checkpoint.ckpt");
  CsvWriter csv({"step", "l_vel", "l_seg", "l_total", "lr"});
  for (const CurvePoint& c : curve)
    csv.add_row({std::to_string(c.step), csv_num(c.l_vel), csv_num(c.l_seg),
                 csv_num(c.l_total), csv_num(c.lr)});
  csv.write(out + "/loss.csv");
}

namespace {

// Indices whose point falls inside the grid footprint.
std::vector<int> in_grid(const std::vector<Vec3>& pts,
                         const std::vector<int>& idx, const GridSpec& g) {
  std::vector<int> out;
  for (int k : idx) {
    const Vec3 f = g.world_to_grid(pts[static_cast<size_t>(k)]);
    if (g.in_bounds_xy(static_cast<int>(std::floor(f.x)),
                       static_cast<int>(std::floor(f.y))))
      out.push_back(k);
  }
  return out;
}

struct EvalRow {
  std::string scene;
  std::string method;
  std::string roi;
  int points = 0;
  int dynamic_points = 0;
  std::optional<double> epe, epe_dynamic, ap;
};

void add_metrics_row(std::vector<EvalRow>& rows, const std::string& scene,
                     const std::string& method, const std::string& roi,
                     const FlowMetrics& m) {
  EvalRow r;
  r.scene = scene;
  r.method = method;
  r.roi = roi;
  r.points = m.points;
  r.dynamic_points = m.dynamic_points;
  r.epe = m.epe;
  r.epe_dynamic = m.epe_dynamic;
  r.ap = m.ap;
  rows.push_back(std::move(r));
}

}  // namespace

void cmd_eval(const KeyValues& cfg) {
  const std::string out = out_dir(cfg);
  const std::string index_path = cfg.require_string("index");
  const std::string ckpt_path = cfg.require_string("checkpoint");
  const double dt = cfg.get_double("dt", 0.1);
  const int start = static_cast<int>(cfg.get_int("start", 0));
  const std::string subset = cfg.get_string("subset", "val");
  const std::vector<std::string> methods =
      split_list(cfg.get_string("baselines", "zero"));
  (void)cfg.get_int("seed", 1);  // accepted for interface symmetry
  cfg.require_all_consumed();
  if (dt <= 0.0) throw InvalidSpec("dt must be positive");
  for (const std::string& m : methods)
    if (m != "zero" && m != "oracle" && m != "icp_global" &&
        m != "icp_pointwise")
      throw InvalidSpec("unknown baseline: " + m);

  const Model model = load_checkpoint(ckpt_path);
  const ModelConfig& mc = model.config();

  const DatasetIndex index = load_dataset_index(index_path);
  std::vector<std::string> rel;
  if (subset == "val")
    rel = index.val;
  else if (subset == "train")
    rel = index.train;
  else if (subset == "all") {
    rel = index.train;
    rel.insert(rel.end(), index.val.begin(), index.val.end());
  } else {
    throw InvalidSpec("subset must be train, val or all");
  }
  if (rel.empty()) throw EmptyDataset("no scenes in subset " + subset);
  const std::vector<std::string> dirs = resolve_entries(index_path, rel);

  std::vector<EvalRow> rows;
  for (size_t si = 0; si < dirs.size(); ++si) {
    const SceneSequence scene = load_scene(dirs[si]);
    const Sample sample = make_sample(scene, start, mc.p);
    const int last = start + mc.p - 1;
    const PointCloud& cloud = scene.frames[static_cast<size_t>(last)].cloud;

    const Prediction masked = mask_velocity(model.forward(sample), mc.tau);
    MotionGrid pred_grid;
    pred_grid.velocity = masked.vel;
    pred_grid.dyn = masked.prob;

    const PointFlow model_flow =
        grid_to_point_flow(pred_grid, cloud, mc.grid, dt);
    const PointFlow gt = gt_point_flow(scene, last, dt);
    const PointFlow zero = zero_flow_baseline(cloud);

    // Constant-velocity ICP baselines: match the evaluated cloud against the
    // ego-aligned previous one; the forward flow is the negated match offset.
    PointFlow icp_g, icp_p;
    bool have_icp = false;
    if ((std::find(methods.begin(), methods.end(), "icp_global") !=
             methods.end() ||
         std::find(methods.begin(), methods.end(), "icp_pointwise") !=
             methods.end()) &&
        mc.p >= 2) {
      PointCloud prev_aligned;
      prev_aligned.points = transform_cloud(
          sample.clouds[static_cast<size_t>(mc.p - 2)].points,
          relative_transform(sample.poses[static_cast<size_t>(mc.p - 2)],
                             sample.poses[static_cast<size_t>(mc.p - 1)]));
      try {
        icp_g = icp_global(cloud, prev_aligned);
        icp_p = icp_pointwise(cloud, prev_aligned);
        for (Vec3& f : icp_g.flow) f = {-f.x, -f.y, -f.z};
        for (Vec3& f : icp_p.flow) f = {-f.x, -f.y, -f.z};
        have_icp = true;
      } catch (const Degenerate&) {
        have_icp = false;
      }
    }

    const std::string scene_name = rel[si];
    for (const bool with_road : {true, false}) {
      const std::string roi = with_road ? "with_road" : "without_road";
      const std::vector<int> idx = roi_filter(cloud.points, with_road);
      const PointFlow gt_sub = subset_flow(gt, idx);

      add_metrics_row(rows, scene_name, "model", roi,
                      score_flow(subset_flow(model_flow, idx), gt_sub));
      for (const std::string& m : methods) {
        if (m == "zero") {
          add_metrics_row(rows, scene_name, "zero", roi,
                          score_flow(subset_flow(zero, idx), gt_sub));
        } else if (m == "oracle") {
          EvalRow r;
          r.scene = scene_name;
          r.method = "oracle";
          r.roi = roi;
          const std::vector<int> gi = in_grid(cloud.points, idx, mc.grid);
          r.points = static_cast<int>(gi.size());
          r.epe = oracle_metric(subset_flow(gt, gi), mc.grid);
          rows.push_back(std::move(r));
        } else if (have_icp) {
          const PointFlow& f = m == "icp_global" ? icp_g : icp_p;
          add_metrics_row(rows, scene_name, m, roi,
                          score_flow(subset_flow(f, idx), gt_sub));
        }
      }
    }
  }

  // Aggregate per method and ROI over defined per-scene values.
  std::vector<EvalRow> aggregates;
  for (const bool with_road : {true, false}) {
    const std::string roi = with_road ? "with_road" : "without_road";
    std::vector<std::string> order = {"model"};
    order.insert(order.end(), methods.begin(), methods.end());
    for (const std::string& m : order) {
      MeanAcc epe_acc, dyn_acc, ap_acc;
      int points = 0, dynamics = 0;
      for (const EvalRow& r : rows) {
        if (r.method != m || r.roi != roi) continue;
        epe_acc.add(r.epe);
        dyn_acc.add(r.epe_dynamic);
        ap_acc.add(r.ap);
        points += r.points;
        dynamics += r.dynamic_points;
      }
      EvalRow agg;
      agg.scene = "aggregate";
      agg.method = m;
      agg.roi = roi;
      agg.points = points;
      agg.dynamic_points = dynamics;
      agg.epe = epe_acc.mean();
      agg.epe_dynamic = dyn_acc.mean();
      agg.ap = ap_acc.mean();
      aggregates.push_back(std::move(agg));
    }
  }
  rows.insert(rows.end(), aggregates.begin(), aggregates.end());

  ensure_dir(out);
  CsvWriter csv({"scene", "method", "roi", "points", "dynamic_points", "epe",
                 "epe_dynamic", "ap"});
  for (const EvalRow& r : rows)
    csv.add_row({r.scene, r.method, r.roi, std::to_string(r.points),
                 std::to_string(r.dynamic_points), opt_cell(r.epe),
                 opt_cell(r.epe_dynamic), opt_cell(r.ap)});
  csv.write(out + "/eval.csv");
}

namespace {

Tensor occupancy_mask(const PointCloud& cloud, const GridSpec& g) {
  Tensor known({1, g.ny, g.nx});
  for (const Vec3& p : cloud.points) {
    const Vec3 f = g.world_to_grid(p);
    const int ix = static_cast<int>(std::floor(f.x));
    const int iy = static_cast<int>(std::floor(f.y));
    if (g.in_bounds_xy(ix, iy)) known.at(0, iy, ix) = 1.0;
  }
  return known;
}

MotionGrid predict_grid(const Model& model, const SceneSequence& scene,
                        int start) {
  const Sample sample = make_sample(scene, start, model.config().p);
  const Prediction masked =
      mask_velocity(model.forward(sample), model.config().tau);
  MotionGrid grid;
  grid.velocity = masked.vel;
  grid.dyn = masked.prob;
  grid.known = occupancy_mask(
      scene.frames[static_cast<size_t>(start + model.config().p - 1)].cloud,
      model.config().grid);
  return grid;
}

}  // namespace

void cmd_infer(const KeyValues& cfg) {
  const std::string out = out_dir(cfg);
  const std::string ckpt_path = cfg.require_string("checkpoint");
  const std::string scene_dir = cfg.require_string("scene");
  const int start = static_cast<int>(cfg.get_int("start", 0));
  DbscanParams db;
  db.eps = cfg.get_double("eps", db.eps);
  db.min_pts = static_cast<int>(cfg.get_int("min_pts", db.min_pts));
  db.velocity_scale = cfg.get_double("velocity_scale", db.velocity_scale);
  cfg.require_all_consumed();

  const Model model = load_checkpoint(ckpt_path);
  const SceneSequence scene = load_scene(scene_dir);
  const MotionGrid grid = predict_grid(model, scene, start);

  const int last = start + model.config().p - 1;
  const PointCloud& cloud = scene.frames[static_cast<size_t>(last)].cloud;
  const std::vector<CellVector> vectors =
      cells_to_vectors(grid, model.config().grid, model.config().tau);
  const std::vector<int> labels = dbscan(vectors, db);
  const std::vector<DynamicBox> boxes = clusters_to_boxes(
      labels, vectors, cloud, model.config().grid.cell_size_xy);

  ensure_dir(out);
  save_motion_grid(grid, out + "/pred_grid.bin");
  write_text_file(out + "/boxes.csv", boxes_to_csv(boxes));
}

namespace {

void hsv_to_rgb(double h, double s, double v, uint8_t* rgb) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)
    r = c, g = x;
  else if (hp < 2)
    r = x, g = c;
  else if (hp < 3)
    g = c, b = x;
  else if (hp < 4)
    g = x, b = c;
  else if (hp < 5)
    r = x, b = c;
  else
    r = c, b = x;
  const double m = v - c;
  rgb[0] = static_cast<uint8_t>(std::lround(255.0 * (r + m)));
  rgb[1] = static_cast<uint8_t>(std::lround(255.0 * (g + m)));
  rgb[2] = static_cast<uint8_t>(std::lround(255.0 * (b + m)));
}

}  // namespace

std::vector<uint8_t> render_motion_grid(const MotionGrid& grid, double v_max) {
  if (v_max <= 0.0) throw InvalidSpec("v_max must be positive");
  const int ny = grid.velocity.dim(1), nx = grid.velocity.dim(2);
  std::vector<uint8_t> rgb(static_cast<size_t>(3) * ny * nx, 0);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const bool lit = grid.has_known() && grid.known.at(0, iy, ix) > 0.5;
      if (!lit) continue;
      const double vx = grid.velocity.at(0, iy, ix);
      const double vy = grid.velocity.at(1, iy, ix);
      double hue = std::atan2(vy, vx) * 180.0 / M_PI;
      if (hue < 0.0) hue += 360.0;
      if (hue >= 360.0) hue = 0.0;
      const double sat = std::min(std::hypot(vx, vy) / v_max, 1.0);
      const int row = ny - 1 - iy;
      hsv_to_rgb(hue, sat, 1.0,
                 &rgb[(static_cast<size_t>(row) * nx + ix) * 3]);
    }
  return rgb;
}

void write_ppm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& rgb) {
  if (rgb.size() != static_cast<size_t>(3) * width * height)
    throw ShapeMismatch("rgb buffer vs image size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()),
            static_cast<std::streamsize>(rgb.size()));
  if (!out) throw IoError("short image write to " + path);
}

void cmd_render(const KeyValues& cfg) {
  const std::string out = out_dir(cfg);
  const double v_max = cfg.get_double("v_max", 10.0);
  const std::string grid_path = cfg.get_string("grid", "");
  std::string ckpt_path, scene_dir;
  int start = 0;
  if (grid_path.empty()) {
    ckpt_path = cfg.require_string("checkpoint");
    scene_dir = cfg.require_string("scene");
    start = static_cast<int>(cfg.get_int("start", 0));
  }
  cfg.require_all_consumed();

  MotionGrid grid;
  if (!grid_path.empty()) {
    grid = load_motion_grid(grid_path);
  } else {
    const Model model = load_checkpoint(ckpt_path);
    grid = predict_grid(model, load_scene(scene_dir), start);
  }

  const int ny = grid.velocity.dim(1), nx = grid.velocity.dim(2);
  const std::vector<uint8_t> rgb = render_motion_grid(grid, v_max);
  ensure_dir(out);
  write_ppm(out + "/render.ppm", nx, ny, rgb);
}

void cmd_bench(const KeyValues& cfg) {
  const std::string out = out_dir(cfg);
  const int reps = static_cast<int>(cfg.get_int("reps", 20));
  const int warmup = static_cast<int>(cfg.get_int("warmup", 2));
  const std::string ckpt_path = cfg.get_string("checkpoint", "");
  ModelConfig mc = model_config_from_kv(cfg, ModelConfig{});
  ScenarioParams sp = scenario_from_kv(cfg);
  cfg.require_all_consumed();
  if (reps < 0 || warmup < 0) throw InvalidSpec("reps and warmup must be >= 0");

  const Model model =
      ckpt_path.empty() ? Model(mc) : load_checkpoint(ckpt_path);
  sp.grid = model.config().grid;
  sp.frames = std::max(sp.frames, model.config().p);
  Rng rng(model.config().seed);
  const SceneSequence scene = generate_scene(sp, rng);
  const std::vector<Sample> samples = {
      make_sample(scene, 0, model.config().p)};

  const BenchmarkReport report = benchmark(model, samples, reps, warmup);
  ensure_dir(out);
  CsvWriter csv({"reps", "mean_ms", "p95_ms"});
  csv.add_row({std::to_string(report.reps), csv_num(report.mean_ms),
               csv_num(report.p95_ms)});
  csv.write(out + "/bench.csv");
}

}  // namespace amdnet
