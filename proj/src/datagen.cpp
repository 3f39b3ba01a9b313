#include "amdnet/datagen.hpp"

#include <algorithm>
#include <cmath>

#include "amdnet/errors.hpp"

namespace amdnet {

std::string shape_name(ShapeTag tag) {
  switch (tag) {
    case ShapeTag::box: return "box";
    case ShapeTag::disc: return "disc";
    case ShapeTag::l_shape: return "l_shape";
  }
  return "box";
}

ShapeTag shape_from_name(const std::string& name) {
  if (name == "box") return ShapeTag::box;
  if (name == "disc") return ShapeTag::disc;
  if (name == "l_shape") return ShapeTag::l_shape;
  throw InvalidSpec("unknown shape tag: " + name);
}

bool inside_footprint(ShapeTag shape, double dx, double dy, double l,
                      double w) {
  // half-open on the high faces so a grid-aligned box covers an exact
  // cell count
  const double hl = 0.5 * l, hw = 0.5 * w;
  switch (shape) {
    case ShapeTag::box:
      return dx >= -hl && dx < hl && dy >= -hw && dy < hw;
    case ShapeTag::disc:
      return dx * dx + dy * dy < hl * hl;
    case ShapeTag::l_shape:
      return dx >= -hl && dx < hl && dy >= -hw && dy < hw &&
             !(dx > 0.0 && dy > 0.0);
  }
  return false;
}

namespace {

// Closed with a pad. A tiny pad makes surface points sitting exactly on a
// face count as belonging to the object; a half-cell-diagonal pad turns the
// test into a conservative cell-coverage test for rasterization.
bool inside_footprint_closed(ShapeTag shape, double dx, double dy, double l,
                             double w, double pad) {
  const double hl = 0.5 * l + pad, hw = 0.5 * w + pad;
  switch (shape) {
    case ShapeTag::box:
      return std::fabs(dx) <= hl && std::fabs(dy) <= hw;
    case ShapeTag::disc:
      return dx * dx + dy * dy <= hl * hl;
    case ShapeTag::l_shape:
      return std::fabs(dx) <= hl && std::fabs(dy) <= hw &&
             !(dx > pad && dy > pad);
  }
  return false;
}

}  // namespace

namespace {

Vec2 rot2(double a, const Vec2& v) {
  const double c = std::cos(a), s = std::sin(a);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

struct LocalTrackState {
  Vec2 center;
  double yaw;
  Vec2 velocity;
  double speed;
};

LocalTrackState to_local(const BoxState& s, const Transform3& pose,
                         double ego_yaw) {
  const Vec3 lc = pose.inverse().apply(s.center);
  LocalTrackState out;
  out.center = {lc.x, lc.y};
  out.yaw = s.yaw - ego_yaw;
  out.velocity = rot2(-ego_yaw, s.velocity);
  out.speed = out.velocity.norm();
  return out;
}

}  // namespace

MotionGrid rasterize_ground_truth(const SceneSequence& scene, int frame_idx) {
  const GridSpec& g = scene.grid;
  const Frame& frame = scene.frames.at(frame_idx);
  const double ego_yaw = project_to_plane(frame.pose).yaw;

  MotionGrid grid;
  grid.velocity = Tensor({2, g.ny, g.nx});
  grid.dyn = Tensor({1, g.ny, g.nx});
  grid.known = Tensor({1, g.ny, g.nx});
  grid.known.fill(1.0);  // static background is known zero-velocity

  // Cover every cell the footprint touches, not just cells whose center it
  // contains. Surface returns land in boundary cells whose centers sit just
  // outside the footprint, and those cells must still carry the mover's
  // velocity. Any point of a cell lies within half the cell diagonal of the
  // cell center, so padding the membership test by that much suffices.
  const double pad = 0.5 * g.cell_size_xy * std::sqrt(2.0);

  for (const BoxTrack& track : scene.tracks) {
    const BoxState& s = track.states.at(frame_idx);
    const LocalTrackState ls = to_local(s, frame.pose, ego_yaw);
    const double l = s.extents.x, w = s.extents.y;
    // conservative bounding square around the rotated footprint
    const double reach = 0.5 * std::hypot(l, w) + pad;
    const int ix0 = std::max(
        0, static_cast<int>(std::floor(
               (ls.center.x - reach - g.x_min) / g.cell_size_xy)));
    const int ix1 = std::min(
        g.nx - 1, static_cast<int>(std::floor(
                      (ls.center.x + reach - g.x_min) / g.cell_size_xy)));
    const int iy0 = std::max(
        0, static_cast<int>(std::floor(
               (ls.center.y - reach - g.y_min) / g.cell_size_xy)));
    const int iy1 = std::min(
        g.ny - 1, static_cast<int>(std::floor(
                      (ls.center.y + reach - g.y_min) / g.cell_size_xy)));
    const double cy = std::cos(ls.yaw), sy = std::sin(ls.yaw);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        const Vec2 c = g.cell_center(ix, iy);
        const double ox = c.x - ls.center.x, oy = c.y - ls.center.y;
        const double dx = cy * ox + sy * oy;
        const double dy = -sy * ox + cy * oy;
        if (!inside_footprint_closed(track.shape, dx, dy, l, w, pad)) continue;
        const int cell = iy * g.nx + ix;
        const double have = std::hypot(grid.velocity.plane(0)[cell],
                                       grid.velocity.plane(1)[cell]);
        if (ls.speed > have) {
          grid.velocity.plane(0)[cell] = ls.velocity.x;
          grid.velocity.plane(1)[cell] = ls.velocity.y;
        }
      }
  }
  return grid;
}

MotionGrid refine_with_points(const MotionGrid& grid, const PointCloud& cloud,
                              const GridSpec& g) {
  std::vector<uint8_t> occupied(static_cast<size_t>(g.cell_count()), 0);
  for (const Vec3& p : cloud.points) {
    const int ix = static_cast<int>(std::floor((p.x - g.x_min) / g.cell_size_xy));
    const int iy = static_cast<int>(std::floor((p.y - g.y_min) / g.cell_size_xy));
    if (g.in_bounds_xy(ix, iy)) occupied[iy * g.nx + ix] = 1;
  }
  MotionGrid out = grid;
  for (int cell = 0; cell < g.cell_count(); ++cell) {
    if (occupied[cell]) continue;
    out.known.plane(0)[cell] = 0.0;
    if (!out.dyn.empty()) out.dyn.plane(0)[cell] = 0.0;
    out.velocity.plane(0)[cell] = 0.0;
    out.velocity.plane(1)[cell] = 0.0;
  }
  return out;
}

MotionGrid dynamic_label(const MotionGrid& grid, double theta) {
  MotionGrid out = grid;
  const int n = grid.velocity.dim(1) * grid.velocity.dim(2);
  for (int cell = 0; cell < n; ++cell) {
    const double speed = std::hypot(grid.velocity.plane(0)[cell],
                                    grid.velocity.plane(1)[cell]);
    const bool known =
        grid.known.empty() || grid.known.plane(0)[cell] != 0.0;
    out.dyn.plane(0)[cell] = (known && speed > theta) ? 1.0 : 0.0;
  }
  return out;
}

MotionGrid make_ground_truth(const SceneSequence& scene, int frame_idx,
                             double theta) {
  const GridSpec& g = scene.grid;
  MotionGrid grid = rasterize_ground_truth(scene, frame_idx);
  grid = refine_with_points(grid, scene.frames.at(frame_idx).cloud, g);

  // The footprint raster is conservative, so restate every observed cell
  // from the exact per-point flow: a cell moves iff one of its points does,
  // and it carries the fastest such point's velocity. Grid labels and point
  // labels then tell one story; in particular a cell holding only ground
  // returns underneath a mover stays static.
  const PointFlow flow = gt_point_flow(scene, frame_idx, 1.0);
  std::vector<double> best(static_cast<size_t>(g.cell_count()), -1.0);
  for (size_t i = 0; i < flow.pos.size(); ++i) {
    const Vec3& p = flow.pos[i];
    const int ix =
        static_cast<int>(std::floor((p.x - g.x_min) / g.cell_size_xy));
    const int iy =
        static_cast<int>(std::floor((p.y - g.y_min) / g.cell_size_xy));
    if (!g.in_bounds_xy(ix, iy)) continue;
    const size_t cell = static_cast<size_t>(iy) * g.nx + ix;
    const double speed = std::hypot(flow.flow[i].x, flow.flow[i].y);
    if (speed > best[cell]) {
      best[cell] = speed;
      grid.velocity.plane(0)[cell] = flow.flow[i].x;
      grid.velocity.plane(1)[cell] = flow.flow[i].y;
    }
  }
  return dynamic_label(grid, theta);
}

PointFlow gt_point_flow(const SceneSequence& scene, int frame_idx, double dt) {
  const Frame& frame = scene.frames.at(frame_idx);
  const double ego_yaw = project_to_plane(frame.pose).yaw;

  std::vector<LocalTrackState> locals;
  std::vector<const BoxTrack*> tracks;
  for (const BoxTrack& t : scene.tracks) {
    locals.push_back(to_local(t.states.at(frame_idx), frame.pose, ego_yaw));
    tracks.push_back(&t);
  }

  PointFlow out;
  out.pos = frame.cloud.points;
  out.flow.assign(frame.cloud.points.size(), Vec3{});
  for (size_t i = 0; i < frame.cloud.points.size(); ++i) {
    const Vec3& p = frame.cloud.points[i];
    double best = 0.0;
    Vec2 v{};
    for (size_t k = 0; k < tracks.size(); ++k) {
      const BoxState& s = tracks[k]->states[frame_idx];
      const LocalTrackState& ls = locals[k];
      // z test in world units; local frame keeps z (planar poses)
      const Vec3 pw = frame.pose.apply(p);
      if (std::fabs(pw.z - s.center.z) > 0.5 * s.extents.z + 1e-9) continue;
      const double c = std::cos(ls.yaw), sn = std::sin(ls.yaw);
      const double ox = p.x - ls.center.x, oy = p.y - ls.center.y;
      const double dx = c * ox + sn * oy;
      const double dy = -sn * ox + c * oy;
      if (!inside_footprint_closed(tracks[k]->shape, dx, dy, s.extents.x,
                                   s.extents.y, 1e-9))
        continue;
      if (ls.speed > best) {
        best = ls.speed;
        v = ls.velocity;
      }
    }
    out.flow[i] = {v.x * dt, v.y * dt, 0.0};
  }
  return out;
}

SceneSequence scene_window(const SceneSequence& scene, int start, int count) {
  if (start < 0 || count < 1 ||
      start + count > static_cast<int>(scene.frames.size()))
    throw TooFewFrames("window [" + std::to_string(start) + ", " +
                       std::to_string(start + count) + ") out of range");
  SceneSequence out;
  out.grid = scene.grid;
  out.frames.assign(scene.frames.begin() + start,
                    scene.frames.begin() + start + count);
  out.tracks.reserve(scene.tracks.size());
  for (const BoxTrack& t : scene.tracks) {
    BoxTrack nt;
    nt.id = t.id;
    nt.shape = t.shape;
    nt.states.assign(t.states.begin() + start,
                     t.states.begin() + start + count);
    out.tracks.push_back(std::move(nt));
  }
  return out;
}

AugmentDraw draw_augmentation(Rng& rng) {
  AugmentDraw d;
  d.rotation = rng.uniform(-M_PI / 4, M_PI / 4);
  d.scale = rng.uniform(0.95, 1.05);
  return d;
}

SceneSequence augment_scene(const SceneSequence& scene,
                            const AugmentDraw& draw) {
  const Mat3 r = Mat3::rot_z(draw.rotation);
  const Mat3 rt = r.transposed();
  const double s = draw.scale;

  SceneSequence out;
  out.grid = scene.grid;
  out.frames.reserve(scene.frames.size());
  for (const Frame& f : scene.frames) {
    Frame nf;
    nf.timestamp = f.timestamp;
    nf.cloud.intensity = f.cloud.intensity;
    nf.cloud.points.reserve(f.cloud.points.size());
    for (const Vec3& p : f.cloud.points) nf.cloud.points.push_back(r * p * s);
    nf.pose = Transform3(f.pose.rotation() * rt, f.pose.translation() * s);
    out.frames.push_back(std::move(nf));
  }
  out.tracks.reserve(scene.tracks.size());
  for (const BoxTrack& t : scene.tracks) {
    BoxTrack nt;
    nt.id = t.id;
    nt.shape = t.shape;
    nt.states.reserve(t.states.size());
    for (const BoxState& st : t.states) {
      BoxState ns = st;
      ns.center = st.center * s;
      ns.extents = st.extents * s;
      ns.velocity = st.velocity * s;
      nt.states.push_back(ns);
    }
    out.tracks.push_back(std::move(nt));
  }
  return out;
}

void ScenarioParams::validate() const {
  grid.validate();
  if (frames < 2) throw InvalidSpec("scenario needs at least 2 frames");
  if (dt <= 0) throw InvalidSpec("dt must be positive");
  if (min_movers < 0 || max_movers < min_movers)
    throw InvalidSpec("bad mover count range");
  if (mover_speed_min < 0 || mover_speed_max < mover_speed_min)
    throw InvalidSpec("bad mover speed range");
  if (ego_speed_min < 0 || ego_speed_max < ego_speed_min)
    throw InvalidSpec("bad ego speed range");
  if (shapes.empty()) throw InvalidSpec("no mover shapes allowed");
  if (point_density <= 0) throw InvalidSpec("point density must be positive");
  if (dropout < 0 || dropout >= 1) throw InvalidSpec("dropout out of range");
}

namespace {

struct Surfel {
  Vec3 p;         // world
  bool occludes;  // competes in the depth buffer (ground does not)
};

struct MoverInit {
  ShapeTag shape;
  Vec3 extents;
  Vec2 pos;
  double heading;
  double speed;
  double turn_rate;
  double z_center;
};

// Perimeter segments of the footprint in the shape frame.
std::vector<std::pair<Vec2, Vec2>> footprint_segments(ShapeTag shape, double l,
                                                      double w) {
  const double hl = 0.5 * l, hw = 0.5 * w;
  switch (shape) {
    case ShapeTag::box:
      return {{{-hl, -hw}, {hl, -hw}},
              {{hl, -hw}, {hl, hw}},
              {{hl, hw}, {-hl, hw}},
              {{-hl, hw}, {-hl, -hw}}};
    case ShapeTag::l_shape:
      return {{{-hl, -hw}, {hl, -hw}}, {{hl, -hw}, {hl, 0}},
              {{hl, 0}, {0, 0}},       {{0, 0}, {0, hw}},
              {{0, hw}, {-hl, hw}},    {{-hl, hw}, {-hl, -hw}}};
    case ShapeTag::disc:
      return {};  // handled separately
  }
  return {};
}

double range_keep_prob(double range, double dropout) {
  return std::min(1.0, 9.0 / std::max(range, 1.0)) * (1.0 - dropout);
}

}  // namespace

SceneSequence generate_scene(const ScenarioParams& sp, Rng& rng) {
  sp.validate();
  const GridSpec& g = sp.grid;
  const double x_lo = g.x_min, x_hi = g.x_min + g.nx * g.cell_size_xy;
  const double y_lo = g.y_min, y_hi = g.y_min + g.ny * g.cell_size_xy;
  // world extent covers the grid around the whole ego trajectory
  const double travel = sp.ego_speed_max * sp.frames * sp.dt + 2.0;
  const double wx_lo = x_lo - 2.0, wx_hi = x_hi + travel;
  const double wy_lo = y_lo - 2.0, wy_hi = y_hi + 2.0;

  SceneSequence scene;
  scene.grid = g;

  // ego trajectory
  const double ego_speed = rng.uniform(sp.ego_speed_min, sp.ego_speed_max);
  const double ego_rate =
      rng.uniform(-sp.ego_yaw_rate_max, sp.ego_yaw_rate_max);
  std::vector<Transform3> poses;
  {
    double x = 0, y = 0, yaw = 0;
    for (int i = 0; i < sp.frames; ++i) {
      poses.push_back(Transform3(Mat3::rot_z(yaw), {x, y, 0}));
      x += ego_speed * std::cos(yaw) * sp.dt;
      y += ego_speed * std::sin(yaw) * sp.dt;
      yaw += ego_rate * sp.dt;
    }
  }

  // static world surfels, sampled once
  std::vector<Surfel> statics;
  if (sp.ground_plane) {
    const int n = static_cast<int>(2600 * sp.point_density);
    for (int i = 0; i < n; ++i) {
      const Vec3 p{rng.uniform(wx_lo, wx_hi), rng.uniform(wy_lo, wy_hi),
                   rng.uniform(-0.04, 0.04)};
      if (!rng.bernoulli(range_keep_prob(std::hypot(p.x, p.y), sp.dropout)))
        continue;
      statics.push_back({p, false});
    }
  }
  for (int wall = 0; wall < sp.wall_count; ++wall) {
    // walls hug the lateral borders so the road stays drivable
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const Vec2 a{rng.uniform(wx_lo, wx_hi - 8.0),
                 side * rng.uniform(0.55 * (y_hi - y_lo) * 0.5,
                                    0.95 * (y_hi - y_lo) * 0.5)};
    const double len = rng.uniform(6.0, 14.0);
    const double ang = rng.uniform(-0.3, 0.3);
    const Vec2 b{a.x + len * std::cos(ang), a.y + len * std::sin(ang)};
    const double height = rng.uniform(1.8, 2.5);
    const int n = static_cast<int>(len * height * 9.0 * sp.point_density);
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      const Vec3 p{a.x + u * (b.x - a.x) + rng.uniform(-0.02, 0.02),
                   a.y + u * (b.y - a.y) + rng.uniform(-0.02, 0.02),
                   rng.uniform(0.0, height)};
      if (!rng.bernoulli(range_keep_prob(std::hypot(p.x, p.y), sp.dropout)))
        continue;
      statics.push_back({p, true});
    }
  }
  for (int pole = 0; pole < sp.pole_count; ++pole) {
    const Vec2 c{rng.uniform(x_lo + 1.0, wx_hi - 1.0),
                 rng.uniform(y_lo + 1.0, y_hi - 1.0)};
    if (std::hypot(c.x, c.y) < 2.0) continue;
    const double r = rng.uniform(0.08, 0.2);
    const double h = rng.uniform(2.2, 3.8);
    const int n = static_cast<int>(70 * sp.point_density);
    for (int i = 0; i < n; ++i) {
      const double a = rng.uniform(-M_PI, M_PI);
      const Vec3 p{c.x + r * std::cos(a), c.y + r * std::sin(a),
                   rng.uniform(0.0, h)};
      if (!rng.bernoulli(range_keep_prob(std::hypot(p.x, p.y), sp.dropout)))
        continue;
      statics.push_back({p, true});
    }
  }

  // movers
  std::vector<MoverInit> movers;
  const int n_movers =
      sp.min_movers +
      static_cast<int>(rng.uniform_int(sp.max_movers - sp.min_movers + 1));
  for (int m = 0; m < n_movers; ++m) {
    MoverInit mi;
    mi.shape = sp.shapes[rng.uniform_int(sp.shapes.size())];
    switch (mi.shape) {
      case ShapeTag::box:
        mi.extents = {rng.uniform(3.5, 4.7), rng.uniform(1.6, 2.0),
                      rng.uniform(1.4, 1.8)};
        break;
      case ShapeTag::disc: {
        const double d = rng.uniform(0.7, 1.3);
        mi.extents = {d, d, rng.uniform(1.5, 1.9)};
        break;
      }
      case ShapeTag::l_shape:
        mi.extents = {rng.uniform(2.6, 3.6), rng.uniform(1.8, 2.6),
                      rng.uniform(1.0, 1.6)};
        break;
    }
    // keep movers off the ego, with margins that degrade gracefully on
    // small grids
    const double margin = std::min(3.0, 0.2 * std::min(x_hi - x_lo, y_hi - y_lo));
    const double keep_away =
        std::min(3.0, 0.25 * std::min(x_hi - x_lo, y_hi - y_lo));
    for (int attempt = 0; attempt < 100; ++attempt) {
      mi.pos = {rng.uniform(x_lo + margin, x_hi - margin),
                rng.uniform(y_lo + margin, y_hi - margin)};
      if (mi.pos.norm() >= keep_away) break;
    }
    mi.heading = rng.uniform(-M_PI, M_PI);
    mi.speed = rng.uniform(sp.mover_speed_min, sp.mover_speed_max);
    mi.turn_rate = rng.bernoulli(0.5)
                       ? 0.0
                       : rng.uniform(-sp.mover_turn_rate_max,
                                     sp.mover_turn_rate_max);
    mi.z_center = 0.3 + 0.5 * mi.extents.z;
    movers.push_back(mi);
  }

  // integrate tracks (explicit Euler so displacement = velocity * dt holds
  // exactly frame to frame)
  scene.tracks.resize(movers.size());
  for (size_t m = 0; m < movers.size(); ++m) {
    BoxTrack& track = scene.tracks[m];
    track.id = static_cast<int>(m);
    track.shape = movers[m].shape;
    Vec2 pos = movers[m].pos;
    double heading = movers[m].heading;
    for (int i = 0; i < sp.frames; ++i) {
      BoxState st;
      st.center = {pos.x, pos.y, movers[m].z_center};
      st.extents = movers[m].extents;
      st.yaw = heading;
      st.velocity = {movers[m].speed * std::cos(heading),
                     movers[m].speed * std::sin(heading)};
      track.states.push_back(st);
      pos = pos + st.velocity * sp.dt;
      heading += movers[m].turn_rate * sp.dt;
    }
  }

  // per-frame clouds
  constexpr int kAzBins = 1024;
  for (int i = 0; i < sp.frames; ++i) {
    Frame frame;
    frame.pose = poses[i];
    frame.timestamp = i * sp.dt;
    const Transform3 inv = poses[i].inverse();

    std::vector<Vec3> ground, obstacles;
    for (const Surfel& s : statics) {
      const Vec3 lp = inv.apply(s.p);
      (s.occludes ? obstacles : ground).push_back(lp);
    }
    for (size_t m = 0; m < movers.size(); ++m) {
      const BoxState& st = scene.tracks[m].states[i];
      const Vec3 lc = inv.apply(st.center);
      const double range = std::hypot(lc.x, lc.y);
      const double l = st.extents.x, w = st.extents.y, h = st.extents.z;
      const double perimeter =
          movers[m].shape == ShapeTag::disc ? M_PI * l : 2.0 * (l + w);
      int n = static_cast<int>(perimeter * h * 14.0 * sp.point_density *
                               std::min(1.0, 9.0 / std::max(range, 1.0)));
      n = std::max(n, 8);
      const auto segs = footprint_segments(movers[m].shape, l, w);
      double total_len = 0.0;
      for (const auto& sgm : segs)
        total_len += (sgm.second - sgm.first).norm();
      const double cy = std::cos(st.yaw), sy = std::sin(st.yaw);
      for (int k = 0; k < n; ++k) {
        if (rng.bernoulli(sp.dropout)) continue;
        Vec2 sample;
        if (movers[m].shape == ShapeTag::disc) {
          const double a = rng.uniform(-M_PI, M_PI);
          sample = {0.5 * l * std::cos(a), 0.5 * l * std::sin(a)};
        } else {
          double u = rng.uniform() * total_len;
          sample = segs.back().second;
          for (const auto& sgm : segs) {
            const double seg_len = (sgm.second - sgm.first).norm();
            if (u <= seg_len) {
              const double t = seg_len > 0 ? u / seg_len : 0.0;
              sample = sgm.first + (sgm.second - sgm.first) * t;
              break;
            }
            u -= seg_len;
          }
        }
        const Vec3 world{
            st.center.x + cy * sample.x - sy * sample.y,
            st.center.y + sy * sample.x + cy * sample.y,
            st.center.z + rng.uniform(-0.5 * h, 0.5 * h)};
        obstacles.push_back(inv.apply(world));
      }
    }

    // nearest-surface occlusion: per azimuth bin keep points within 0.4 m
    // of the closest obstacle
    std::vector<double> bin_min(kAzBins, 1e30);
    auto bin_of = [](const Vec3& p) {
      const double a = std::atan2(p.y, p.x);
      int b = static_cast<int>((a + M_PI) / (2.0 * M_PI) * kAzBins);
      return std::clamp(b, 0, kAzBins - 1);
    };
    for (const Vec3& p : obstacles) {
      const double r = std::hypot(p.x, p.y);
      double& m = bin_min[bin_of(p)];
      if (r < m) m = r;
    }
    frame.cloud.points = std::move(ground);
    for (const Vec3& p : obstacles) {
      const double r = std::hypot(p.x, p.y);
      if (r <= bin_min[bin_of(p)] + 0.4) frame.cloud.points.push_back(p);
    }
    scene.frames.push_back(std::move(frame));
  }
  return scene;
}

}  // namespace amdnet
