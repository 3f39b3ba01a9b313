#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amdnet/geometry.hpp"
#include "amdnet/motion_grid.hpp"
#include "amdnet/rng.hpp"
#include "amdnet/voxel_encoder.hpp"

namespace amdnet {

enum class ShapeTag { box, disc, l_shape };

std::string shape_name(ShapeTag tag);
ShapeTag shape_from_name(const std::string& name);

// World-frame state of one object at one frame.
struct BoxState {
  Vec3 center;        // m, box center (z at mid-height)
  Vec3 extents;       // l, w, h in m
  double yaw = 0.0;   // rad, world frame
  Vec2 velocity;      // m/s, world frame
};

struct BoxTrack {
  int id = 0;
  ShapeTag shape = ShapeTag::box;
  std::vector<BoxState> states;  // one per frame
};

struct Frame {
  PointCloud cloud;  // ego-local coordinates
  Transform3 pose;   // local -> world
  double timestamp = 0.0;
};

struct SceneSequence {
  std::vector<Frame> frames;
  std::vector<BoxTrack> tracks;
  GridSpec grid;
};

// Copies frames [start, start + count) with matching track states.
SceneSequence scene_window(const SceneSequence& scene, int start, int count);

// BEV footprint membership in the shape's own frame (dx, dy relative to the
// center, already de-rotated). Half-open on the high faces so a grid-aligned
// box covers an exact cell count. l_shape is the box with the +x/+y quadrant
// removed.
bool inside_footprint(ShapeTag shape, double dx, double dy, double l,
                      double w);

// Dense pre-refinement labels for one frame: every cell known with velocity
// (0,0); cells touched by a mover footprint (conservatively, center within
// half a cell diagonal of it) carry its velocity expressed in the ego frame;
// overlaps resolved toward the higher speed.
MotionGrid rasterize_ground_truth(const SceneSequence& scene, int frame_idx);

// Keeps labels only at cells holding at least one point (any z); elsewhere
// velocity becomes unknown and segmentation static.
MotionGrid refine_with_points(const MotionGrid& grid, const PointCloud& cloud,
                              const GridSpec& g);

// dyn = 1 iff the cell is known and its speed strictly exceeds theta.
MotionGrid dynamic_label(const MotionGrid& grid, double theta);

// rasterize + refine + dynamic_label, with each observed cell's velocity
// restated from the exact per-point flow (fastest point wins) so the grid
// agrees with gt_point_flow about which cells move and how fast.
MotionGrid make_ground_truth(const SceneSequence& scene, int frame_idx,
                             double theta);

// Exact per-point ground-truth flow from the tracks (no discretization):
// points inside a mover's 3D box move with it, everything else is static.
PointFlow gt_point_flow(const SceneSequence& scene, int frame_idx, double dt);

struct AugmentDraw {
  double rotation = 0.0;  // rad, about the ego origin
  double scale = 1.0;
};

AugmentDraw draw_augmentation(Rng& rng);  // rotation +-pi/4, scale [0.95,1.05]

// Similarity transform applied consistently: local clouds rotate and scale,
// poses absorb the rotation, world tracks scale. Ground truth regenerated
// from the augmented scene stays consistent with it.
SceneSequence augment_scene(const SceneSequence& scene,
                            const AugmentDraw& draw);

struct ScenarioParams {
  GridSpec grid;
  int frames = 10;
  double dt = 0.1;
  int min_movers = 1;
  int max_movers = 4;
  double mover_speed_min = 1.0;
  double mover_speed_max = 7.0;
  double mover_turn_rate_max = 0.15;  // rad/s
  std::vector<ShapeTag> shapes = {ShapeTag::box};
  double ego_speed_min = 0.0;
  double ego_speed_max = 4.0;
  double ego_yaw_rate_max = 0.05;  // rad/s
  bool ground_plane = true;
  int wall_count = 3;
  int pole_count = 6;
  double point_density = 1.0;  // global multiplier on sample counts
  double dropout = 0.1;        // per-point keep failure probability

  void validate() const;  // throws InvalidSpec
};

SceneSequence generate_scene(const ScenarioParams& sp, Rng& rng);

}  // namespace amdnet
