#pragma once

#include <vector>

#include "amdnet/vec.hpp"

namespace amdnet {

// Rigid 3D transform. Rotation is kept as an orthonormal matrix and is
// validated on construction (orthonormal within 1e-9, det +1).
class Transform3 {
 public:
  Transform3() = default;
  Transform3(const Mat3& rotation, const Vec3& translation);

  static Transform3 identity() { return Transform3{}; }
  static Transform3 from_yaw(double yaw, const Vec3& t = {});
  static Transform3 translation(double x, double y, double z);

  Vec3 apply(const Vec3& p) const { return rot_ * p + trans_; }
  Transform3 inverse() const;

  const Mat3& rotation() const { return rot_; }
  const Vec3& translation() const { return trans_; }

 private:
  Mat3 rot_;
  Vec3 trans_;
};

// a.compose(b) applies b first: compose(a, b)(p) == a(b(p)).
Transform3 compose(const Transform3& a, const Transform3& b);

// Maps frame-(prev) local coordinates into frame-(curr) local coordinates,
// given the two local->world poses.
Transform3 relative_transform(const Transform3& t_prev,
                              const Transform3& t_curr);

// Planar rigid transform (yaw about Z plus XY translation).
struct Transform2 {
  double yaw = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Vec2 apply(const Vec2& p) const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * p.x - s * p.y + tx, s * p.x + c * p.y + ty};
  }
  Transform2 inverse() const {
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {-yaw, -(c * tx + s * ty), -(-s * tx + c * ty)};
  }
  Transform3 to_transform3() const {
    return Transform3(Mat3::rot_z(yaw), {tx, ty, 0.0});
  }
};

// Drops Z, roll and pitch. Throws RollPitchTooLarge when the rotation is not
// an approximately pure yaw (|roll| or |pitch| above the tolerance).
Transform2 project_to_plane(const Transform3& t,
                            double roll_pitch_tol = 0.05);

// Discretization of the local metric volume into (nx, ny, nz) cells.
// Index k spans [min + k*size, min + (k+1)*size); the cell center sits at
// fractional index k + 0.5.
struct GridSpec {
  double x_min = -6.4;
  double y_min = -12.8;
  double z_min = -0.4;
  double cell_size_xy = 0.2;
  double voxel_size_z = 0.5;
  int nx = 128;
  int ny = 128;
  int nz = 8;

  void validate() const;

  Vec3 world_to_grid(const Vec3& p) const {
    return {(p.x - x_min) / cell_size_xy, (p.y - y_min) / cell_size_xy,
            (p.z - z_min) / voxel_size_z};
  }
  Vec3 grid_to_world(const Vec3& idx) const {
    return {x_min + idx.x * cell_size_xy, y_min + idx.y * cell_size_xy,
            z_min + idx.z * voxel_size_z};
  }
  Vec2 cell_center(int ix, int iy) const {
    return {x_min + (ix + 0.5) * cell_size_xy,
            y_min + (iy + 0.5) * cell_size_xy};
  }
  bool in_bounds_xy(int ix, int iy) const {
    return ix >= 0 && ix < nx && iy >= 0 && iy < ny;
  }
  int cell_count() const { return nx * ny; }
};

std::vector<Vec3> transform_cloud(const std::vector<Vec3>& points,
                                  const Transform3& t);

}  // namespace amdnet
