#include "amdnet/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "amdnet/errors.hpp"

namespace amdnet {

namespace {

void check_rotation(const Mat3& r) {
  const Mat3 rtr = r.transposed() * r;
  double max_dev = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double target = (i == j) ? 1.0 : 0.0;
      max_dev = std::max(max_dev, std::fabs(rtr.m[i][j] - target));
    }
  if (max_dev >= 1e-9)
    throw InvalidTransform("rotation is not orthonormal");
  if (r.det() <= 0.0)
    throw InvalidTransform("rotation has negative determinant");
}

}  // namespace

Transform3::Transform3(const Mat3& rotation, const Vec3& translation)
    : rot_(rotation), trans_(translation) {
  check_rotation(rot_);
}

Transform3 Transform3::from_yaw(double yaw, const Vec3& t) {
  return Transform3(Mat3::rot_z(yaw), t);
}

Transform3 Transform3::translation(double x, double y, double z) {
  return Transform3(Mat3::identity(), {x, y, z});
}

Transform3 Transform3::inverse() const {
  const Mat3 rt = rot_.transposed();
  const Vec3 t = rt * trans_;
  return Transform3(rt, {-t.x, -t.y, -t.z});
}

Transform3 compose(const Transform3& a, const Transform3& b) {
  return Transform3(a.rotation() * b.rotation(),
                    a.rotation() * b.translation() + a.translation());
}

Transform3 relative_transform(const Transform3& t_prev,
                              const Transform3& t_curr) {
  return compose(t_curr.inverse(), t_prev);
}

Transform2 project_to_plane(const Transform3& t, double roll_pitch_tol) {
  const Mat3& r = t.rotation();
  // ZYX Euler angles: roll about X, pitch about Y, yaw about Z.
  const double roll = std::atan2(r.m[2][1], r.m[2][2]);
  const double pitch = -std::asin(std::clamp(r.m[2][0], -1.0, 1.0));
  if (std::fabs(roll) > roll_pitch_tol || std::fabs(pitch) > roll_pitch_tol)
    throw RollPitchTooLarge("roll/pitch exceed planar tolerance");
  const double yaw = std::atan2(r.m[1][0], r.m[0][0]);
  return {yaw, t.translation().x, t.translation().y};
}

void GridSpec::validate() const {
  if (!(cell_size_xy > 0.0) || !(voxel_size_z > 0.0))
    throw InvalidSpec("grid cell sizes must be positive");
  if (nx < 1 || ny < 1 || nz < 1)
    throw InvalidSpec("grid cell counts must be >= 1");
}

std::vector<Vec3> transform_cloud(const std::vector<Vec3>& points,
                                  const Transform3& t) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(t.apply(p));
  return out;
}

}  // namespace amdnet
