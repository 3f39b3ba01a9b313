#include <doctest.h>

#include <cmath>

#include "amdnet/errors.hpp"
#include "amdnet/geometry.hpp"
#include "amdnet/rng.hpp"

using namespace amdnet;

namespace {

Transform3 random_pose(Rng& rng, double rot_scale = 1.0) {
  const Mat3 r = Mat3::rot_z(rng.uniform(-3.0, 3.0) * rot_scale) *
                 Mat3::rot_y(rng.uniform(-0.3, 0.3) * rot_scale) *
                 Mat3::rot_x(rng.uniform(-0.3, 0.3) * rot_scale);
  return Transform3(r, {rng.uniform(-10, 10), rng.uniform(-10, 10),
                        rng.uniform(-2, 2)});
}

double pose_distance(const Transform3& a, const Transform3& b) {
  double d = (a.translation() - b.translation()).norm();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      d = std::max(d, std::fabs(a.rotation().m[i][j] - b.rotation().m[i][j]));
  return d;
}

}  // namespace

TEST_CASE("compose: identity is neutral") {
  Rng rng(11);
  const Transform3 t = random_pose(rng);
  CHECK(pose_distance(compose(Transform3::identity(), t), t) < 1e-12);
  CHECK(pose_distance(compose(t, Transform3::identity()), t) < 1e-12);
}

TEST_CASE("compose: transform with its inverse gives identity") {
  Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    const Transform3 t = random_pose(rng);
    CHECK(pose_distance(compose(t, t.inverse()), Transform3::identity()) <
          1e-9);
    CHECK(pose_distance(compose(t.inverse(), t), Transform3::identity()) <
          1e-9);
  }
}

TEST_CASE("compose: pure translations add") {
  const Transform3 a = Transform3::translation(1, 0, 0);
  const Transform3 b = Transform3::translation(0, 2, 0);
  const Transform3 c = compose(a, b);
  CHECK(pose_distance(c, Transform3::translation(1, 2, 0)) < 1e-12);
}

TEST_CASE("compose: associative and matches pointwise application") {
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    const Transform3 a = random_pose(rng), b = random_pose(rng),
                     c = random_pose(rng);
    CHECK(pose_distance(compose(compose(a, b), c), compose(a, compose(b, c))) <
          1e-9);
    const Vec3 p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const Vec3 q1 = compose(a, b).apply(p);
    const Vec3 q2 = a.apply(b.apply(p));
    CHECK((q1 - q2).norm() < 1e-9);
  }
}

TEST_CASE("invert twice returns the original pose") {
  Rng rng(14);
  const Transform3 t = random_pose(rng);
  CHECK(pose_distance(t.inverse().inverse(), t) < 1e-9);
}

TEST_CASE("transform construction rejects non-orthonormal rotation") {
  Mat3 bad;
  bad.m[0][0] = 2.0;
  CHECK_THROWS_AS(Transform3(bad, {0, 0, 0}), InvalidTransform);
  Mat3 reflect;  // det -1
  reflect.m[0][0] = -1.0;
  CHECK_THROWS_AS(Transform3(reflect, {0, 0, 0}), InvalidTransform);
}

TEST_CASE("relative_transform: equal poses give identity") {
  Rng rng(15);
  const Transform3 t = random_pose(rng);
  CHECK(pose_distance(relative_transform(t, t), Transform3::identity()) <
        1e-9);
}

TEST_CASE("relative_transform: world translation becomes local translation") {
  const Transform3 prev = Transform3::translation(1, 0, 0);
  const Transform3 curr = Transform3::identity();
  const Transform3 rel = relative_transform(prev, curr);
  CHECK(pose_distance(rel, Transform3::translation(1, 0, 0)) < 1e-12);
}

TEST_CASE("relative_transform: two-path transport agrees") {
  Rng rng(16);
  for (int i = 0; i < 30; ++i) {
    const Transform3 t_prev = random_pose(rng), t_curr = random_pose(rng);
    const Transform3 rel = relative_transform(t_prev, t_curr);
    const Vec3 p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-2, 2)};
    const Vec3 via_world = t_curr.inverse().apply(t_prev.apply(p));
    CHECK((rel.apply(p) - via_world).norm() < 1e-9);
  }
}

TEST_CASE("project_to_plane: identity") {
  const Transform2 t = project_to_plane(Transform3::identity());
  CHECK(t.yaw == doctest::Approx(0.0));
  CHECK(t.tx == doctest::Approx(0.0));
  CHECK(t.ty == doctest::Approx(0.0));
}

TEST_CASE("project_to_plane: pure yaw with translation") {
  const Transform3 t = Transform3::from_yaw(M_PI / 2, {1, 2, 0});
  const Transform2 p = project_to_plane(t);
  CHECK(p.yaw == doctest::Approx(M_PI / 2));
  CHECK(p.tx == doctest::Approx(1.0));
  CHECK(p.ty == doctest::Approx(2.0));
}

TEST_CASE("project_to_plane: large roll rejected") {
  const Transform3 t(Mat3::rot_x(0.2), {0, 0, 0});
  CHECK_THROWS_AS(project_to_plane(t), RollPitchTooLarge);
}

TEST_CASE("project_to_plane: small roll within tolerance passes") {
  const Transform3 t(Mat3::rot_z(0.7) * Mat3::rot_x(0.01), {3, -1, 0.5});
  const Transform2 p = project_to_plane(t);
  CHECK(p.yaw == doctest::Approx(0.7).epsilon(0.02));
  CHECK(p.tx == doctest::Approx(3.0));
  CHECK(p.ty == doctest::Approx(-1.0));
}

TEST_CASE("transform2 inverse round-trips points") {
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    const Transform2 t{rng.uniform(-3, 3), rng.uniform(-5, 5),
                       rng.uniform(-5, 5)};
    const Vec2 p{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Vec2 q = t.inverse().apply(t.apply(p));
    CHECK(std::fabs(q.x - p.x) < 1e-9);
    CHECK(std::fabs(q.y - p.y) < 1e-9);
  }
}

TEST_CASE("transform2 matches its 3d embedding") {
  const Transform2 t{0.4, 1.5, -2.0};
  const Vec2 p{2.0, 3.0};
  const Vec3 q3 = t.to_transform3().apply({p.x, p.y, 0.0});
  const Vec2 q2 = t.apply(p);
  CHECK(std::fabs(q3.x - q2.x) < 1e-12);
  CHECK(std::fabs(q3.y - q2.y) < 1e-12);
  CHECK(std::fabs(q3.z) < 1e-12);
}

TEST_CASE("grid: corner maps to zero index") {
  GridSpec g;
  const Vec3 idx = g.world_to_grid({g.x_min, g.y_min, g.z_min});
  CHECK(idx.x == doctest::Approx(0.0));
  CHECK(idx.y == doctest::Approx(0.0));
  CHECK(idx.z == doctest::Approx(0.0));
}

TEST_CASE("grid: one meter is five cells at 0.2 m") {
  GridSpec g;
  const Vec3 idx = g.world_to_grid({g.x_min + 1.0, g.y_min, g.z_min});
  CHECK(idx.x == doctest::Approx(5.0));
}

TEST_CASE("grid: world/grid round trip") {
  GridSpec g;
  Rng rng(18);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p{g.x_min + rng.uniform() * g.nx * g.cell_size_xy,
                 g.y_min + rng.uniform() * g.ny * g.cell_size_xy,
                 g.z_min + rng.uniform() * g.nz * g.voxel_size_z};
    const Vec3 q = g.grid_to_world(g.world_to_grid(p));
    CHECK((q - p).norm() < 1e-9);
  }
}

TEST_CASE("grid: cell centers round trip through fractional indices") {
  GridSpec g;
  for (int ix : {0, 1, 63, 127})
    for (int iy : {0, 5, 127}) {
      const Vec2 c = g.cell_center(ix, iy);
      const Vec3 idx = g.world_to_grid({c.x, c.y, g.z_min});
      CHECK(idx.x == doctest::Approx(ix + 0.5));
      CHECK(idx.y == doctest::Approx(iy + 0.5));
    }
}

TEST_CASE("grid: invalid specs rejected") {
  GridSpec g;
  g.cell_size_xy = 0.0;
  CHECK_THROWS_AS(g.validate(), InvalidSpec);
  GridSpec g2;
  g2.nx = 0;
  CHECK_THROWS_AS(g2.validate(), InvalidSpec);
}

TEST_CASE("transform_cloud: identity and quarter turn") {
  const std::vector<Vec3> cloud{{1, 0, 0}, {0, 2, 1}};
  const auto same = transform_cloud(cloud, Transform3::identity());
  CHECK((same[0] - cloud[0]).norm() < 1e-15);
  CHECK((same[1] - cloud[1]).norm() < 1e-15);

  const auto turned =
      transform_cloud({{1, 0, 0}}, Transform3::from_yaw(M_PI / 2));
  CHECK((turned[0] - Vec3{0, 1, 0}).norm() < 1e-9);
}

TEST_CASE("transform_cloud preserves pairwise distances") {
  Rng rng(19);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 40; ++i)
    cloud.push_back(
        {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-2, 2)});
  const Transform3 t = random_pose(rng);
  const auto moved = transform_cloud(cloud, t);
  for (size_t i = 0; i < cloud.size(); ++i)
    for (size_t j = i + 1; j < cloud.size(); ++j) {
      const double before = (cloud[i] - cloud[j]).norm();
      const double after = (moved[i] - moved[j]).norm();
      CHECK(std::fabs(before - after) < 1e-9);
    }
}
