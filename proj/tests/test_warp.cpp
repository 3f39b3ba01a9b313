#include <doctest.h>

#include <cmath>

#include "amdnet/errors.hpp"
#include "amdnet/grad_check.hpp"
#include "amdnet/rng.hpp"
#include "amdnet/warp.hpp"

using namespace amdnet;

namespace {

GridSpec small_grid(int n = 8, double cell = 0.5) {
  GridSpec g;
  g.nx = g.ny = n;
  g.cell_size_xy = cell;
  g.x_min = -0.5 * n * cell;
  g.y_min = -0.5 * n * cell;
  return g;
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(shape);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("plan: identity sources each cell from itself with weight 1") {
  const GridSpec g = small_grid();
  const WarpPlan plan = build_warp_plan(g, Transform2{});
  for (int cell = 0; cell < plan.cell_count(); ++cell) {
    int taps = 0;
    for (int k = 0; k < 4; ++k) {
      const size_t i = static_cast<size_t>(cell) * 4 + k;
      if (plan.src[i] < 0) continue;
      ++taps;
      CHECK(plan.src[i] == cell);
      CHECK(plan.wgt[i] == 1.0);
    }
    CHECK(taps == 1);
  }
}

TEST_CASE("plan: one-cell translation is an integer shift") {
  const GridSpec g = small_grid();
  // t_rel translates by exactly one cell in +x
  const WarpPlan plan = build_warp_plan(g, Transform2{0.0, g.cell_size_xy, 0.0});
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      const int cell = iy * g.nx + ix;
      int taps = 0;
      for (int k = 0; k < 4; ++k) {
        const size_t i = static_cast<size_t>(cell) * 4 + k;
        if (plan.src[i] < 0) continue;
        ++taps;
        CHECK(plan.src[i] == iy * g.nx + (ix - 1));
        CHECK(plan.wgt[i] == 1.0);
      }
      CHECK(taps == (ix >= 1 ? 1 : 0));
    }
}

TEST_CASE("plan: half-cell translation splits weight 0.5/0.5") {
  const GridSpec g = small_grid();
  const WarpPlan plan =
      build_warp_plan(g, Transform2{0.0, 0.5 * g.cell_size_xy, 0.0});
  const int iy = 3, ix = 4;
  const size_t base = static_cast<size_t>(iy * g.nx + ix) * 4;
  double wsum = 0.0;
  int taps = 0;
  for (int k = 0; k < 4; ++k) {
    if (plan.src[base + k] < 0) continue;
    ++taps;
    wsum += plan.wgt[base + k];
    CHECK(plan.wgt[base + k] == doctest::Approx(0.5));
  }
  CHECK(taps == 2);
  CHECK(wsum == doctest::Approx(1.0));
}

TEST_CASE("plan: weights are non-negative and sum to at most 1") {
  const GridSpec g = small_grid(16, 0.25);
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const Transform2 t{rng.uniform(-0.8, 0.8), rng.uniform(-1.5, 1.5),
                       rng.uniform(-1.5, 1.5)};
    const WarpPlan plan = build_warp_plan(g, t);
    for (int cell = 0; cell < plan.cell_count(); ++cell) {
      double wsum = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double w = plan.wgt[static_cast<size_t>(cell) * 4 + k];
        CHECK(w >= 0.0);
        wsum += w;
      }
      CHECK(wsum <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("warp: identity plan reproduces the input bit for bit") {
  const GridSpec g = small_grid();
  Rng rng(42);
  const Tensor h = random_tensor({3, g.ny, g.nx}, rng);
  const Tensor out = warp_forward(build_warp_plan(g, Transform2{}), h);
  for (size_t i = 0; i < h.numel(); ++i) CHECK(out[i] == h[i]);
}

TEST_CASE("warp: integer shift moves values exactly and zero-fills") {
  const GridSpec g = small_grid(4, 1.0);
  Tensor h({1, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) h.at(0, y, x) = 10.0 * y + x;
  const WarpPlan plan = build_warp_plan(g, Transform2{0.0, 1.0, 0.0});
  const Tensor out = warp_forward(plan, h);
  for (int y = 0; y < 4; ++y) {
    CHECK(out.at(0, y, 0) == 0.0);  // vacated column
    for (int x = 1; x < 4; ++x) CHECK(out.at(0, y, x) == h.at(0, y, x - 1));
  }
}

TEST_CASE("warp: quarter-turn on a symmetric grid is an exact permutation") {
  const GridSpec g = small_grid(8, 0.5);
  Rng rng(43);
  const Tensor h = random_tensor({2, 8, 8}, rng);
  const WarpPlan plan = build_warp_plan(g, Transform2{M_PI / 2, 0.0, 0.0});
  const Tensor out = warp_forward(plan, h);
  // rotating the frame by +90 deg sends source cell (ix, iy) to
  // output (-iy-ish, ix); verify against direct index arithmetic
  for (int c = 0; c < 2; ++c)
    for (int iy = 0; iy < 8; ++iy)
      for (int ix = 0; ix < 8; ++ix) {
        // source = R(-pi/2) * center(ix, iy): (x, y) -> (y, -x)
        const int sx = iy;
        const int sy = 7 - ix;
        CHECK(out.at(c, iy, ix) == h.at(c, sy, sx));
      }
}

TEST_CASE("warp is linear in its input") {
  const GridSpec g = small_grid(12, 0.4);
  Rng rng(44);
  const Transform2 t{0.3, 0.7, -0.4};
  const WarpPlan plan = build_warp_plan(g, t);
  const Tensor h1 = random_tensor({2, 12, 12}, rng);
  const Tensor h2 = random_tensor({2, 12, 12}, rng);
  const double a = 1.7, b = -0.6;
  Tensor mix({2, 12, 12});
  for (size_t i = 0; i < mix.numel(); ++i) mix[i] = a * h1[i] + b * h2[i];
  const Tensor w_mix = warp_forward(plan, mix);
  const Tensor w1 = warp_forward(plan, h1);
  const Tensor w2 = warp_forward(plan, h2);
  for (size_t i = 0; i < mix.numel(); ++i)
    CHECK(w_mix[i] == doctest::Approx(a * w1[i] + b * w2[i]).epsilon(1e-12));
}

TEST_CASE("warp never amplifies non-negative inputs") {
  const GridSpec g = small_grid(10, 0.3);
  Rng rng(45);
  const Tensor h = random_tensor({1, 10, 10}, rng, 0.0, 5.0);
  double hmax = 0.0;
  for (size_t i = 0; i < h.numel(); ++i) hmax = std::max(hmax, h[i]);
  for (int trial = 0; trial < 8; ++trial) {
    const Transform2 t{rng.uniform(-1, 1), rng.uniform(-1, 1),
                       rng.uniform(-1, 1)};
    const Tensor out = warp_forward(build_warp_plan(g, t), h);
    for (size_t i = 0; i < out.numel(); ++i) CHECK(out[i] <= hmax + 1e-12);
  }
}

TEST_CASE("warp composition is exact for integer translations") {
  const GridSpec g = small_grid(8, 1.0);
  Rng rng(46);
  const Tensor h = random_tensor({1, 8, 8}, rng);
  const Transform2 t1{0.0, 1.0, 0.0};
  const Transform2 t2{0.0, 0.0, 2.0};
  const Transform2 t21{0.0, 1.0, 2.0};  // t2 o t1 for pure translations
  const Tensor two_step =
      warp_forward(build_warp_plan(g, t2),
                   warp_forward(build_warp_plan(g, t1), h));
  const Tensor one_step = warp_forward(build_warp_plan(g, t21), h);
  // interior cells that stayed in bounds through both steps
  for (int y = 2; y < 8; ++y)
    for (int x = 1; x < 8; ++x)
      CHECK(two_step.at(0, y, x) == one_step.at(0, y, x));
}

TEST_CASE("warp backward: identity plan passes gradients through") {
  const GridSpec g = small_grid();
  Rng rng(47);
  const Tensor grad = random_tensor({2, g.ny, g.nx}, rng);
  const Tensor out = warp_backward(build_warp_plan(g, Transform2{}), grad);
  for (size_t i = 0; i < grad.numel(); ++i) CHECK(out[i] == grad[i]);
}

TEST_CASE("warp backward matches finite differences under a small rotation") {
  const GridSpec g = small_grid(5, 0.5);
  Rng rng(48);
  const Transform2 t{0.12, 0.2, -0.15};
  const WarpPlan plan = build_warp_plan(g, t);
  const Tensor h = random_tensor({3, 5, 5}, rng);
  const Tensor proj = random_tensor({3, 5, 5}, rng);
  const Tensor analytic = warp_backward(plan, proj);

  auto f = [&](const std::vector<double>& v) {
    Tensor t2({3, 5, 5});
    std::copy(v.begin(), v.end(), t2.data());
    return dot(warp_forward(plan, t2), proj);
  };
  std::vector<double> x(h.data(), h.data() + h.numel());
  std::vector<double> a(analytic.data(), analytic.data() + analytic.numel());
  CHECK(grad_check(f, a, x).max_rel_err < 1e-6);
}

TEST_CASE("adjoint identity holds to near machine precision") {
  const GridSpec g = small_grid(16, 0.25);
  Rng rng(49);
  for (int trial = 0; trial < 5; ++trial) {
    const Transform2 t{rng.uniform(-0.6, 0.6), rng.uniform(-1, 1),
                       rng.uniform(-1, 1)};
    const WarpPlan plan = build_warp_plan(g, t);
    const Tensor h = random_tensor({2, 16, 16}, rng);
    const Tensor gout = random_tensor({2, 16, 16}, rng);
    const double lhs = dot(warp_forward(plan, h), gout);
    const double rhs = dot(h, warp_backward(plan, gout));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("warp validates tensor shape against the plan") {
  const GridSpec g = small_grid();
  const WarpPlan plan = build_warp_plan(g, Transform2{});
  Tensor wrong({1, g.ny + 1, g.nx});
  CHECK_THROWS_AS(warp_forward(plan, wrong), ShapeMismatch);
  CHECK_THROWS_AS(warp_backward(plan, wrong), ShapeMismatch);
}

TEST_CASE("static scene warped from the previous frame overlays the next") {
  // Fixes the t_rel direction convention: features built in frame i-1,
  // warped with the relative transform between consecutive ego poses, must
  // line up with features built in frame i.
  const GridSpec g = small_grid(8, 0.5);
  const Transform3 pose_prev = Transform3::identity();
  const Transform3 pose_curr = Transform3::translation(0.5, 0.0, 0.0);

  // one static world obstacle, seen from both poses
  const Vec3 world_pt{1.25, 0.75, 0.0};
  auto rasterize = [&](const Transform3& pose) {
    Tensor grid({1, g.ny, g.nx});
    const Vec3 local = pose.inverse().apply(world_pt);
    const Vec3 idx = g.world_to_grid(local);
    grid.at(0, static_cast<int>(std::floor(idx.y)),
            static_cast<int>(std::floor(idx.x))) = 1.0;
    return grid;
  };
  const Tensor grid_prev = rasterize(pose_prev);
  const Tensor grid_curr = rasterize(pose_curr);

  const Transform2 t_rel =
      project_to_plane(relative_transform(pose_prev, pose_curr));
  const Tensor warped = warp_forward(build_warp_plan(g, t_rel), grid_prev);
  for (size_t i = 0; i < warped.numel(); ++i)
    CHECK(warped[i] == grid_curr[i]);
}
