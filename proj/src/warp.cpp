#include "amdnet/warp.hpp"

#include <cmath>

#include "amdnet/errors.hpp"

namespace amdnet {

namespace {

// Sampling positions that land within 1e-9 of a cell center are snapped onto
// it, so identity and whole-cell translations reproduce inputs bit for bit.
double snap(double u) {
  const double r = std::rint(u);
  return std::fabs(u - r) < 1e-9 ? r : u;
}

}  // namespace

WarpPlan build_warp_plan(const GridSpec& grid, const Transform2& t_rel) {
  grid.validate();
  WarpPlan plan;
  plan.nx = grid.nx;
  plan.ny = grid.ny;
  const int n = plan.cell_count();
  plan.src.assign(static_cast<size_t>(n) * 4, -1);
  plan.wgt.assign(static_cast<size_t>(n) * 4, 0.0);

  const Transform2 inv = t_rel.inverse();
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const Vec2 c = grid.cell_center(ix, iy);
      const Vec2 q = inv.apply(c);
      // Fractional cell-center coordinates of the source location.
      const double u = snap((q.x - grid.x_min) / grid.cell_size_xy - 0.5);
      const double v = snap((q.y - grid.y_min) / grid.cell_size_xy - 0.5);
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(v));
      const double fx = u - x0;
      const double fy = v - y0;
      const double w[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy),
                           (1.0 - fx) * fy, fx * fy};
      const int sx[4] = {x0, x0 + 1, x0, x0 + 1};
      const int sy[4] = {y0, y0, y0 + 1, y0 + 1};
      const size_t base = (static_cast<size_t>(iy) * grid.nx + ix) * 4;
      for (int k = 0; k < 4; ++k) {
        if (w[k] <= 0.0) continue;
        if (!grid.in_bounds_xy(sx[k], sy[k])) continue;
        plan.src[base + k] = sy[k] * grid.nx + sx[k];
        plan.wgt[base + k] = w[k];
      }
    }
  }
  return plan;
}

Tensor warp_forward(const WarpPlan& plan, const Tensor& input) {
  if (input.ndim() != 3 || input.dim(1) != plan.ny || input.dim(2) != plan.nx)
    throw ShapeMismatch("warp input must be [c, ny, nx] matching the plan");
  const int channels = input.dim(0);
  const int n = plan.cell_count();
  Tensor out({channels, plan.ny, plan.nx});
  for (int c = 0; c < channels; ++c) {
    const double* in = input.plane(c);
    double* o = out.plane(c);
    for (int cell = 0; cell < n; ++cell) {
      const size_t base = static_cast<size_t>(cell) * 4;
      double s = 0.0;
      bool single = false;
      for (int k = 0; k < 4; ++k) {
        const int32_t si = plan.src[base + k];
        if (si < 0) continue;
        const double w = plan.wgt[base + k];
        if (w == 1.0) {
          // Aligned tap: copy exactly instead of multiplying.
          o[cell] = in[si];
          single = true;
          break;
        }
        s += w * in[si];
      }
      if (!single) o[cell] = s;
    }
  }
  return out;
}

Tensor warp_backward(const WarpPlan& plan, const Tensor& grad_out) {
  if (grad_out.ndim() != 3 || grad_out.dim(1) != plan.ny ||
      grad_out.dim(2) != plan.nx)
    throw ShapeMismatch("warp grad_out must be [c, ny, nx] matching the plan");
  const int channels = grad_out.dim(0);
  const int n = plan.cell_count();
  Tensor grad_in({channels, plan.ny, plan.nx});
  for (int c = 0; c < channels; ++c) {
    const double* g = grad_out.plane(c);
    double* gi = grad_in.plane(c);
    for (int cell = 0; cell < n; ++cell) {
      const size_t base = static_cast<size_t>(cell) * 4;
      for (int k = 0; k < 4; ++k) {
        const int32_t si = plan.src[base + k];
        if (si < 0) continue;
        gi[si] += plan.wgt[base + k] * g[cell];
      }
    }
  }
  return grad_in;
}

}  // namespace amdnet
