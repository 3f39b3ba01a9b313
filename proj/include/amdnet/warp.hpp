#pragma once

#include <cstdint>
#include <vector>

#include "amdnet/geometry.hpp"
#include "amdnet/tensor.hpp"

namespace amdnet {

// Precomputed bilinear resampling plan that moves a BEV grid from the
// previous frame into the current frame. Built output-driven: every output
// cell samples the input at the inverse-mapped location, so no holes appear.
// Four taps per cell; src is -1 where a tap fell outside the grid or carries
// zero weight (out-of-bounds reads behave as zero padding).
struct WarpPlan {
  int nx = 0;
  int ny = 0;
  std::vector<int32_t> src;  // 4 entries per cell, index into ny*nx plane
  std::vector<double> wgt;

  int cell_count() const { return nx * ny; }
};

// t_rel maps previous-frame coordinates into current-frame coordinates.
WarpPlan build_warp_plan(const GridSpec& grid, const Transform2& t_rel);

// input/output are [c, ny, nx].
Tensor warp_forward(const WarpPlan& plan, const Tensor& input);

// Exact adjoint of warp_forward: scatter-add with the same weights. The
// plan itself is constant, so nothing propagates to the pose.
Tensor warp_backward(const WarpPlan& plan, const Tensor& grad_out);

}  // namespace amdnet
