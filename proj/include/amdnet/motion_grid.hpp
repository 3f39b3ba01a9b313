#pragma once

#include <vector>

#include "amdnet/tensor.hpp"
#include "amdnet/vec.hpp"

namespace amdnet {

// BEV motion state. Predictions carry velocity + dyn probability; ground
// truth additionally carries a known mask (velocity supervision exists only
// where known = 1) and dyn holds hard {0,1} labels.
struct MotionGrid {
  Tensor velocity;  // [2, ny, nx] m/s
  Tensor dyn;       // [1, ny, nx]
  Tensor known;     // [1, ny, nx]; empty for predictions

  bool has_known() const { return !known.empty(); }
};

// Per-point displacement over one frame interval. fz stays 0 for all
// grid-derived flows.
struct PointFlow {
  std::vector<Vec3> pos;
  std::vector<Vec3> flow;

  size_t size() const { return pos.size(); }
};

}  // namespace amdnet
