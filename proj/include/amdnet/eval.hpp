#pragma once

#include <optional>
#include <vector>

#include "amdnet/geometry.hpp"
#include "amdnet/model.hpp"
#include "amdnet/motion_grid.hpp"

namespace amdnet {

// Points whose true flow norm exceeds this are treated as dynamic.
inline constexpr double kDynamicFlowThreshold = 0.08;  // m

// Reads each point's containing cell (floor convention, matching
// world_to_grid) and returns flow = cell velocity * dt with fz = 0. Points
// outside the grid get zero flow.
PointFlow grid_to_point_flow(const MotionGrid& pred, const PointCloud& cloud,
                             const GridSpec& g, double dt);

// Mean 3D end-point error over the shared point set.
double epe(const PointFlow& pred, const PointFlow& gt);  // PointSetMismatch

// EPE restricted to points with true flow above the dynamic threshold;
// empty when no such points exist.
std::optional<double> epe_dynamic(const PointFlow& pred, const PointFlow& gt);

// Rank-sum average precision. Points are ranked by score descending with
// stable ties; labels are 1 dynamic, 0 static.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);  // NoPositives

// Indices of points inside the evaluation region (0 < x < 40, |y| < 40).
// Without road, points below z = 0.1 are dropped as well.
std::vector<int> roi_filter(const std::vector<Vec3>& points, bool with_road);

PointFlow subset_flow(const PointFlow& f, const std::vector<int>& idx);

// Lower bound imposed by the grid resolution: project true flow to cells
// (max-norm wins per cell), read it back per point, return the EPE against
// the original flow.
double oracle_metric(const PointFlow& gt, const GridSpec& g);

PointFlow zero_flow_baseline(const PointCloud& cloud);

// ---------------------------------------------------------------------------
// ICP baseline.
// ---------------------------------------------------------------------------
struct IcpParams {
  int max_iterations = 50;
  double max_correspondence = 1.0;  // m
  double tolerance = 1e-6;          // step size below which we stop
};

struct IcpResult {
  Transform3 transform;  // maps source points onto the target cloud
  int iterations = 0;
  bool converged = false;
};

// Point-to-point ICP with SVD rigid fits and correspondence rejection.
IcpResult icp_fit(const PointCloud& source, const PointCloud& target,
                  const IcpParams& params = {});  // Degenerate

// Flow induced on every source point by the fitted rigid transform.
PointFlow icp_global(const PointCloud& source, const PointCloud& target,
                     const IcpParams& params = {});

// Flow from each source point to its matched target point after
// convergence; unmatched points fall back to the rigid flow.
PointFlow icp_pointwise(const PointCloud& source, const PointCloud& target,
                        const IcpParams& params = {});

// ---------------------------------------------------------------------------
// Scene scoring and timing.
// ---------------------------------------------------------------------------
struct FlowMetrics {
  double epe = 0.0;
  std::optional<double> epe_dynamic;
  std::optional<double> ap;  // empty when the set has no dynamic points
  int points = 0;
  int dynamic_points = 0;
};

FlowMetrics score_flow(const PointFlow& pred, const PointFlow& gt);

struct BenchmarkReport {
  int reps = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
};

// Times model.forward over the given samples, cycling through them.
// Warm-up passes are excluded from the statistics.
BenchmarkReport benchmark(const Model& model, const std::vector<Sample>& samples,
                          int reps, int warmup = 2);

}  // namespace amdnet
