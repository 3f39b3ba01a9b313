#include "amdnet/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "amdnet/errors.hpp"

namespace amdnet {

namespace {

double flow_norm(const Vec3& f) {
  return std::sqrt(f.x * f.x + f.y * f.y + f.z * f.z);
}

// Cell of a point under the floor convention; false when outside the grid.
bool point_cell(const GridSpec& g, const Vec3& p, int* ix, int* iy) {
  const Vec3 idx = g.world_to_grid(p);
  const int x = static_cast<int>(std::floor(idx.x));
  const int y = static_cast<int>(std::floor(idx.y));
  if (!g.in_bounds_xy(x, y)) return false;
  *ix = x;
  *iy = y;
  return true;
}

}  // namespace

PointFlow grid_to_point_flow(const MotionGrid& pred, const PointCloud& cloud,
                             const GridSpec& g, double dt) {
  if (dt <= 0.0) throw InvalidSpec("dt must be positive");
  require_shape(pred.velocity, {2, g.ny, g.nx}, "velocity");
  PointFlow out;
  out.pos = cloud.points;
  out.flow.assign(cloud.points.size(), Vec3{});
  for (size_t k = 0; k < cloud.points.size(); ++k) {
    int ix, iy;
    if (!point_cell(g, cloud.points[k], &ix, &iy)) continue;
    out.flow[k] = {pred.velocity.at(0, iy, ix) * dt,
                   pred.velocity.at(1, iy, ix) * dt, 0.0};
  }
  return out;
}

double epe(const PointFlow& pred, const PointFlow& gt) {
  if (pred.size() != gt.size())
    throw PointSetMismatch("flow sets differ in size");
  if (pred.size() == 0) return 0.0;
  double sum = 0.0;
  for (size_t k = 0; k < pred.size(); ++k) {
    const Vec3 d = {pred.flow[k].x - gt.flow[k].x,
                    pred.flow[k].y - gt.flow[k].y,
                    pred.flow[k].z - gt.flow[k].z};
    sum += flow_norm(d);
  }
  return sum / static_cast<double>(pred.size());
}

std::optional<double> epe_dynamic(const PointFlow& pred, const PointFlow& gt) {
  if (pred.size() != gt.size())
    throw PointSetMismatch("flow sets differ in size");
  std::vector<int> idx;
  for (size_t k = 0; k < gt.size(); ++k)
    if (flow_norm(gt.flow[k]) > kDynamicFlowThreshold)
      idx.push_back(static_cast<int>(k));
  if (idx.empty()) return std::nullopt;
  return epe(subset_flow(pred, idx), subset_flow(gt, idx));
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw PointSetMismatch("scores vs labels");
  int positives = 0;
  for (int l : labels) positives += l ? 1 : 0;
  if (positives == 0) throw NoPositives("no dynamic points to rank");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });

  double ap = 0.0;
  int hits = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (!labels[static_cast<size_t>(order[rank])]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return ap / positives;
}

std::vector<int> roi_filter(const std::vector<Vec3>& points, bool with_road) {
  std::vector<int> keep;
  for (size_t k = 0; k < points.size(); ++k) {
    const Vec3& p = points[k];
    if (!(p.x > 0.0 && p.x < 40.0 && p.y > -40.0 && p.y < 40.0)) continue;
    if (!with_road && p.z < 0.1) continue;
    keep.push_back(static_cast<int>(k));
  }
  return keep;
}

PointFlow subset_flow(const PointFlow& f, const std::vector<int>& idx) {
  PointFlow out;
  out.pos.reserve(idx.size());
  out.flow.reserve(idx.size());
  for (int k : idx) {
    out.pos.push_back(f.pos[static_cast<size_t>(k)]);
    out.flow.push_back(f.flow[static_cast<size_t>(k)]);
  }
  return out;
}

double oracle_metric(const PointFlow& gt, const GridSpec& g) {
  // Max-norm flow per occupied cell.
  std::unordered_map<int, Vec3> cell_flow;
  for (size_t k = 0; k < gt.size(); ++k) {
    int ix, iy;
    if (!point_cell(g, gt.pos[k], &ix, &iy)) continue;
    const int key = iy * g.nx + ix;
    auto it = cell_flow.find(key);
    if (it == cell_flow.end() || flow_norm(gt.flow[k]) > flow_norm(it->second))
      cell_flow[key] = gt.flow[k];
  }
  PointFlow round_trip;
  round_trip.pos = gt.pos;
  round_trip.flow.assign(gt.size(), Vec3{});
  for (size_t k = 0; k < gt.size(); ++k) {
    int ix, iy;
    if (!point_cell(g, gt.pos[k], &ix, &iy)) continue;
    round_trip.flow[k] = cell_flow[iy * g.nx + ix];
  }
  return epe(round_trip, gt);
}

PointFlow zero_flow_baseline(const PointCloud& cloud) {
  PointFlow out;
  out.pos = cloud.points;
  out.flow.assign(cloud.points.size(), Vec3{});
  return out;
}

namespace {

// Uniform hash grid for nearest-neighbor lookups within a fixed radius.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<Vec3>& points, double cell)
      : points_(points), cell_(cell) {
    for (size_t k = 0; k < points.size(); ++k)
      cells_[key(points[k])].push_back(static_cast<int>(k));
  }

  // Index of the nearest point within radius, or -1.
  int nearest(const Vec3& q, double radius) const {
    const double r2 = radius * radius;
    const int cx = coord(q.x), cy = coord(q.y), cz = coord(q.z);
    // radius <= cell_, so the 27 surrounding cells cover the ball.
    int best = -1;
    double best_d2 = r2;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (int k : it->second) {
            const Vec3& p = points_[static_cast<size_t>(k)];
            const double d2 = (p.x - q.x) * (p.x - q.x) +
                              (p.y - q.y) * (p.y - q.y) +
                              (p.z - q.z) * (p.z - q.z);
            if (d2 <= best_d2) {
              best_d2 = d2;
              best = k;
            }
          }
        }
    return best;
  }

 private:
  int coord(double v) const { return static_cast<int>(std::floor(v / cell_)); }
  int64_t pack(int x, int y, int z) const {
    return (static_cast<int64_t>(x) & 0x1fffff) |
           ((static_cast<int64_t>(y) & 0x1fffff) << 21) |
           ((static_cast<int64_t>(z) & 0x1fffff) << 42);
  }
  int64_t key(const Vec3& p) const {
    return pack(coord(p.x), coord(p.y), coord(p.z));
  }

  const std::vector<Vec3>& points_;
  double cell_;
  std::unordered_map<int64_t, std::vector<int>> cells_;
};

Transform3 rigid_fit(const std::vector<Vec3>& src,
                     const std::vector<Vec3>& dst) {
  const size_t n = src.size();
  if (n < 3) throw Degenerate("too few correspondences for a rigid fit");
  Eigen::Vector3d ca = Eigen::Vector3d::Zero(), cb = Eigen::Vector3d::Zero();
  for (size_t k = 0; k < n; ++k) {
    ca += Eigen::Vector3d(src[k].x, src[k].y, src[k].z);
    cb += Eigen::Vector3d(dst[k].x, dst[k].y, dst[k].z);
  }
  ca /= static_cast<double>(n);
  cb /= static_cast<double>(n);

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (size_t k = 0; k < n; ++k) {
    const Eigen::Vector3d a(src[k].x - ca.x(), src[k].y - ca.y(),
                            src[k].z - ca.z());
    const Eigen::Vector3d b(dst[k].x - cb.x(), dst[k].y - cb.y(),
                            dst[k].z - cb.z());
    h += a * b.transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Rotation is only determined when the spread spans >= 2 directions.
  if (svd.singularValues()(1) < 1e-12)
    throw Degenerate("correspondence covariance is rank deficient");
  Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d v = svd.matrixV();
    v.col(2) *= -1.0;
    r = v * svd.matrixU().transpose();
  }
  const Eigen::Vector3d t = cb - r * ca;

  Mat3 rot;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) rot.m[i][j] = r(i, j);
  return Transform3(rot, {t.x(), t.y(), t.z()});
}

}  // namespace

IcpResult icp_fit(const PointCloud& source, const PointCloud& target,
                  const IcpParams& params) {
  if (source.empty() || target.empty())
    throw Degenerate("icp needs two non-empty clouds");
  const NeighborGrid nn(target.points, params.max_correspondence);

  IcpResult res;
  res.transform = Transform3::identity();
  std::vector<Vec3> moved(source.points.size());
  std::vector<Vec3> src_match, dst_match;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    res.iterations = iter + 1;
    for (size_t k = 0; k < source.points.size(); ++k)
      moved[k] = res.transform.apply(source.points[k]);

    src_match.clear();
    dst_match.clear();
    for (size_t k = 0; k < moved.size(); ++k) {
      const int j = nn.nearest(moved[k], params.max_correspondence);
      if (j < 0) continue;
      src_match.push_back(moved[k]);
      dst_match.push_back(target.points[static_cast<size_t>(j)]);
    }

    const Transform3 delta = rigid_fit(src_match, dst_match);
    res.transform = compose(delta, res.transform);

    double step = delta.translation().norm();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        step += std::fabs(delta.rotation().m[i][j] - (i == j ? 1.0 : 0.0));
    if (step < params.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

PointFlow icp_global(const PointCloud& source, const PointCloud& target,
                     const IcpParams& params) {
  const IcpResult res = icp_fit(source, target, params);
  PointFlow out;
  out.pos = source.points;
  out.flow.resize(source.points.size());
  for (size_t k = 0; k < source.points.size(); ++k) {
    const Vec3 q = res.transform.apply(source.points[k]);
    out.flow[k] = {q.x - source.points[k].x, q.y - source.points[k].y,
                   q.z - source.points[k].z};
  }
  return out;
}

PointFlow icp_pointwise(const PointCloud& source, const PointCloud& target,
                        const IcpParams& params) {
  const IcpResult res = icp_fit(source, target, params);
  const NeighborGrid nn(target.points, params.max_correspondence);
  PointFlow out;
  out.pos = source.points;
  out.flow.resize(source.points.size());
  for (size_t k = 0; k < source.points.size(); ++k) {
    const Vec3& p = source.points[k];
    const Vec3 q = res.transform.apply(p);
    const int j = nn.nearest(q, params.max_correspondence);
    const Vec3 m = j >= 0 ? target.points[static_cast<size_t>(j)] : q;
    out.flow[k] = {m.x - p.x, m.y - p.y, m.z - p.z};
  }
  return out;
}

FlowMetrics score_flow(const PointFlow& pred, const PointFlow& gt) {
  FlowMetrics m;
  m.epe = epe(pred, gt);
  m.epe_dynamic = epe_dynamic(pred, gt);
  m.points = static_cast<int>(gt.size());

  std::vector<double> scores(gt.size());
  std::vector<int> labels(gt.size());
  for (size_t k = 0; k < gt.size(); ++k) {
    scores[k] = flow_norm(pred.flow[k]);
    labels[k] = flow_norm(gt.flow[k]) > kDynamicFlowThreshold ? 1 : 0;
    m.dynamic_points += labels[k];
  }
  if (m.dynamic_points > 0) m.ap = average_precision(scores, labels);
  return m;
}

BenchmarkReport benchmark(const Model& model,
                          const std::vector<Sample>& samples, int reps,
                          int warmup) {
  BenchmarkReport report;
  if (samples.empty() || reps <= 0) return report;
  using clock = std::chrono::steady_clock;

  for (int i = 0; i < warmup; ++i)
    (void)model.forward(samples[static_cast<size_t>(i) % samples.size()]);

  std::vector<double> ms(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    (void)model.forward(samples[static_cast<size_t>(i) % samples.size()]);
    const auto t1 = clock::now();
    ms[static_cast<size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  report.reps = reps;
  report.mean_ms =
      std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(reps);
  std::sort(ms.begin(), ms.end());
  const size_t idx =
      std::min(ms.size() - 1,
               static_cast<size_t>(std::ceil(0.95 * static_cast<double>(reps))) -
                   1);
  report.p95_ms = ms[idx];
  return report;
}

}  // namespace amdnet
