#include "amdnet/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "amdnet/errors.hpp"
#include "amdnet/io.hpp"

namespace amdnet {

std::vector<CellVector> cells_to_vectors(const MotionGrid& pred,
                                         const GridSpec& g, double tau) {
  if (tau <= 0.0 || tau >= 1.0) throw InvalidSpec("tau must lie in (0,1)");
  require_shape(pred.dyn, {1, g.ny, g.nx}, "dyn");
  require_shape(pred.velocity, {2, g.ny, g.nx}, "velocity");
  std::vector<CellVector> out;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) {
      if (pred.dyn.at(0, iy, ix) < tau) continue;
      const Vec2 c = g.cell_center(ix, iy);
      out.push_back({c.x, c.y, pred.velocity.at(0, iy, ix),
                     pred.velocity.at(1, iy, ix)});
    }
  return out;
}

namespace {

// XY buckets of size eps. The 4D scaled distance dominates the XY distance,
// so the 9 surrounding buckets cover every possible eps-neighbor.
class BucketIndex {
 public:
  BucketIndex(const std::vector<CellVector>& v, double eps) : eps_(eps) {
    for (size_t k = 0; k < v.size(); ++k)
      buckets_[key(v[k].x, v[k].y)].push_back(static_cast<int>(k));
  }

  // Ascending indices of all eps-neighbors of i, including i itself.
  std::vector<int> neighbors(const std::vector<CellVector>& v, int i,
                             double scale) const {
    const CellVector& a = v[static_cast<size_t>(i)];
    const double eps2 = eps_ * eps_;
    std::vector<int> out;
    const int cx = coord(a.x), cy = coord(a.y);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const auto it = buckets_.find(pack(cx + dx, cy + dy));
        if (it == buckets_.end()) continue;
        for (int j : it->second) {
          const CellVector& b = v[static_cast<size_t>(j)];
          const double d2 = (a.x - b.x) * (a.x - b.x) +
                            (a.y - b.y) * (a.y - b.y) +
                            scale * scale * ((a.vx - b.vx) * (a.vx - b.vx) +
                                             (a.vy - b.vy) * (a.vy - b.vy));
          if (d2 <= eps2) out.push_back(j);
        }
      }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  int coord(double v) const { return static_cast<int>(std::floor(v / eps_)); }
  int64_t pack(int x, int y) const {
    return (static_cast<int64_t>(x) & 0xffffffff) |
           (static_cast<int64_t>(y) << 32);
  }
  int64_t key(double x, double y) const { return pack(coord(x), coord(y)); }

  double eps_;
  std::unordered_map<int64_t, std::vector<int>> buckets_;
};

}  // namespace

std::vector<int> dbscan(const std::vector<CellVector>& vectors,
                        const DbscanParams& params) {
  if (params.eps <= 0.0) throw InvalidSpec("eps must be positive");
  if (params.min_pts < 1) throw InvalidSpec("min_pts must be >= 1");
  const int n = static_cast<int>(vectors.size());
  constexpr int kUnvisited = -2;
  std::vector<int> labels(static_cast<size_t>(n), kUnvisited);
  if (n == 0) return labels;

  const BucketIndex index(vectors, params.eps);
  const size_t min_pts = static_cast<size_t>(params.min_pts);

  int cluster = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[static_cast<size_t>(i)] != kUnvisited) continue;
    std::vector<int> seeds =
        index.neighbors(vectors, i, params.velocity_scale);
    if (seeds.size() < min_pts) {
      labels[static_cast<size_t>(i)] = -1;
      continue;
    }
    labels[static_cast<size_t>(i)] = cluster;
    for (size_t q = 0; q < seeds.size(); ++q) {
      const int j = seeds[q];
      int& lj = labels[static_cast<size_t>(j)];
      if (lj == -1) lj = cluster;  // border point claimed by this cluster
      if (lj != kUnvisited) continue;
      lj = cluster;
      std::vector<int> nb = index.neighbors(vectors, j, params.velocity_scale);
      if (nb.size() >= min_pts)
        seeds.insert(seeds.end(), nb.begin(), nb.end());
    }
    ++cluster;
  }
  return labels;
}

std::vector<DynamicBox> clusters_to_boxes(
    const std::vector<int>& labels, const std::vector<CellVector>& vectors,
    const PointCloud& cloud, double cell_size) {
  if (labels.size() != vectors.size())
    throw ShapeMismatch("labels vs vectors");
  int clusters = 0;
  for (int l : labels) clusters = std::max(clusters, l + 1);

  const double half = 0.5 * cell_size;
  std::vector<DynamicBox> boxes(static_cast<size_t>(clusters));
  for (DynamicBox& b : boxes) {
    b.x_min = b.y_min = 1e300;
    b.x_max = b.y_max = -1e300;
  }
  for (size_t k = 0; k < vectors.size(); ++k) {
    if (labels[k] < 0) continue;
    DynamicBox& b = boxes[static_cast<size_t>(labels[k])];
    const CellVector& v = vectors[k];
    b.x_min = std::min(b.x_min, v.x - half);
    b.x_max = std::max(b.x_max, v.x + half);
    b.y_min = std::min(b.y_min, v.y - half);
    b.y_max = std::max(b.y_max, v.y + half);
    b.vx += v.vx;
    b.vy += v.vy;
    ++b.cells;
  }
  for (DynamicBox& b : boxes) {
    b.vx /= b.cells;
    b.vy /= b.cells;
    for (const Vec3& p : cloud.points)
      if (p.x >= b.x_min && p.x <= b.x_max && p.y >= b.y_min &&
          p.y <= b.y_max)
        b.height = std::max(b.height, p.z);
  }
  return boxes;
}

std::string boxes_to_csv(const std::vector<DynamicBox>& boxes) {
  CsvWriter w({"id", "x_min", "y_min", "x_max", "y_max", "height", "vx", "vy",
               "cells"});
  for (size_t i = 0; i < boxes.size(); ++i) {
    const DynamicBox& b = boxes[i];
    w.add_row({std::to_string(i), csv_num(b.x_min), csv_num(b.y_min),
               csv_num(b.x_max), csv_num(b.y_max), csv_num(b.height),
               csv_num(b.vx), csv_num(b.vy), std::to_string(b.cells)});
  }
  return w.str();
}

}  // namespace amdnet
