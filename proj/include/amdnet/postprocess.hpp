#pragma once

#include <string>
#include <vector>

#include "amdnet/geometry.hpp"
#include "amdnet/motion_grid.hpp"
#include "amdnet/voxel_encoder.hpp"

namespace amdnet {

// One dynamic cell, positioned at its center.
struct CellVector {
  double x = 0.0;   // m
  double y = 0.0;   // m
  double vx = 0.0;  // m/s
  double vy = 0.0;  // m/s
};

// Axis-aligned BEV box over one cluster of dynamic cells.
struct DynamicBox {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;  // m
  double height = 0.0;  // max point z inside the footprint, 0 when empty
  double vx = 0.0, vy = 0.0;  // mean member velocity, m/s
  int cells = 0;
};

// One vector per cell with dyn probability >= tau. pred.dyn holds
// probabilities here (a model output, not hard labels).
std::vector<CellVector> cells_to_vectors(const MotionGrid& pred,
                                         const GridSpec& g, double tau);

struct DbscanParams {
  double eps = 0.6;
  int min_pts = 3;            // includes the point itself
  double velocity_scale = 0.5;  // s; 1 m/s counts as this many meters
};

// Density clustering over (x, y, scale*vx, scale*vy). Returns one label per
// vector: cluster ids from 0 in discovery order, -1 for noise. Expansion
// visits neighbors in ascending input order, so the labeling is
// deterministic for a given input order.
std::vector<int> dbscan(const std::vector<CellVector>& vectors,
                        const DbscanParams& params = {});

// Boxes per cluster: footprint spans member cell centers +- half a cell,
// velocity is the member mean, height the tallest cloud point inside the
// footprint. Noise vectors are dropped. Ordered by cluster id.
std::vector<DynamicBox> clusters_to_boxes(const std::vector<int>& labels,
                                          const std::vector<CellVector>& vectors,
                                          const PointCloud& cloud,
                                          double cell_size);

// CSV with header (id, x_min, y_min, x_max, y_max, height, vx, vy, cells).
std::string boxes_to_csv(const std::vector<DynamicBox>& boxes);

}  // namespace amdnet
