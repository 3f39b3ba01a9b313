#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "amdnet/geometry.hpp"
#include "amdnet/tensor.hpp"
#include "amdnet/vec.hpp"

namespace amdnet {

struct PointCloud {
  std::vector<Vec3> points;
  // Optional per-point intensity; empty or same length as points. Carried
  // through I/O but not used by the encoder.
  std::vector<double> intensity;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// (x, y, z, x - cx, y - cy, z - cz) with (cx, cy, cz) the geometric center
// of the voxel containing p.
std::array<double, 6> augment_point(const Vec3& p, const Vec3& voxel_center);

struct Voxel {
  int ix = 0, iy = 0, iz = 0;
  int raw_count = 0;  // in-bounds points mapped here before the cap
  std::vector<std::array<double, 6>> feats;
};

struct VoxelBatch {
  std::vector<Voxel> voxels;  // sorted by (iy, ix, iz); columns contiguous
  size_t in_bounds_points = 0;
};

// Floor-based assignment, out-of-bounds points dropped. At most
// kVoxelPointCap points kept per voxel, first arrivals win.
inline constexpr int kVoxelPointCap = 32;
VoxelBatch voxelize(const PointCloud& cloud, const GridSpec& g);

// Non-owning view of the encoder weights. Two VFE layers:
//   vfe_w[0]: [w1, 6]          vfe_b[0]: [w1]
//   vfe_w[1]: [w2, 2*w1]       vfe_b[1]: [w2]
// squash_w: [c, nz*w2], squash_b: [c]   (1x1 over occupied columns, ReLU)
// conv_w[k]: [c, c, 3, 3]                (bias-free 3x3 mixing, ReLU)
struct EncoderWeights {
  const Tensor* vfe_w[2] = {nullptr, nullptr};
  const Tensor* vfe_b[2] = {nullptr, nullptr};
  const Tensor* squash_w = nullptr;
  const Tensor* squash_b = nullptr;
  const Tensor* conv_w[2] = {nullptr, nullptr};
};

struct EncoderGrads {
  Tensor* vfe_w[2] = {nullptr, nullptr};
  Tensor* vfe_b[2] = {nullptr, nullptr};
  Tensor* squash_w = nullptr;
  Tensor* squash_b = nullptr;
  Tensor* conv_w[2] = {nullptr, nullptr};
};

struct VfeCache {
  bool valid = false;
  std::vector<size_t> seg_begin;  // voxel v spans rows [seg_begin[v], seg_begin[v+1])
  Tensor points;                  // [n, 6] augmented inputs
  Tensor act1;                    // [n, w1] post-relu
  std::vector<uint8_t> mask1;
  std::vector<int32_t> argmax1;   // [V * w1] row index of pooled max
  Tensor concat1;                 // [n, 2*w1] input to layer 2
  Tensor act2;                    // [n, w2] post-relu
  std::vector<uint8_t> mask2;
  std::vector<int32_t> argmax2;   // [V * w2]
};

// Voxel vectors [V, w2], rows ordered like batch.voxels.
Tensor vfe_forward(const VoxelBatch& batch, const EncoderWeights& w,
                   VfeCache* cache = nullptr);

// Accumulates into grads; point-input gradients are discarded (points are
// data, not parameters).
void vfe_backward(const Tensor& grad_voxels, const VoxelBatch& batch,
                  const VfeCache& cache, const EncoderWeights& w,
                  const EncoderGrads& grads);

struct EncodeCache {
  bool valid = false;
  VoxelBatch batch;
  VfeCache vfe;
  std::vector<int32_t> col_cell;  // occupied column -> iy*nx+ix
  std::vector<int32_t> voxel_col;  // voxel row -> occupied-column slot
  Tensor columns;                  // [n_cols, nz*w2]
  Tensor col_act;                  // [n_cols, c] post-relu squash output
  std::vector<uint8_t> col_mask;
  Tensor dense0;  // [c, ny, nx] scattered squash output, conv1 input
  Tensor act_c1;  // [c, ny, nx] post-relu conv1 output, conv2 input
  std::vector<uint8_t> mask_c1, mask_c2;

  void release() { *this = EncodeCache(); }
};

// Full per-frame BEV feature map X_i: VFE -> column stack -> sparse 1x1
// squash (+ReLU) -> two bias-free 3x3 convolutions (+ReLU).
Tensor encode_cloud(const PointCloud& cloud, const GridSpec& g,
                    const EncoderWeights& w, EncodeCache* cache = nullptr);

void encode_cloud_backward(const Tensor& grad_out, const GridSpec& g,
                           const EncodeCache& cache, const EncoderWeights& w,
                           const EncoderGrads& grads);

}  // namespace amdnet
