#include "amdnet/voxel_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "amdnet/errors.hpp"
#include "amdnet/nn.hpp"

namespace amdnet {

std::array<double, 6> augment_point(const Vec3& p, const Vec3& voxel_center) {
  return {p.x, p.y, p.z, p.x - voxel_center.x, p.y - voxel_center.y,
          p.z - voxel_center.z};
}

VoxelBatch voxelize(const PointCloud& cloud, const GridSpec& g) {
  g.validate();
  VoxelBatch batch;
  std::unordered_map<int64_t, size_t> slots;
  slots.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) {
    const Vec3 gc = g.world_to_grid(p);
    const int ix = static_cast<int>(std::floor(gc.x));
    const int iy = static_cast<int>(std::floor(gc.y));
    const int iz = static_cast<int>(std::floor(gc.z));
    if (!g.in_bounds_xy(ix, iy) || iz < 0 || iz >= g.nz) continue;
    ++batch.in_bounds_points;
    const int64_t key =
        (static_cast<int64_t>(iy) * g.nx + ix) * g.nz + iz;
    auto [it, inserted] = slots.try_emplace(key, batch.voxels.size());
    if (inserted) {
      Voxel v;
      v.ix = ix;
      v.iy = iy;
      v.iz = iz;
      batch.voxels.push_back(std::move(v));
    }
    Voxel& v = batch.voxels[it->second];
    ++v.raw_count;
    if (static_cast<int>(v.feats.size()) < kVoxelPointCap) {
      const Vec2 cx = g.cell_center(ix, iy);
      const Vec3 center{cx.x, cx.y, g.z_min + (iz + 0.5) * g.voxel_size_z};
      v.feats.push_back(augment_point(p, center));
    }
  }
  std::sort(batch.voxels.begin(), batch.voxels.end(),
            [&g](const Voxel& a, const Voxel& b) {
              const int64_t ka =
                  (static_cast<int64_t>(a.iy) * g.nx + a.ix) * g.nz + a.iz;
              const int64_t kb =
                  (static_cast<int64_t>(b.iy) * g.nx + b.ix) * g.nz + b.iz;
              return ka < kb;
            });
  return batch;
}

namespace {

struct VfeDims {
  int w1 = 0, w2 = 0;
};

VfeDims check_vfe_weights(const EncoderWeights& w) {
  for (int i = 0; i < 2; ++i)
    if (!w.vfe_w[i] || !w.vfe_b[i])
      throw ShapeMismatch("vfe weights missing");
  VfeDims d;
  d.w1 = w.vfe_w[0]->dim(0);
  d.w2 = w.vfe_w[1]->dim(0);
  if (w.vfe_w[0]->ndim() != 2 || w.vfe_w[0]->dim(1) != 6)
    throw ShapeMismatch("vfe layer 1 expects 6 input features");
  if (w.vfe_w[1]->ndim() != 2 || w.vfe_w[1]->dim(1) != 2 * d.w1)
    throw ShapeMismatch("vfe layer 2 expects concatenated width");
  if (w.vfe_b[0]->dim(0) != d.w1 || w.vfe_b[1]->dim(0) != d.w2)
    throw ShapeMismatch("vfe bias widths");
  return d;
}

// Voxel-wise max over rows [begin, end) per feature; lowest row wins ties.
void segment_max(const Tensor& rows, const std::vector<size_t>& seg_begin,
                 int width, Tensor& pooled, std::vector<int32_t>& argmax) {
  const size_t nv = seg_begin.size() - 1;
  for (size_t v = 0; v < nv; ++v) {
    double* out = pooled.data() + v * static_cast<size_t>(width);
    int32_t* arg = argmax.data() + v * static_cast<size_t>(width);
    const size_t b = seg_begin[v], e = seg_begin[v + 1];
    for (int j = 0; j < width; ++j) {
      double best = rows.data()[b * width + j];
      size_t best_row = b;
      for (size_t r = b + 1; r < e; ++r) {
        const double val = rows.data()[r * width + j];
        if (val > best) {
          best = val;
          best_row = r;
        }
      }
      out[j] = best;
      arg[j] = static_cast<int32_t>(best_row);
    }
  }
}

}  // namespace

Tensor vfe_forward(const VoxelBatch& batch, const EncoderWeights& w,
                   VfeCache* cache) {
  const VfeDims d = check_vfe_weights(w);
  const size_t nv = batch.voxels.size();
  size_t n = 0;
  for (const Voxel& v : batch.voxels) n += v.feats.size();

  VfeCache local;
  VfeCache& c = cache ? *cache : local;
  c = VfeCache();
  c.seg_begin.resize(nv + 1);
  c.points = Tensor({static_cast<int>(n), 6});
  size_t row = 0;
  for (size_t v = 0; v < nv; ++v) {
    c.seg_begin[v] = row;
    for (const auto& f : batch.voxels[v].feats) {
      std::memcpy(c.points.data() + row * 6, f.data(), sizeof(double) * 6);
      ++row;
    }
  }
  c.seg_begin[nv] = row;

  c.act1 = linear_forward(c.points, *w.vfe_w[0], w.vfe_b[0]);
  relu_inplace(c.act1, c.mask1);
  Tensor pooled1({static_cast<int>(nv), d.w1});
  c.argmax1.assign(nv * static_cast<size_t>(d.w1), 0);
  segment_max(c.act1, c.seg_begin, d.w1, pooled1, c.argmax1);

  c.concat1 = Tensor({static_cast<int>(n), 2 * d.w1});
  for (size_t v = 0; v < nv; ++v) {
    const double* pool = pooled1.data() + v * static_cast<size_t>(d.w1);
    for (size_t r = c.seg_begin[v]; r < c.seg_begin[v + 1]; ++r) {
      double* dst = c.concat1.data() + r * (2 * d.w1);
      std::memcpy(dst, c.act1.data() + r * d.w1, sizeof(double) * d.w1);
      std::memcpy(dst + d.w1, pool, sizeof(double) * d.w1);
    }
  }

  c.act2 = linear_forward(c.concat1, *w.vfe_w[1], w.vfe_b[1]);
  relu_inplace(c.act2, c.mask2);
  Tensor out({static_cast<int>(nv), d.w2});
  c.argmax2.assign(nv * static_cast<size_t>(d.w2), 0);
  segment_max(c.act2, c.seg_begin, d.w2, out, c.argmax2);
  c.valid = true;
  return out;
}

void vfe_backward(const Tensor& grad_voxels, const VoxelBatch& batch,
                  const VfeCache& cache, const EncoderWeights& w,
                  const EncoderGrads& grads) {
  if (!cache.valid) throw MissingCache("vfe_backward without forward cache");
  const VfeDims d = check_vfe_weights(w);
  const size_t nv = batch.voxels.size();
  const int n = cache.points.dim(0);
  require_shape(grad_voxels, {static_cast<int>(nv), d.w2}, "vfe grad shape");

  Tensor gact2({n, d.w2});
  for (size_t v = 0; v < nv; ++v)
    for (int j = 0; j < d.w2; ++j) {
      const int32_t r = cache.argmax2[v * d.w2 + j];
      gact2.data()[static_cast<size_t>(r) * d.w2 + j] +=
          grad_voxels.data()[v * static_cast<size_t>(d.w2) + j];
    }
  relu_backward_inplace(gact2, cache.mask2);

  Tensor gconcat1;
  linear_backward(gact2, cache.concat1, *w.vfe_w[1], &gconcat1,
                  grads.vfe_w[1], grads.vfe_b[1]);

  Tensor gact1({n, d.w1});
  for (size_t v = 0; v < nv; ++v) {
    // Pooled features were broadcast to every row of the voxel; their
    // gradients collapse back onto the arg-max row.
    for (int j = 0; j < d.w1; ++j) {
      double s = 0.0;
      for (size_t r = cache.seg_begin[v]; r < cache.seg_begin[v + 1]; ++r)
        s += gconcat1.data()[r * (2 * d.w1) + d.w1 + j];
      const int32_t am = cache.argmax1[v * d.w1 + j];
      gact1.data()[static_cast<size_t>(am) * d.w1 + j] += s;
    }
    for (size_t r = cache.seg_begin[v]; r < cache.seg_begin[v + 1]; ++r)
      for (int j = 0; j < d.w1; ++j)
        gact1.data()[r * d.w1 + j] += gconcat1.data()[r * (2 * d.w1) + j];
  }
  relu_backward_inplace(gact1, cache.mask1);
  linear_backward(gact1, cache.points, *w.vfe_w[0], nullptr, grads.vfe_w[0],
                  grads.vfe_b[0]);
}

namespace {

int check_encoder_weights(const EncoderWeights& w, const GridSpec& g,
                          int w2) {
  if (!w.squash_w || !w.squash_b || !w.conv_w[0] || !w.conv_w[1])
    throw ShapeMismatch("encoder weights missing");
  if (w.squash_w->ndim() != 2 || w.squash_w->dim(1) != g.nz * w2)
    throw ShapeMismatch("column squash expects nz*w2 inputs");
  const int c = w.squash_w->dim(0);
  if (w.squash_b->dim(0) != c) throw ShapeMismatch("squash bias width");
  for (int k = 0; k < 2; ++k) {
    const Tensor& cw = *w.conv_w[k];
    if (cw.ndim() != 4 || cw.dim(0) != c || cw.dim(1) != c ||
        cw.dim(2) != 3 || cw.dim(3) != 3)
      throw ShapeMismatch("mixing convolutions must be [c, c, 3, 3]");
  }
  return c;
}

}  // namespace

Tensor encode_cloud(const PointCloud& cloud, const GridSpec& g,
                    const EncoderWeights& w, EncodeCache* cache) {
  EncodeCache local;
  EncodeCache& c = cache ? *cache : local;
  c.release();
  c.batch = voxelize(cloud, g);
  const Tensor voxvec = vfe_forward(c.batch, w, &c.vfe);
  const int w2 = voxvec.dim(1);
  const int ch = check_encoder_weights(w, g, w2);

  const size_t nv = c.batch.voxels.size();
  c.voxel_col.resize(nv);
  for (size_t v = 0; v < nv; ++v) {
    const Voxel& vox = c.batch.voxels[v];
    const int32_t cell = vox.iy * g.nx + vox.ix;
    if (c.col_cell.empty() || c.col_cell.back() != cell)
      c.col_cell.push_back(cell);
    c.voxel_col[v] = static_cast<int32_t>(c.col_cell.size() - 1);
  }
  const int ncols = static_cast<int>(c.col_cell.size());

  c.columns = Tensor({ncols, g.nz * w2});
  for (size_t v = 0; v < nv; ++v) {
    const Voxel& vox = c.batch.voxels[v];
    std::memcpy(c.columns.data() +
                    (static_cast<size_t>(c.voxel_col[v]) * g.nz + vox.iz) * w2,
                voxvec.data() + v * static_cast<size_t>(w2),
                sizeof(double) * w2);
  }

  c.col_act = linear_forward(c.columns, *w.squash_w, w.squash_b);
  relu_inplace(c.col_act, c.col_mask);

  c.dense0 = Tensor({ch, g.ny, g.nx});
  for (int col = 0; col < ncols; ++col) {
    const int32_t cell = c.col_cell[col];
    for (int k = 0; k < ch; ++k)
      c.dense0.plane(k)[cell] =
          c.col_act.data()[static_cast<size_t>(col) * ch + k];
  }

  c.act_c1 = conv2d_forward(c.dense0, *w.conv_w[0], nullptr, 1, 1);
  relu_inplace(c.act_c1, c.mask_c1);
  Tensor out = conv2d_forward(c.act_c1, *w.conv_w[1], nullptr, 1, 1);
  relu_inplace(out, c.mask_c2);
  c.valid = true;
  return out;
}

void encode_cloud_backward(const Tensor& grad_out, const GridSpec& g,
                           const EncodeCache& cache, const EncoderWeights& w,
                           const EncoderGrads& grads) {
  if (!cache.valid)
    throw MissingCache("encode_cloud_backward without forward cache");
  const int w2 = w.vfe_w[1]->dim(0);
  const int ch = check_encoder_weights(w, g, w2);
  require_shape(grad_out, {ch, g.ny, g.nx}, "encoder grad_out shape");

  Tensor g2 = grad_out;
  relu_backward_inplace(g2, cache.mask_c2);
  Tensor g1;
  conv2d_backward(g2, cache.act_c1, *w.conv_w[1], &g1, grads.conv_w[1],
                  nullptr, 1, 1);
  relu_backward_inplace(g1, cache.mask_c1);
  Tensor g0;
  conv2d_backward(g1, cache.dense0, *w.conv_w[0], &g0, grads.conv_w[0],
                  nullptr, 1, 1);

  const int ncols = static_cast<int>(cache.col_cell.size());
  Tensor gcol({ncols, ch});
  for (int col = 0; col < ncols; ++col) {
    const int32_t cell = cache.col_cell[col];
    for (int k = 0; k < ch; ++k)
      gcol.data()[static_cast<size_t>(col) * ch + k] = g0.plane(k)[cell];
  }
  relu_backward_inplace(gcol, cache.col_mask);

  Tensor gcolumns;
  linear_backward(gcol, cache.columns, *w.squash_w, &gcolumns, grads.squash_w,
                  grads.squash_b);

  const size_t nv = cache.batch.voxels.size();
  Tensor gvox({static_cast<int>(nv), w2});
  for (size_t v = 0; v < nv; ++v) {
    const Voxel& vox = cache.batch.voxels[v];
    std::memcpy(gvox.data() + v * static_cast<size_t>(w2),
                gcolumns.data() +
                    (static_cast<size_t>(cache.voxel_col[v]) * g.nz + vox.iz) *
                        w2,
                sizeof(double) * w2);
  }
  vfe_backward(gvox, cache.batch, cache.vfe, w, grads);
}

}  // namespace amdnet
