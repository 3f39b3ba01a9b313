#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "amdnet/errors.hpp"

namespace amdnet {

// Dense 64-bit tensor, row-major. Small and deliberately dumb: the kernels in
// nn.hpp do the real work on raw pointers.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    size_t n = 1;
    for (int d : shape_) {
      if (d < 0) throw ShapeMismatch("negative extent");
      n *= static_cast<size_t>(d);
    }
    v_.assign(n, 0.0);
  }
  Tensor(std::initializer_list<int> shape)
      : Tensor(std::vector<int>(shape)) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  size_t numel() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator[](size_t i) { return v_[i]; }
  double operator[](size_t i) const { return v_[i]; }

  // 3-d accessor for [channels, ny, nx] tensors.
  double& at(int c, int y, int x) {
    return v_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double at(int c, int y, int x) const {
    return v_[(static_cast<size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double* plane(int c) {
    return v_.data() + static_cast<size_t>(c) * shape_[1] * shape_[2];
  }
  const double* plane(int c) const {
    return v_.data() + static_cast<size_t>(c) * shape_[1] * shape_[2];
  }

  void fill(double v) { v_.assign(v_.size(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

inline void require_shape(const Tensor& t, const std::vector<int>& shape,
                          const char* what) {
  if (t.shape() != shape) throw ShapeMismatch(what);
}

}  // namespace amdnet
