#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amdnet/tensor.hpp"

namespace amdnet {

// ---------------------------------------------------------------------------
// Convolution. Input [ci, h, w], weights [co, ci, kh, kw], optional bias [co].
// Cross-correlation (no kernel flip), arbitrary stride and zero padding.
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor* bias = nullptr, int stride = 1,
                      int pad = 0);

// Accumulates (+=) into grad_weights / grad_bias so batches can sum in a
// fixed order; grad_input, when requested, is overwritten.
void conv2d_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& weights, Tensor* grad_input,
                     Tensor* grad_weights, Tensor* grad_bias, int stride = 1,
                     int pad = 0);

// ---------------------------------------------------------------------------
// Row-wise affine map. Input [n, d_in], weights [d_out, d_in], bias [d_out].
// ---------------------------------------------------------------------------

Tensor linear_forward(const Tensor& input, const Tensor& weights,
                      const Tensor* bias = nullptr);

void linear_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& weights, Tensor* grad_input,
                     Tensor* grad_weights, Tensor* grad_bias);

// ---------------------------------------------------------------------------
// Activations. The relu subgradient at 0 is 0.
// ---------------------------------------------------------------------------

// In-place relu; records the pass-through mask for the backward pass.
void relu_inplace(Tensor& t, std::vector<uint8_t>& mask);
Tensor relu(const Tensor& t);
void relu_backward_inplace(Tensor& grad, const std::vector<uint8_t>& mask);

double sigmoid(double x);
Tensor sigmoid(const Tensor& t);

// ---------------------------------------------------------------------------
// Loss primitives.
// ---------------------------------------------------------------------------

// 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise, d = pred - target.
double smooth_l1(double pred, double target);
double smooth_l1_grad(double pred, double target);

// Weighted binary cross-entropy evaluated on the logit:
//   -(beta * p * log(sigmoid(z)) + (1 - p) * log(1 - sigmoid(z)))
// in the numerically stable softplus form. Returns the loss; *grad_logit,
// when non-null, receives d(loss)/dz.
double weighted_bce_logit(double logit, double label, double beta,
                          double* grad_logit = nullptr);

// ---------------------------------------------------------------------------
// Parameters and Adam.
// ---------------------------------------------------------------------------

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  int64_t step = 0;

  explicit Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(Tensor(value.shape())),
        adam_m(Tensor(value.shape())),
        adam_v(Tensor(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled: value -= lr * wd * value
};

// One bias-corrected Adam update from param.grad.
void adam_step(Parameter& param, const AdamConfig& cfg);

}  // namespace amdnet
