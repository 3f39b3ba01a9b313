#include "amdnet/nn.hpp"

#include <cmath>
#include <cstring>

namespace amdnet {

namespace {

// GCC refuses to vectorize float reductions under strict FP semantics, which
// leaves the weight-gradient loop scalar and ~4x slower than the rest of the
// backward pass. Reassociation is safe here (any summation order is an
// equally valid gradient), so grant it for this one kernel only.
#if defined(__GNUC__) && !defined(__clang__)
#define AMDNET_ALLOW_REASSOC \
  __attribute__((optimize("-fassociative-math", "-fno-signed-zeros", \
                          "-fno-trapping-math")))
#else
#define AMDNET_ALLOW_REASSOC
#endif

// Nine tap sums of a 3x3 weight gradient for one (out, in) channel pair:
// gwc[ky*3+kx] += sum_{y,x} gout[y][x] * in_pad[y+ky][x+kx].
AMDNET_ALLOW_REASSOC
void grad_weights_3x3(const double* gplane, const double* iplane, int ho,
                      int wo, int pw, double* gwc) {
  double s00 = 0, s01 = 0, s02 = 0, s10 = 0, s11 = 0, s12 = 0, s20 = 0,
         s21 = 0, s22 = 0;
  for (int y = 0; y < ho; ++y) {
    const double* __restrict gr = gplane + static_cast<size_t>(y) * wo;
    const double* __restrict r0 = iplane + static_cast<size_t>(y) * pw;
    const double* __restrict r1 = r0 + pw;
    const double* __restrict r2 = r1 + pw;
    for (int x = 0; x < wo; ++x) {
      const double g = gr[x];
      s00 += g * r0[x]; s01 += g * r0[x + 1]; s02 += g * r0[x + 2];
      s10 += g * r1[x]; s11 += g * r1[x + 1]; s12 += g * r1[x + 2];
      s20 += g * r2[x]; s21 += g * r2[x + 1]; s22 += g * r2[x + 2];
    }
  }
  gwc[0] += s00; gwc[1] += s01; gwc[2] += s02;
  gwc[3] += s10; gwc[4] += s11; gwc[5] += s12;
  gwc[6] += s20; gwc[7] += s21; gwc[8] += s22;
}

// Zero-padded copy of [c, h, w] planes.
void pad_planes(const double* src, int c, int h, int w, int ph, int pw,
                std::vector<double>& dst) {
  const int py = (ph - h) / 2, px = (pw - w) / 2;
  dst.assign(static_cast<size_t>(c) * ph * pw, 0.0);
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      std::memcpy(&dst[(static_cast<size_t>(ci) * ph + y + py) * pw + px],
                  src + (static_cast<size_t>(ci) * h + y) * w,
                  sizeof(double) * w);
}

// Stride-1 correlation over pre-padded planes. Row accumulator stays hot in
// L1; the 3x3 case keeps all nine taps in registers and touches the
// accumulator once per input channel since it dominates runtime.
void corr_s1(const double* in_pad, int ci, int ph, int pw, const double* wts,
             const double* bias, int co, int kh, int kw, int ho, int wo,
             double* out) {
  std::vector<double> acc(static_cast<size_t>(wo));
  for (int o = 0; o < co; ++o) {
    const double* wbase = wts + static_cast<size_t>(o) * ci * kh * kw;
    const double b = bias ? bias[o] : 0.0;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) acc[x] = b;
      for (int c = 0; c < ci; ++c) {
        const double* plane = in_pad + static_cast<size_t>(c) * ph * pw;
        const double* wc = wbase + static_cast<size_t>(c) * kh * kw;
        if (kh == 3 && kw == 3) {
          const double* r0 = plane + static_cast<size_t>(y) * pw;
          const double* r1 = r0 + pw;
          const double* r2 = r1 + pw;
          const double w00 = wc[0], w01 = wc[1], w02 = wc[2];
          const double w10 = wc[3], w11 = wc[4], w12 = wc[5];
          const double w20 = wc[6], w21 = wc[7], w22 = wc[8];
          for (int x = 0; x < wo; ++x)
            acc[x] += w00 * r0[x] + w01 * r0[x + 1] + w02 * r0[x + 2] +
                      w10 * r1[x] + w11 * r1[x + 1] + w12 * r1[x + 2] +
                      w20 * r2[x] + w21 * r2[x + 1] + w22 * r2[x + 2];
          continue;
        }
        for (int ky = 0; ky < kh; ++ky) {
          const double* row = plane + static_cast<size_t>(y + ky) * pw;
          for (int kx = 0; kx < kw; ++kx) {
            const double wv = wc[ky * kw + kx];
            for (int x = 0; x < wo; ++x) acc[x] += wv * row[x + kx];
          }
        }
      }
      std::memcpy(out + (static_cast<size_t>(o) * ho + y) * wo, acc.data(),
                  sizeof(double) * wo);
    }
  }
}

void check_conv_shapes(const Tensor& input, const Tensor& weights,
                       const Tensor* bias, int stride, int pad) {
  if (input.ndim() != 3) throw ShapeMismatch("conv2d input must be [c, h, w]");
  if (weights.ndim() != 4)
    throw ShapeMismatch("conv2d weights must be [co, ci, kh, kw]");
  if (weights.dim(1) != input.dim(0))
    throw ShapeMismatch("conv2d input channels do not match weights");
  if (bias && (bias->ndim() != 1 || bias->dim(0) != weights.dim(0)))
    throw ShapeMismatch("conv2d bias shape");
  if (stride < 1) throw ShapeMismatch("conv2d stride must be >= 1");
  const int kh = weights.dim(2), kw = weights.dim(3);
  if (input.dim(1) + 2 * pad < kh || input.dim(2) + 2 * pad < kw)
    throw ShapeMismatch("conv2d kernel larger than padded input");
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor* bias, int stride, int pad) {
  check_conv_shapes(input, weights, bias, stride, pad);
  const int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  Tensor out({co, ho, wo});

  if (stride == 1) {
    static thread_local std::vector<double> padded;
    const double* src = input.data();
    const int ph = h + 2 * pad, pw = w + 2 * pad;
    if (pad > 0) {
      pad_planes(input.data(), ci, h, w, ph, pw, padded);
      src = padded.data();
    }
    corr_s1(src, ci, ph, pw, weights.data(),
            bias ? bias->data() : nullptr, co, kh, kw, ho, wo, out.data());
    return out;
  }

  // General strided path; used only at test scales.
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double s = bias ? (*bias)[o] : 0.0;
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int yy = y * stride + ky - pad;
              const int xx = x * stride + kx - pad;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              s += weights[((static_cast<size_t>(o) * ci + c) * kh + ky) * kw +
                           kx] *
                   input.at(c, yy, xx);
            }
        out.at(o, y, x) = s;
      }
  return out;
}

void conv2d_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& weights, Tensor* grad_input,
                     Tensor* grad_weights, Tensor* grad_bias, int stride,
                     int pad) {
  check_conv_shapes(input, weights, nullptr, stride, pad);
  const int ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int co = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  require_shape(grad_out, {co, ho, wo}, "conv2d grad_out shape");
  if (grad_weights && !grad_weights->same_shape(weights))
    throw ShapeMismatch("conv2d grad_weights shape");

  if (grad_bias) {
    if (grad_bias->ndim() != 1 || grad_bias->dim(0) != co)
      throw ShapeMismatch("conv2d grad_bias shape");
    for (int o = 0; o < co; ++o) {
      const double* g = grad_out.plane(o);
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      const size_t n = static_cast<size_t>(ho) * wo;
      size_t i = 0;
      for (; i + 4 <= n; i += 4) {
        s0 += g[i]; s1 += g[i + 1]; s2 += g[i + 2]; s3 += g[i + 3];
      }
      for (; i < n; ++i) s0 += g[i];
      (*grad_bias)[o] += (s0 + s1) + (s2 + s3);
    }
  }

  if (stride == 1) {
    static thread_local std::vector<double> in_pad, gout_pad, wflip;
    const int ph = h + 2 * pad, pw = w + 2 * pad;
    const double* in_src = input.data();
    if (pad > 0) {
      pad_planes(input.data(), ci, h, w, ph, pw, in_pad);
      in_src = in_pad.data();
    }

    if (grad_weights) {
      // gw[o][c][ky][kx] = sum_{y,x} gout[o][y][x] * in_pad[c][y+ky][x+kx]
      // 3x3 path keeps all nine tap sums live so each plane is read once.
      double* gw = grad_weights->data();
      for (int o = 0; o < co; ++o) {
        const double* gplane = grad_out.plane(o);
        for (int c = 0; c < ci; ++c) {
          const double* iplane = in_src + static_cast<size_t>(c) * ph * pw;
          double* gwc = gw + (static_cast<size_t>(o) * ci + c) * kh * kw;
          if (kh == 3 && kw == 3) {
            grad_weights_3x3(gplane, iplane, ho, wo, pw, gwc);
            continue;
          }
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
              for (int y = 0; y < ho; ++y) {
                const double* gr = gplane + static_cast<size_t>(y) * wo;
                const double* ir =
                    iplane + static_cast<size_t>(y + ky) * pw + kx;
                int x = 0;
                for (; x + 4 <= wo; x += 4) {
                  s0 += gr[x] * ir[x];
                  s1 += gr[x + 1] * ir[x + 1];
                  s2 += gr[x + 2] * ir[x + 2];
                  s3 += gr[x + 3] * ir[x + 3];
                }
                for (; x < wo; ++x) s0 += gr[x] * ir[x];
              }
              gwc[static_cast<size_t>(ky) * kw + kx] += (s0 + s1) + (s2 + s3);
            }
        }
      }
    }

    if (grad_input) {
      // Full correlation of grad_out with the flipped, transposed kernel.
      *grad_input = Tensor({ci, h, w});
      const int gy = kh - 1 - pad, gx = kw - 1 - pad;
      const int gph = ho + 2 * gy, gpw = wo + 2 * gx;
      pad_planes(grad_out.data(), co, ho, wo, gph, gpw, gout_pad);
      wflip.assign(static_cast<size_t>(ci) * co * kh * kw, 0.0);
      for (int o = 0; o < co; ++o)
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx)
              wflip[((static_cast<size_t>(c) * co + o) * kh + (kh - 1 - ky)) *
                        kw +
                    (kw - 1 - kx)] =
                  weights[((static_cast<size_t>(o) * ci + c) * kh + ky) * kw +
                          kx];
      corr_s1(gout_pad.data(), co, gph, gpw, wflip.data(), nullptr, ci, kh,
              kw, h, w, grad_input->data());
    }
    return;
  }

  // General strided path.
  if (grad_input) *grad_input = Tensor({ci, h, w});
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        const double g = grad_out.at(o, y, x);
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int yy = y * stride + ky - pad;
              const int xx = x * stride + kx - pad;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              const size_t wi =
                  ((static_cast<size_t>(o) * ci + c) * kh + ky) * kw + kx;
              if (grad_weights) (*grad_weights)[wi] += g * input.at(c, yy, xx);
              if (grad_input) grad_input->at(c, yy, xx) += g * weights[wi];
            }
      }
}

Tensor linear_forward(const Tensor& input, const Tensor& weights,
                      const Tensor* bias) {
  if (input.ndim() != 2 || weights.ndim() != 2)
    throw ShapeMismatch("linear expects 2-d input and weights");
  const int n = input.dim(0), din = input.dim(1);
  const int dout = weights.dim(0);
  if (weights.dim(1) != din) throw ShapeMismatch("linear weight columns");
  if (bias && (bias->ndim() != 1 || bias->dim(0) != dout))
    throw ShapeMismatch("linear bias shape");
  Tensor out({n, dout});
  for (int i = 0; i < n; ++i) {
    const double* row = input.data() + static_cast<size_t>(i) * din;
    double* orow = out.data() + static_cast<size_t>(i) * dout;
    for (int o = 0; o < dout; ++o) {
      const double* wrow = weights.data() + static_cast<size_t>(o) * din;
      double s = bias ? (*bias)[o] : 0.0;
      for (int k = 0; k < din; ++k) s += wrow[k] * row[k];
      orow[o] = s;
    }
  }
  return out;
}

void linear_backward(const Tensor& grad_out, const Tensor& input,
                     const Tensor& weights, Tensor* grad_input,
                     Tensor* grad_weights, Tensor* grad_bias) {
  const int n = input.dim(0), din = input.dim(1);
  const int dout = weights.dim(0);
  require_shape(grad_out, {n, dout}, "linear grad_out shape");
  if (grad_input) *grad_input = Tensor({n, din});
  for (int i = 0; i < n; ++i) {
    const double* grow = grad_out.data() + static_cast<size_t>(i) * dout;
    const double* irow = input.data() + static_cast<size_t>(i) * din;
    for (int o = 0; o < dout; ++o) {
      const double g = grow[o];
      if (g == 0.0) continue;
      const double* wrow = weights.data() + static_cast<size_t>(o) * din;
      if (grad_input) {
        double* girow = grad_input->data() + static_cast<size_t>(i) * din;
        for (int k = 0; k < din; ++k) girow[k] += g * wrow[k];
      }
      if (grad_weights) {
        double* gwrow = grad_weights->data() + static_cast<size_t>(o) * din;
        for (int k = 0; k < din; ++k) gwrow[k] += g * irow[k];
      }
      if (grad_bias) (*grad_bias)[o] += g;
    }
  }
}

void relu_inplace(Tensor& t, std::vector<uint8_t>& mask) {
  mask.resize(t.numel());
  double* d = t.data();
  for (size_t i = 0; i < t.numel(); ++i) {
    mask[i] = d[i] > 0.0;
    if (!mask[i]) d[i] = 0.0;
  }
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  double* d = out.data();
  for (size_t i = 0; i < out.numel(); ++i)
    if (d[i] < 0.0) d[i] = 0.0;
  return out;
}

void relu_backward_inplace(Tensor& grad, const std::vector<uint8_t>& mask) {
  if (grad.numel() != mask.size()) throw ShapeMismatch("relu mask size");
  double* d = grad.data();
  for (size_t i = 0; i < grad.numel(); ++i)
    if (!mask[i]) d[i] = 0.0;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& t) {
  Tensor out = t;
  double* d = out.data();
  for (size_t i = 0; i < out.numel(); ++i) d[i] = sigmoid(d[i]);
  return out;
}

double smooth_l1(double pred, double target) {
  const double d = pred - target;
  const double a = std::fabs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double smooth_l1_grad(double pred, double target) {
  const double d = pred - target;
  if (d > 1.0) return 1.0;
  if (d < -1.0) return -1.0;
  return d;
}

namespace {
double softplus(double x) {
  // log(1 + exp(x)) without overflow.
  if (x > 35.0) return x;
  return std::log1p(std::exp(x));
}
}  // namespace

double weighted_bce_logit(double logit, double label, double beta,
                          double* grad_logit) {
  const double loss =
      beta * label * softplus(-logit) + (1.0 - label) * softplus(logit);
  if (grad_logit) {
    const double s = sigmoid(logit);
    *grad_logit = beta * label * (s - 1.0) + (1.0 - label) * s;
  }
  return loss;
}

void adam_step(Parameter& param, const AdamConfig& cfg) {
  param.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(param.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(param.step));
  double* v = param.value.data();
  double* g = param.grad.data();
  double* m = param.adam_m.data();
  double* s = param.adam_v.data();
  const size_t n = param.value.numel();
  for (size_t i = 0; i < n; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = s[i] / bc2;
    v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    v[i] -= cfg.lr * cfg.weight_decay * v[i];
  }
}

}  // namespace amdnet
