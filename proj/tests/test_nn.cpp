#include <doctest.h>

#include <cmath>
#include <vector>

#include "amdnet/grad_check.hpp"
#include "amdnet/nn.hpp"
#include "amdnet/rng.hpp"

using namespace amdnet;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-scale, scale);
  return t;
}

// Reference convolution as the plain quintuple loop, independent of the
// production kernel's padding/accumulator scheme.
Tensor conv_naive(const Tensor& in, const Tensor& w, const Tensor* b,
                  int stride, int pad) {
  const int ci = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wd + 2 * pad - kw) / stride + 1;
  Tensor out({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double s = b ? (*b)[o] : 0.0;
        for (int c = 0; c < ci; ++c)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int yy = y * stride + ky - pad;
              const int xx = x * stride + kx - pad;
              if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
              s += w[((static_cast<size_t>(o) * ci + c) * kh + ky) * kw + kx] *
                   in.at(c, yy, xx);
            }
        out.at(o, y, x) = s;
      }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0.0;
  for (size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

std::vector<double> flat(const Tensor& t) {
  return std::vector<double>(t.data(), t.data() + t.numel());
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel copies input") {
  Rng rng(21);
  const Tensor in = random_tensor({3, 5, 7}, rng);
  Tensor w({3, 3, 1, 1});
  for (int o = 0; o < 3; ++o) w[(o * 3 + o)] = 1.0;
  const Tensor out = conv2d_forward(in, w);
  CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("conv2d: 3x3 averaging kernel keeps constants in the interior") {
  Tensor in({1, 6, 6});
  in.fill(4.25);
  Tensor w({1, 1, 3, 3});
  for (size_t i = 0; i < 9; ++i) w[i] = 1.0 / 9.0;
  const Tensor out = conv2d_forward(in, w, nullptr, 1, 1);
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 5; ++x)
      CHECK(out.at(0, y, x) == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("conv2d matches the naive reference on assorted shapes") {
  Rng rng(22);
  struct Case {
    int ci, h, w, co, kh, kw, stride, pad;
  };
  const Case cases[] = {
      {1, 4, 4, 1, 3, 3, 1, 1}, {2, 7, 5, 3, 3, 3, 1, 1},
      {3, 8, 8, 2, 1, 1, 1, 0}, {2, 9, 9, 2, 3, 3, 2, 1},
      {1, 5, 5, 1, 5, 5, 1, 2}, {4, 6, 6, 4, 3, 3, 1, 0},
      {2, 6, 8, 3, 2, 4, 1, 1},
  };
  for (const Case& c : cases) {
    const Tensor in = random_tensor({c.ci, c.h, c.w}, rng);
    const Tensor w = random_tensor({c.co, c.ci, c.kh, c.kw}, rng);
    const Tensor b = random_tensor({c.co}, rng);
    const Tensor got = conv2d_forward(in, w, &b, c.stride, c.pad);
    const Tensor want = conv_naive(in, w, &b, c.stride, c.pad);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("conv2d is shift-equivariant in the interior") {
  Rng rng(23);
  const int h = 8, wd = 8;
  Tensor in = random_tensor({1, h, wd}, rng);
  Tensor shifted({1, h, wd});
  for (int y = 0; y < h; ++y)
    for (int x = 1; x < wd; ++x) shifted.at(0, y, x) = in.at(0, y, x - 1);
  const Tensor w = random_tensor({1, 1, 3, 3}, rng);
  const Tensor a = conv2d_forward(in, w, nullptr, 1, 1);
  const Tensor b = conv2d_forward(shifted, w, nullptr, 1, 1);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 2; x < wd - 1; ++x)
      CHECK(b.at(0, y, x) == doctest::Approx(a.at(0, y, x - 1)).epsilon(1e-12));
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(24);
  const Tensor in = random_tensor({2, 4, 4}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor proj = random_tensor({3, 4, 4}, rng);  // fixed linear readout

  auto run = [&](const Tensor& in_, const Tensor& w_, const Tensor& b_) {
    const Tensor out = conv2d_forward(in_, w_, &b_, 1, 1);
    double s = 0.0;
    for (size_t i = 0; i < out.numel(); ++i) s += proj[i] * out[i];
    return s;
  };

  Tensor gin, gw(w.shape()), gb(b.shape());
  gin = Tensor(in.shape());
  conv2d_backward(proj, in, w, &gin, &gw, &gb, 1, 1);

  // d/d(input)
  {
    std::vector<double> x = flat(in);
    auto f = [&](const std::vector<double>& v) {
      Tensor t(in.shape());
      std::copy(v.begin(), v.end(), t.data());
      return run(t, w, b);
    };
    const auto res = grad_check(f, flat(gin), x);
    CHECK(res.max_rel_err < 1e-6);
  }
  // d/d(weights)
  {
    std::vector<double> x = flat(w);
    auto f = [&](const std::vector<double>& v) {
      Tensor t(w.shape());
      std::copy(v.begin(), v.end(), t.data());
      return run(in, t, b);
    };
    const auto res = grad_check(f, flat(gw), x);
    CHECK(res.max_rel_err < 1e-6);
  }
  // d/d(bias)
  {
    std::vector<double> x = flat(b);
    auto f = [&](const std::vector<double>& v) {
      Tensor t(b.shape());
      std::copy(v.begin(), v.end(), t.data());
      return run(in, w, t);
    };
    const auto res = grad_check(f, flat(gb), x);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("conv2d strided backward matches finite differences") {
  Rng rng(25);
  const Tensor in = random_tensor({2, 7, 7}, rng);
  const Tensor w = random_tensor({2, 2, 3, 3}, rng);
  const Tensor proj = random_tensor({2, 4, 4}, rng);
  Tensor gin(in.shape()), gw(w.shape());
  conv2d_backward(proj, in, w, &gin, &gw, nullptr, 2, 1);
  auto f = [&](const std::vector<double>& v) {
    Tensor t(in.shape());
    std::copy(v.begin(), v.end(), t.data());
    const Tensor out = conv2d_forward(t, w, nullptr, 2, 1);
    double s = 0.0;
    for (size_t i = 0; i < out.numel(); ++i) s += proj[i] * out[i];
    return s;
  };
  CHECK(grad_check(f, flat(gin), flat(in)).max_rel_err < 1e-6);
}

TEST_CASE("conv2d rejects inconsistent shapes") {
  Tensor in({2, 4, 4});
  Tensor w({1, 3, 3, 3});
  CHECK_THROWS_AS(conv2d_forward(in, w), ShapeMismatch);
}

TEST_CASE("linear: identity map") {
  Rng rng(26);
  const Tensor in = random_tensor({4, 3}, rng);
  Tensor w({3, 3});
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const Tensor out = linear_forward(in, w);
  CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("linear: scalar affine case") {
  Tensor in({1, 1});
  in[0] = 3.0;
  Tensor w({1, 1});
  w[0] = 2.0;
  Tensor b({1});
  b[0] = 1.0;
  const Tensor out = linear_forward(in, w, &b);
  CHECK(out[0] == doctest::Approx(7.0));
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(27);
  const Tensor in = random_tensor({5, 3}, rng);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({4}, rng);
  const Tensor proj = random_tensor({5, 4}, rng);
  Tensor gin, gw(w.shape()), gb(b.shape());
  linear_backward(proj, in, w, &gin, &gw, &gb);

  auto run = [&](const Tensor& in_, const Tensor& w_, const Tensor& b_) {
    const Tensor out = linear_forward(in_, w_, &b_);
    double s = 0.0;
    for (size_t i = 0; i < out.numel(); ++i) s += proj[i] * out[i];
    return s;
  };
  auto check_wrt = [&](const Tensor& base, const Tensor& analytic, int which) {
    auto f = [&, which](const std::vector<double>& v) {
      Tensor t(base.shape());
      std::copy(v.begin(), v.end(), t.data());
      if (which == 0) return run(t, w, b);
      if (which == 1) return run(in, t, b);
      return run(in, w, t);
    };
    CHECK(grad_check(f, flat(analytic), flat(base)).max_rel_err < 1e-7);
  };
  check_wrt(in, gin, 0);
  check_wrt(w, gw, 1);
  check_wrt(b, gb, 2);
}

TEST_CASE("grad_check is near-exact on a pure linear map") {
  Rng rng(28);
  const std::vector<double> coeff{1.5, -2.0, 0.25, 3.0};
  auto f = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (size_t i = 0; i < v.size(); ++i) s += coeff[i] * v[i];
    return s;
  };
  std::vector<double> x{0.3, -1.2, 2.0, 0.7};
  CHECK(grad_check(f, coeff, x).max_rel_err < 1e-8);
}

TEST_CASE("relu and sigmoid basics") {
  Tensor t({3});
  t[0] = -1.0;
  t[1] = 0.0;
  t[2] = 2.0;
  const Tensor r = relu(t);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  const double tiny = sigmoid(-400.0);
  CHECK(std::isfinite(tiny));
  CHECK(tiny > 0.0);
  CHECK(std::isfinite(sigmoid(400.0)));
  CHECK(sigmoid(400.0) <= 1.0);
}

TEST_CASE("relu mask drives the backward pass and kinks are excluded") {
  Rng rng(29);
  Tensor in({6});
  in[0] = -2.0;
  in[1] = -1e-7;  // on the kink, excluded from checking
  in[2] = 0.0;
  in[3] = 1e-7;  // on the kink
  in[4] = 0.5;
  in[5] = 3.0;
  const Tensor proj = random_tensor({6}, rng);

  Tensor act = in;
  std::vector<uint8_t> mask;
  relu_inplace(act, mask);
  Tensor grad = proj;
  relu_backward_inplace(grad, mask);

  auto f = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (size_t i = 0; i < v.size(); ++i) s += proj[i] * std::max(v[i], 0.0);
    return s;
  };
  auto exclude = [&](size_t i) { return std::fabs(in[i]) < 1e-5; };
  const auto res = grad_check(f, flat(grad), flat(in), 1e-6, exclude);
  CHECK(res.max_rel_err < 1e-8);
  CHECK(res.n_excluded == 3);
  CHECK(res.n_checked == 3);
}

TEST_CASE("smooth_l1 values and gradient") {
  CHECK(smooth_l1(1.0, 1.0) == 0.0);
  CHECK(smooth_l1(1.5, 1.0) == doctest::Approx(0.125));
  CHECK(smooth_l1(3.0, 1.0) == doctest::Approx(1.5));
  CHECK(smooth_l1_grad(3.0, 1.0) == 1.0);
  CHECK(smooth_l1_grad(-3.0, 1.0) == -1.0);
  CHECK(smooth_l1_grad(1.25, 1.0) == doctest::Approx(0.25));
  // quadratic/linear junction is continuous
  CHECK(smooth_l1(2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("weighted bce values from the definition") {
  // perfect prediction limit: large logit toward the label
  CHECK(weighted_bce_logit(40.0, 1.0, 100.0) == doctest::Approx(0.0));
  CHECK(weighted_bce_logit(-40.0, 0.0, 100.0) == doctest::Approx(0.0));
  // p_hat = 0.5 is logit 0
  CHECK(weighted_bce_logit(0.0, 1.0, 100.0) ==
        doctest::Approx(100.0 * std::log(2.0)));
  CHECK(weighted_bce_logit(0.0, 0.0, 100.0) ==
        doctest::Approx(std::log(2.0)));
  // extreme logits stay finite
  CHECK(std::isfinite(weighted_bce_logit(500.0, 0.0, 100.0)));
  CHECK(std::isfinite(weighted_bce_logit(-500.0, 1.0, 100.0)));
}

TEST_CASE("weighted bce gradient matches finite differences") {
  Rng rng(30);
  for (int i = 0; i < 20; ++i) {
    const double z = rng.uniform(-5, 5);
    const double label = rng.bernoulli(0.5) ? 1.0 : 0.0;
    double g = 0.0;
    weighted_bce_logit(z, label, 100.0, &g);
    auto f = [&](const std::vector<double>& v) {
      return weighted_bce_logit(v[0], label, 100.0);
    };
    CHECK(grad_check(f, {g}, {z}).max_rel_err < 1e-6);
  }
}

TEST_CASE("adam: zero gradient leaves values unchanged when wd is zero") {
  Parameter p("p", Tensor({3}));
  p.value[0] = 1.0;
  p.value[1] = -2.0;
  p.value[2] = 0.5;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step(p, cfg);
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
  CHECK(p.value[2] == 0.5);
}

TEST_CASE("adam: first step with unit gradient moves by about lr") {
  Parameter p("p", Tensor({2}));
  p.value.fill(1.0);
  p.grad.fill(1.0);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step(p, cfg);
  // bias-corrected first step: lr * g / (|g| + eps')
  CHECK(p.value[0] == doctest::Approx(1.0 - cfg.lr).epsilon(1e-3));
}

TEST_CASE("adam: identical parameters update identically") {
  Parameter a("a", Tensor({4})), b("b", Tensor({4}));
  Rng rng(31);
  for (int i = 0; i < 4; ++i) {
    a.value[i] = b.value[i] = rng.uniform(-1, 1);
    a.grad[i] = b.grad[i] = rng.uniform(-1, 1);
  }
  AdamConfig cfg;
  cfg.weight_decay = 0.002;
  for (int s = 0; s < 5; ++s) {
    adam_step(a, cfg);
    adam_step(b, cfg);
  }
  for (int i = 0; i < 4; ++i) CHECK(a.value[i] == b.value[i]);
}

TEST_CASE("adam: decoupled weight decay shrinks values without gradients") {
  Parameter p("p", Tensor({1}));
  p.value[0] = 1.0;
  AdamConfig cfg;
  cfg.weight_decay = 0.5;
  adam_step(p, cfg);
  CHECK(p.value[0] == doctest::Approx(1.0 - cfg.lr * 0.5));
}

TEST_CASE("ops are deterministic across repeated calls") {
  Rng rng(32);
  const Tensor in = random_tensor({3, 9, 9}, rng);
  const Tensor w = random_tensor({3, 3, 3, 3}, rng);
  const Tensor a = conv2d_forward(in, w, nullptr, 1, 1);
  const Tensor b = conv2d_forward(in, w, nullptr, 1, 1);
  for (size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}
