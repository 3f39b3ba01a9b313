#include "amdnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>

#include "amdnet/errors.hpp"

namespace amdnet {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::rnn_odo: return "rnn_odo";
    case Variant::rnn_no_odo: return "rnn_no_odo";
    case Variant::stack_conv: return "stack_conv";
    case Variant::stack_conv_pct: return "stack_conv_pct";
  }
  throw ConfigError("unknown variant enum");
}

Variant variant_from_name(const std::string& name) {
  if (name == "rnn_odo") return Variant::rnn_odo;
  if (name == "rnn_no_odo") return Variant::rnn_no_odo;
  if (name == "stack_conv") return Variant::stack_conv;
  if (name == "stack_conv_pct") return Variant::stack_conv_pct;
  throw ConfigError("variant must be one of rnn_odo, rnn_no_odo, stack_conv, "
                    "stack_conv_pct, got '" + name + "'");
}

void ModelConfig::validate() const {
  grid.validate();
  if (p < 2) throw ConfigError("p must be at least 2");
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  if (beta < 1.0) throw ConfigError("beta must be at least 1");
  if (theta <= 0.0) throw ConfigError("theta must be positive");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0, 1]");
  if (base_channels < 2 || base_channels % 2 != 0)
    throw ConfigError("base_channels must be even and at least 2");
}

Sample make_sample(const SceneSequence& scene, int start, int p) {
  if (start < 0 || start + p > static_cast<int>(scene.frames.size()))
    throw TooFewFrames("window [" + std::to_string(start) + ", " +
                       std::to_string(start + p) + ") out of range");
  Sample s;
  s.clouds.reserve(p);
  s.poses.reserve(p);
  for (int i = start; i < start + p; ++i) {
    s.clouds.push_back(scene.frames[i].cloud);
    s.poses.push_back(scene.frames[i].pose);
  }
  return s;
}

namespace {

void xavier_fill(Tensor& t, int fan_in, int fan_out, Rng& rng) {
  const double b = std::sqrt(6.0 / (fan_in + fan_out));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-b, b);
}

// dst [C, ny, nx] receives src [c, ny, nx] at channel offset c0.
void paste_channels(Tensor& dst, int c0, const Tensor& src) {
  std::memcpy(dst.plane(c0), src.data(), sizeof(double) * src.numel());
}

Tensor slice_channels(const Tensor& src, int c0, int c) {
  Tensor out({c, src.dim(1), src.dim(2)});
  std::memcpy(out.data(), src.plane(c0), sizeof(double) * out.numel());
  return out;
}

void add_into(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) throw ShapeMismatch("add_into");
  double* d = dst.data();
  const double* s = src.data();
  for (size_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

}  // namespace

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.base_channels;
  Rng rng(cfg_.seed);

  auto add_linear = [&](const std::string& base, int dout, int din) {
    Tensor w({dout, din});
    xavier_fill(w, din, dout, rng);
    params_.emplace_back(base + ".w", std::move(w));
    params_.emplace_back(base + ".b", Tensor({dout}));  // zeros
  };
  auto add_conv = [&](const std::string& base, int co, int ci, int k) {
    Tensor w({co, ci, k, k});
    xavier_fill(w, ci * k * k, co * k * k, rng);
    params_.emplace_back(base + ".w", std::move(w));
  };

  add_linear("enc.vfe1", c / 2, 6);
  add_linear("enc.vfe2", c, c);
  add_linear("enc.squash", c, cfg_.grid.nz * c);
  add_conv("enc.conv1", c, c, 3);
  add_conv("enc.conv2", c, c, 3);
  if (cfg_.variant == Variant::rnn_odo || cfg_.variant == Variant::rnn_no_odo) {
    add_conv("rnn.conv1", c, 2 * c, 3);
    add_conv("rnn.conv2", c, c, 3);
  } else {
    add_conv("agg.conv", c, cfg_.p * c, 3);
  }
  add_conv("backbone.conv1", c, c, 3);
  add_conv("backbone.conv2", c, c, 3);
  add_conv("backbone.conv3", c, c, 3);
  add_conv("backbone.conv4", c, c, 3);
  add_conv("head.vel", 2, c, 3);
  add_conv("head.seg", 1, c, 3);
}

Parameter& Model::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named '" + name + "'");
}

const Parameter& Model::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named '" + name + "'");
}

void Model::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

EncoderWeights Model::encoder_weights() const {
  EncoderWeights w;
  w.vfe_w[0] = &param("enc.vfe1.w").value;
  w.vfe_b[0] = &param("enc.vfe1.b").value;
  w.vfe_w[1] = &param("enc.vfe2.w").value;
  w.vfe_b[1] = &param("enc.vfe2.b").value;
  w.squash_w = &param("enc.squash.w").value;
  w.squash_b = &param("enc.squash.b").value;
  w.conv_w[0] = &param("enc.conv1.w").value;
  w.conv_w[1] = &param("enc.conv2.w").value;
  return w;
}

EncoderGrads Model::encoder_grads() {
  EncoderGrads g;
  g.vfe_w[0] = &param("enc.vfe1.w").grad;
  g.vfe_b[0] = &param("enc.vfe1.b").grad;
  g.vfe_w[1] = &param("enc.vfe2.w").grad;
  g.vfe_b[1] = &param("enc.vfe2.b").grad;
  g.squash_w = &param("enc.squash.w").grad;
  g.squash_b = &param("enc.squash.b").grad;
  g.conv_w[0] = &param("enc.conv1.w").grad;
  g.conv_w[1] = &param("enc.conv2.w").grad;
  return g;
}

Prediction Model::forward(const Sample& sample, ForwardCache* cache) const {
  const int p = cfg_.p;
  if (static_cast<int>(sample.clouds.size()) != p ||
      static_cast<int>(sample.poses.size()) != p)
    throw ShapeMismatch("sample must hold exactly p frames");

  ForwardCache local;
  ForwardCache& cc = cache ? *cache : local;
  cc.release();

  const int c = cfg_.base_channels;
  const int ny = cfg_.grid.ny, nx = cfg_.grid.nx;
  const EncoderWeights ew = encoder_weights();
  cc.enc.resize(p);

  Tensor feat;
  if (cfg_.variant == Variant::rnn_odo || cfg_.variant == Variant::rnn_no_odo) {
    cc.concat_in.resize(p);
    cc.xhat.resize(p);
    cc.mask_xhat.resize(p);
    cc.mask_h.resize(p);
    const Tensor& w1 = param("rnn.conv1.w").value;
    const Tensor& w2 = param("rnn.conv2.w").value;
    Tensor h({c, ny, nx});
    for (int i = 0; i < p; ++i) {
      Tensor x = encode_cloud(sample.clouds[i], cfg_.grid, ew, &cc.enc[i]);
      Tensor hhat;
      if (i > 0 && cfg_.variant == Variant::rnn_odo) {
        const Transform2 t_rel = project_to_plane(
            relative_transform(sample.poses[i - 1], sample.poses[i]));
        cc.plans.push_back(build_warp_plan(cfg_.grid, t_rel));
        hhat = warp_forward(cc.plans.back(), h);
        ++cc.warp_calls;
      } else {
        hhat = h;
      }
      Tensor cat({2 * c, ny, nx});
      paste_channels(cat, 0, x);
      paste_channels(cat, c, hhat);
      Tensor xh = conv2d_forward(cat, w1, nullptr, 1, 1);
      relu_inplace(xh, cc.mask_xhat[i]);
      h = conv2d_forward(xh, w2, nullptr, 1, 1);
      relu_inplace(h, cc.mask_h[i]);
      cc.concat_in[i] = std::move(cat);
      cc.xhat[i] = std::move(xh);
    }
    feat = std::move(h);
  } else {
    Tensor stack({p * c, ny, nx});
    for (int i = 0; i < p; ++i) {
      Tensor x;
      if (cfg_.variant == Variant::stack_conv_pct && i < p - 1) {
        // compensate in point space before encoding
        PointCloud moved;
        moved.points = transform_cloud(
            sample.clouds[i].points,
            relative_transform(sample.poses[i], sample.poses[p - 1]));
        moved.intensity = sample.clouds[i].intensity;
        x = encode_cloud(moved, cfg_.grid, ew, &cc.enc[i]);
      } else {
        x = encode_cloud(sample.clouds[i], cfg_.grid, ew, &cc.enc[i]);
        if (cfg_.variant == Variant::stack_conv && i < p - 1) {
          const Transform2 t_rel = project_to_plane(
              relative_transform(sample.poses[i], sample.poses[p - 1]));
          cc.plans.push_back(build_warp_plan(cfg_.grid, t_rel));
          x = warp_forward(cc.plans.back(), x);
          ++cc.warp_calls;
        }
      }
      paste_channels(stack, i * c, x);
    }
    feat = conv2d_forward(stack, param("agg.conv.w").value, nullptr, 1, 1);
    relu_inplace(feat, cc.mask_agg);
    cc.stack = std::move(stack);
  }

  cc.backbone_in = std::move(feat);
  Tensor y1 = conv2d_forward(cc.backbone_in, param("backbone.conv1.w").value,
                             nullptr, 1, 1);
  relu_inplace(y1, cc.m1);
  Tensor y2 = conv2d_forward(y1, param("backbone.conv2.w").value, nullptr, 1, 1);
  relu_inplace(y2, cc.m2);
  Tensor y3 = conv2d_forward(y2, param("backbone.conv3.w").value, nullptr, 1, 1);
  relu_inplace(y3, cc.m3);
  Tensor y4 = conv2d_forward(y3, param("backbone.conv4.w").value, nullptr, 1, 1);
  add_into(y4, y1);  // residual skip
  relu_inplace(y4, cc.m4);

  Prediction out;
  out.vel = conv2d_forward(y4, param("head.vel.w").value, nullptr, 1, 1);
  out.logit = conv2d_forward(y4, param("head.seg.w").value, nullptr, 1, 1);
  out.prob = sigmoid(out.logit);

  cc.y1 = std::move(y1);
  cc.y2 = std::move(y2);
  cc.y3 = std::move(y3);
  cc.y4 = std::move(y4);
  return out;
}

void Model::backward(const Sample& sample, ForwardCache& cc,
                     const Tensor& dvel, const Tensor& dlogit) {
  const int p = cfg_.p;
  if (cc.y4.empty() || static_cast<int>(cc.enc.size()) != p)
    throw MissingCache("forward cache missing or stale");
  const int c = cfg_.base_channels;
  require_shape(dvel, {2, cfg_.grid.ny, cfg_.grid.nx}, "dvel");
  require_shape(dlogit, {1, cfg_.grid.ny, cfg_.grid.nx}, "dlogit");

  const EncoderWeights ew = encoder_weights();
  const EncoderGrads eg = encoder_grads();

  Tensor gy4, tmp;
  conv2d_backward(dvel, cc.y4, param("head.vel.w").value, &gy4,
                  &param("head.vel.w").grad, nullptr, 1, 1);
  conv2d_backward(dlogit, cc.y4, param("head.seg.w").value, &tmp,
                  &param("head.seg.w").grad, nullptr, 1, 1);
  add_into(gy4, tmp);
  relu_backward_inplace(gy4, cc.m4);

  Tensor gy3;
  conv2d_backward(gy4, cc.y3, param("backbone.conv4.w").value, &gy3,
                  &param("backbone.conv4.w").grad, nullptr, 1, 1);
  relu_backward_inplace(gy3, cc.m3);
  Tensor gy2;
  conv2d_backward(gy3, cc.y2, param("backbone.conv3.w").value, &gy2,
                  &param("backbone.conv3.w").grad, nullptr, 1, 1);
  relu_backward_inplace(gy2, cc.m2);
  Tensor gy1;
  conv2d_backward(gy2, cc.y1, param("backbone.conv2.w").value, &gy1,
                  &param("backbone.conv2.w").grad, nullptr, 1, 1);
  add_into(gy1, gy4);  // skip branch joins before conv1's relu
  relu_backward_inplace(gy1, cc.m1);
  Tensor gfeat;
  conv2d_backward(gy1, cc.backbone_in, param("backbone.conv1.w").value, &gfeat,
                  &param("backbone.conv1.w").grad, nullptr, 1, 1);

  if (cfg_.variant == Variant::rnn_odo || cfg_.variant == Variant::rnn_no_odo) {
    const Tensor& w1 = param("rnn.conv1.w").value;
    const Tensor& w2 = param("rnn.conv2.w").value;
    Tensor& gw1 = param("rnn.conv1.w").grad;
    Tensor& gw2 = param("rnn.conv2.w").grad;
    Tensor gh = std::move(gfeat);
    int plan_idx = static_cast<int>(cc.plans.size());
    for (int i = p - 1; i >= 0; --i) {
      relu_backward_inplace(gh, cc.mask_h[i]);
      Tensor gxhat;
      conv2d_backward(gh, cc.xhat[i], w2, &gxhat, &gw2, nullptr, 1, 1);
      relu_backward_inplace(gxhat, cc.mask_xhat[i]);
      Tensor gcat;
      conv2d_backward(gxhat, cc.concat_in[i], w1, &gcat, &gw1, nullptr, 1, 1);
      Tensor gx = slice_channels(gcat, 0, c);
      encode_cloud_backward(gx, cfg_.grid, cc.enc[i], ew, eg);
      if (i > 0) {
        Tensor ghhat = slice_channels(gcat, c, c);
        if (cfg_.variant == Variant::rnn_odo) {
          --plan_idx;
          gh = warp_backward(cc.plans[plan_idx], ghhat);
        } else {
          gh = std::move(ghhat);
        }
      }
    }
  } else {
    Tensor gy0 = std::move(gfeat);
    relu_backward_inplace(gy0, cc.mask_agg);
    Tensor gstack;
    conv2d_backward(gy0, cc.stack, param("agg.conv.w").value, &gstack,
                    &param("agg.conv.w").grad, nullptr, 1, 1);
    for (int i = 0; i < p; ++i) {
      Tensor gx = slice_channels(gstack, i * c, c);
      if (cfg_.variant == Variant::stack_conv && i < p - 1)
        gx = warp_backward(cc.plans[i], gx);
      encode_cloud_backward(gx, cfg_.grid, cc.enc[i], ew, eg);
    }
  }
}

double velocity_loss(const Tensor& vel, const MotionGrid& gt, Tensor* grad) {
  if (vel.ndim() != 3 || vel.dim(0) != 2) throw ShapeMismatch("vel [2,ny,nx]");
  if (!vel.same_shape(gt.velocity)) throw ShapeMismatch("vel vs gt.velocity");
  if (!gt.has_known()) throw ShapeMismatch("ground truth lacks known mask");
  if (grad) *grad = Tensor(vel.shape());

  const int ny = vel.dim(1), nx = vel.dim(2);
  size_t n_known = 0;
  for (int i = 0; i < ny * nx; ++i)
    if (gt.known[static_cast<size_t>(i)] != 0.0) ++n_known;
  if (n_known == 0) return 0.0;

  const double inv = 1.0 / static_cast<double>(n_known);
  double loss = 0.0;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      if (gt.known.at(0, y, x) == 0.0) continue;
      for (int ch = 0; ch < 2; ++ch) {
        const double pred = vel.at(ch, y, x);
        const double tgt = gt.velocity.at(ch, y, x);
        loss += smooth_l1(pred, tgt);
        if (grad) grad->at(ch, y, x) = smooth_l1_grad(pred, tgt) * inv;
      }
    }
  }
  return loss * inv;
}

double seg_loss(const Tensor& logit, const MotionGrid& gt, double beta,
                bool all_cells, Tensor* grad) {
  if (logit.ndim() != 3 || logit.dim(0) != 1)
    throw ShapeMismatch("logit [1,ny,nx]");
  if (!logit.same_shape(gt.dyn)) throw ShapeMismatch("logit vs gt.dyn");
  if (!gt.has_known()) throw ShapeMismatch("ground truth lacks known mask");
  if (grad) *grad = Tensor(logit.shape());

  const size_t n_cells = logit.numel();
  size_t n = 0;
  if (all_cells) {
    n = n_cells;
  } else {
    for (size_t i = 0; i < n_cells; ++i)
      if (gt.known[i] != 0.0) ++n;
  }
  if (n == 0) return 0.0;

  const double inv = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (size_t i = 0; i < n_cells; ++i) {
    if (!all_cells && gt.known[i] == 0.0) continue;
    double g = 0.0;
    loss += weighted_bce_logit(logit[i], gt.dyn[i], beta, grad ? &g : nullptr);
    if (grad) (*grad)[i] = g * inv;
  }
  return loss * inv;
}

double total_loss(double l_vel, double l_seg, double alpha) {
  return l_vel + alpha * l_seg;
}

Prediction mask_velocity(const Prediction& pred, double tau) {
  if (pred.vel.ndim() != 3 || pred.vel.dim(0) != 2)
    throw ShapeMismatch("vel [2,ny,nx]");
  require_shape(pred.prob, {1, pred.vel.dim(1), pred.vel.dim(2)}, "prob");
  Prediction out = pred;
  const int ny = pred.vel.dim(1), nx = pred.vel.dim(2);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x)
      if (pred.prob.at(0, y, x) < tau) {
        out.vel.at(0, y, x) = 0.0;
        out.vel.at(1, y, x) = 0.0;
      }
  return out;
}

std::vector<CurvePoint> train(Model& model,
                              const std::vector<SceneSequence>& scenes,
                              const TrainOptions& opt, Rng& rng) {
  const ModelConfig& cfg = model.config();
  const int p = cfg.p;
  std::vector<size_t> usable;
  for (size_t i = 0; i < scenes.size(); ++i)
    if (static_cast<int>(scenes[i].frames.size()) >= p) usable.push_back(i);
  if (usable.empty())
    throw EmptyDataset("no scene provides a window of " + std::to_string(p) +
                       " frames");
  if (opt.steps < 0 || opt.batch_size < 1)
    throw ConfigError("bad train options");

  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<size_t>(opt.steps));
  ForwardCache cache;

  for (int step = 0; step < opt.steps; ++step) {
    const int drops = opt.lr_drop_every > 0 ? step / opt.lr_drop_every : 0;
    const double lr = opt.lr * std::pow(opt.lr_drop_factor, drops);
    model.zero_grads();
    double sum_lv = 0.0, sum_ls = 0.0;
    int warp_calls = 0;

    for (int b = 0; b < opt.batch_size; ++b) {
      const SceneSequence& sc = scenes[usable[rng.uniform_int(usable.size())]];
      const int start = static_cast<int>(
          rng.uniform_int(sc.frames.size() - static_cast<size_t>(p) + 1));
      SceneSequence win = scene_window(sc, start, p);
      if (opt.augment) win = augment_scene(win, draw_augmentation(rng));

      const Sample sample = make_sample(win, 0, p);
      const MotionGrid gt = make_ground_truth(win, p - 1, cfg.theta);
      const Prediction pred = model.forward(sample, &cache);

      Tensor dvel, dlogit;
      const double lv = velocity_loss(pred.vel, gt, &dvel);
      const double ls =
          seg_loss(pred.logit, gt, cfg.beta, cfg.seg_all_cells, &dlogit);
      if (!std::isfinite(total_loss(lv, ls, cfg.alpha)))
        throw NanLoss("step " + std::to_string(step));

      const double scale = 1.0 / opt.batch_size;
      for (size_t i = 0; i < dvel.numel(); ++i) dvel[i] *= scale;
      for (size_t i = 0; i < dlogit.numel(); ++i) dlogit[i] *= cfg.alpha * scale;
      model.backward(sample, cache, dvel, dlogit);
      warp_calls += cache.warp_calls;
      cache.release();
      sum_lv += lv;
      sum_ls += ls;
    }

    AdamConfig ac;
    ac.lr = lr;
    ac.weight_decay = opt.weight_decay;
    for (auto& prm : model.params()) adam_step(prm, ac);

    CurvePoint cp;
    cp.step = step;
    cp.l_vel = sum_lv / opt.batch_size;
    cp.l_seg = sum_ls / opt.batch_size;
    cp.l_total = total_loss(cp.l_vel, cp.l_seg, cfg.alpha);
    cp.lr = lr;
    curve.push_back(cp);

    if (opt.debug_log &&
        (opt.log_every > 0 && (step % opt.log_every == 0 || step + 1 == opt.steps)))
      *opt.debug_log << "step " << step << " lv " << cp.l_vel << " ls "
                     << cp.l_seg << " total " << cp.l_total << " lr " << lr
                     << " warps " << warp_calls << "\n";
  }
  return curve;
}

}  // namespace amdnet
