#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "amdnet/datagen.hpp"
#include "amdnet/geometry.hpp"
#include "amdnet/motion_grid.hpp"
#include "amdnet/nn.hpp"
#include "amdnet/rng.hpp"
#include "amdnet/voxel_encoder.hpp"
#include "amdnet/warp.hpp"

namespace amdnet {

enum class Variant { rnn_odo, rnn_no_odo, stack_conv, stack_conv_pct };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::rnn_odo;
  int p = 5;               // frames per sequence window
  double alpha = 5.0;      // segmentation loss weight
  double beta = 100.0;     // dynamic class weight
  double theta = 0.8;      // m/s, dynamic labeling threshold
  double tau = 0.5;        // inference mask threshold
  GridSpec grid;
  int base_channels = 32;  // conv width; VFE widths are c/2 and c
  uint64_t seed = 1;
  // Eq-style segmentation normalizer: average over every cell (default) or
  // only over point-occupied cells.
  bool seg_all_cells = true;

  void validate() const;
};

struct Prediction {
  Tensor vel;    // [2, ny, nx] m/s
  Tensor logit;  // [1, ny, nx]
  Tensor prob;   // sigmoid(logit)
};

// One training/inference window: p consecutive frames.
struct Sample {
  std::vector<PointCloud> clouds;
  std::vector<Transform3> poses;
};

Sample make_sample(const SceneSequence& scene, int start, int p);

struct ForwardCache {
  // encoder activations per frame
  std::vector<EncodeCache> enc;
  std::vector<WarpPlan> plans;
  // recurrent path
  std::vector<Tensor> concat_in;  // [2c, ny, nx] rnn conv1 inputs
  std::vector<Tensor> xhat;       // [c, ny, nx] rnn conv2 inputs
  std::vector<std::vector<uint8_t>> mask_xhat, mask_h;
  // stacked path
  Tensor stack;  // [p*c, ny, nx] aggregation conv input
  std::vector<uint8_t> mask_agg;
  // backbone
  Tensor backbone_in, y1, y2, y3, y4;
  std::vector<uint8_t> m1, m2, m3, m4;
  int warp_calls = 0;

  void release() { *this = ForwardCache(); }
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  Parameter& param(const std::string& name);
  const Parameter& param(const std::string& name) const;
  void zero_grads();

  Prediction forward(const Sample& sample, ForwardCache* cache = nullptr) const;
  // Accumulates parameter gradients for d(loss)/d(vel), d(loss)/d(logit).
  void backward(const Sample& sample, ForwardCache& cache, const Tensor& dvel,
                const Tensor& dlogit);

 private:
  ModelConfig cfg_;
  std::vector<Parameter> params_;

  EncoderWeights encoder_weights() const;
  EncoderGrads encoder_grads();
};

// Mean over known cells of component-summed smooth L1; zero (with zero
// gradient) when nothing is known. grad, if given, must match vel's shape
// and receives d(loss)/d(vel) overwritten.
double velocity_loss(const Tensor& vel, const MotionGrid& gt,
                     Tensor* grad = nullptr);

// Mean weighted binary cross-entropy on logits over the configured cell set.
double seg_loss(const Tensor& logit, const MotionGrid& gt, double beta,
                bool all_cells, Tensor* grad = nullptr);

double total_loss(double l_vel, double l_seg, double alpha);

// Velocity zeroed wherever dyn_prob < tau.
Prediction mask_velocity(const Prediction& pred, double tau);

struct TrainOptions {
  int steps = 40000;
  int batch_size = 4;
  double lr = 3e-4;
  double weight_decay = 0.002;
  int lr_drop_every = 7000;
  double lr_drop_factor = 0.1;
  bool augment = true;
  int log_every = 100;
  std::ostream* debug_log = nullptr;  // per-step diagnostics incl warp calls
};

struct CurvePoint {
  int step = 0;
  double l_vel = 0.0, l_seg = 0.0, l_total = 0.0, lr = 0.0;
};

// Seeded, deterministic. Throws EmptyDataset / NanLoss.
std::vector<CurvePoint> train(Model& model,
                              const std::vector<SceneSequence>& scenes,
                              const TrainOptions& opt, Rng& rng);

}  // namespace amdnet
