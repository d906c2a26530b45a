#pragma once

#include <functional>
#include <map>
#include <span>

#include "iex/adam.hpp"
#include "iex/dataset.hpp"
#include "iex/env.hpp"
#include "iex/nets.hpp"
#include "iex/ops.hpp"

namespace iex {

struct PredictionConfig {
  int frames = 4;  // r
  int height = 30;
  int width = 30;
  int actions = 4;      // l
  int feature_dim = 256;  // h
  int joint_dim = 256;    // k
};

// Action-conditional next-frame model: three stride-controlled conv layers
// into a dense state feature, multiplicative state/action fusion, and a
// mirrored deconv decoder ending in a sigmoid. Forward is const and
// allocation-local, so a frozen net can be shared across threads.
class PredictionNet {
 public:
  PredictionNet(PredictionConfig cfg, Rng& rng);

  const PredictionConfig& config() const { return cfg_; }
  std::int64_t param_count() const;

  struct Cache {
    Tensor x, a;
    Tensor c1, r1, c2, r2, c3, r3;
    Tensor flat, hs;
    FusionCache fusion;
    Tensor joint;
    Tensor d0, dr0, d3in;
    Tensor e3, er3, e2, er2, e1, out;
  };

  // x: (B, r, m, n) floats in [0,1]; a: (B, l) one-hot. Returns (B, 1, m, n).
  Tensor forward(const Tensor& x, const Tensor& a) const;
  Tensor forward(const Tensor& x, const Tensor& a, Cache& c) const;
  void backward(Cache& c, const Tensor& gout);

  void zero_grad();
  std::vector<LayerParams*> params();
  std::vector<std::pair<std::string, Tensor*>> named_params();
  std::vector<NamedTensor> checkpoint_blocks() const;
  void load(const std::map<std::string, Tensor>& blocks);

 private:
  PredictionConfig cfg_;
  int k1_, k2_, k3_;
  int s1_, s2_, s3_;  // spatial size after each encoder conv
  int flat_;
  LayerParams conv1_, conv2_, conv3_, enc_fc_, ws_, wa_, dec_fc_, dec3_, dec2_, dec1_;
};

// --- module operations ------------------------------------------------------

// Single-state prediction; returns an (m, n) float frame in (0,1).
Tensor predict_frame(const PredictionNet& net, const FrameStack& state, int action);

// round(p * 255) to u8; predicted and seen frames share one value domain.
Frame quantize_frame(const Tensor& float_frame);

// Drop the oldest frame, append the new one.
FrameStack compose_state(const FrameStack& state, Frame new_frame);

// Predicts (m,n) float frames; lets tests substitute a stub model.
using FramePredictor = std::function<Tensor(const FrameStack&, int)>;

// H-step rollout repeating one action, feeding quantized predictions back.
std::vector<Frame> rollout(const FramePredictor& predict, const FrameStack& state, int action,
                           int horizon);
std::vector<Frame> rollout(const PredictionNet& net, const FrameStack& state, int action,
                           int horizon);

// Rollout following a recorded action sequence (evaluation protocol).
std::vector<Frame> rollout_recorded(const PredictionNet& net, const FrameStack& state,
                                    std::span<const int> actions);

// --- training / evaluation --------------------------------------------------

struct TrainPredConfig {
  int epochs = 10;
  int batch = 100;
  float lr = 1e-3f;
  float grad_scale = 1e-2f;  // gradient discount from the optimizer recipe
  double val_fraction = 0.05;
  std::uint64_t seed = 0;
};

struct LossCurvePoint {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

using EpochCallback = std::function<void(const LossCurvePoint&)>;

// Minimizes 1-step MSE against the recorded next frame. Deterministic given
// the seed. Throws NumericError on a non-finite loss; on_epoch fires after
// each completed epoch so callers can keep a last-good checkpoint.
std::vector<LossCurvePoint> train_prediction(PredictionNet& net, const Dataset& ds,
                                             const TrainPredConfig& cfg,
                                             const EpochCallback& on_epoch = nullptr);

struct MultiStepRow {
  int horizon = 0;
  double mse = 0.0;
  std::int64_t starts_used = 0;
  std::int64_t starts_skipped = 0;
};

// Mean MSE of the K-th rollout frame vs ground truth over the given record
// indices (typically a held-out split), following recorded actions. Horizons
// must be sorted ascending. Starts too close to an episode end are skipped
// per-horizon and counted.
std::vector<MultiStepRow> eval_multistep_mse(const PredictionNet& net, const Dataset& ds,
                                             std::span<const std::size_t> record_indices,
                                             std::span<const int> horizons);

}  // namespace iex
