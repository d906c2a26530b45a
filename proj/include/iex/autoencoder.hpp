#pragma once

#include <functional>
#include <map>

#include "iex/adam.hpp"
#include "iex/dataset.hpp"
#include "iex/env.hpp"
#include "iex/nets.hpp"
#include "iex/ops.hpp"

namespace iex {

struct AutoencoderConfig {
  int height = 30;
  int width = 30;
};

// Frame autoencoder: two conv+ReLU+2x2-maxpool blocks, features taken as the
// flattened second pool output, and a mirrored two-deconv decoder ending in a
// sigmoid. The feature dimension d follows from the architecture.
class Autoencoder {
 public:
  Autoencoder(AutoencoderConfig cfg, Rng& rng);

  const AutoencoderConfig& config() const { return cfg_; }
  int feature_dim() const { return flat_; }
  std::int64_t param_count() const;

  struct Cache {
    Tensor x;
    Tensor c1, r1, p1, c2, r2, p2;
    std::vector<Eigen::Index> am1, am2;
    Tensor z;  // (B, d)
    Tensor dain, ea, era, eb, out;
  };

  // x: (B,1,m,n) or (1,m,n). features -> (B,d) or (d); forward -> same shape
  // as x, values in (0,1).
  Tensor features(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Cache& c) const;
  // g_feat, when given, is an extra gradient injected at the feature output
  // (the matching-loss path); shape (B, d).
  void backward(Cache& c, const Tensor& gout, const Tensor* g_feat = nullptr);

  void zero_grad();
  std::vector<LayerParams*> params();
  std::vector<std::pair<std::string, Tensor*>> named_params();
  std::vector<NamedTensor> checkpoint_blocks() const;
  void load(const std::map<std::string, Tensor>& blocks);

 private:
  Tensor encode(const Tensor& x, Cache& c) const;

  AutoencoderConfig cfg_;
  int k1_, k2_;        // encoder conv kernels
  int c1s_, q1_;       // conv1 out, pool1 out
  int c2s_, q2_;       // conv2 out, pool2 out
  int ka_, kb_;        // decoder deconv kernels
  int flat_;
  LayerParams conv1_, conv2_, deca_, decb_;
};

// --- phase 1: reconstruction on seen frames ----------------------------------

// Frames stored as raw u8 planes; built from a dataset's next-frames.
struct FrameSet {
  int m = 0;
  int n = 0;
  std::vector<std::vector<std::uint8_t>> frames;
};
FrameSet frames_from_dataset(const Dataset& ds);
Tensor frame_set_batch(const FrameSet& fs, std::span<const std::size_t> idx);  // (B,1,m,n)

struct TrainPhase1Config {
  float lr = 1e-3f;
  float grad_scale = 1e-2f;
  int batch = 100;
  int max_epochs = 40;
  // Converged when validation loss improves by less than converge_tol
  // (relative) for converge_patience consecutive epochs.
  double converge_tol = 0.01;
  int converge_patience = 3;
  double val_fraction = 0.05;
  std::uint64_t seed = 0;
};

struct Phase1EpochPoint {
  int epoch = 0;
  double train_bce = 0.0;
  double val_bce = 0.0;
};

using Phase1Callback = std::function<void(const Phase1EpochPoint&)>;

std::vector<Phase1EpochPoint> train_phase1(Autoencoder& ae, const FrameSet& frames,
                                           const TrainPhase1Config& cfg,
                                           const Phase1Callback& on_epoch = nullptr);

// --- phase 2: joint reconstruction + code matching ---------------------------

// (seen, predicted) frame pairs; predicted frames are quantized u8 so hashing
// sees one value domain.
struct PairSet {
  int m = 0;
  int n = 0;
  std::vector<std::vector<std::uint8_t>> seen;
  std::vector<std::vector<std::uint8_t>> pred;
  std::size_t size() const { return seen.size(); }
};

class PredictionNet;
// Pairs (record.next_frame, net 1-step prediction) for the given records.
PairSet build_pair_set(const Dataset& ds, const PredictionNet& net,
                       std::span<const std::size_t> record_indices);
// Seeded split of a pair set into (train, eval).
std::pair<PairSet, PairSet> split_pair_set(const PairSet& pairs, double eval_fraction,
                                           std::uint64_t seed);

struct Projection;

struct TrainPhase2Config {
  float lr = 1e-4f;
  float grad_scale = 5e-3f;
  float lambda = 0.01f;
  int batch = 100;
  int epochs = 6;
  std::uint64_t seed = 0;
};

struct Phase2EpochPoint {
  int epoch = 0;
  double loss = 0.0;            // full objective on the training pairs
  double mean_code_loss = 0.0;  // on eval pairs, under the run's projection
  double rec_mse_seen = 0.0;
  double rec_mse_pred = 0.0;
};

using Phase2Callback = std::function<void(const Phase2EpochPoint&)>;

// Minimizes rec(seen) + rec(pred) + lambda * ||phi(seen) - phi(pred)||_2 with
// the matching gradient flowing through both encoder branches.
std::vector<Phase2EpochPoint> train_phase2(Autoencoder& ae, const PairSet& train_pairs,
                                           const PairSet& eval_pairs, const Projection& proj,
                                           const TrainPhase2Config& cfg,
                                           const Phase2Callback& on_epoch = nullptr);

// Code-loss + reconstruction statistics over a pair set.
struct CodeStats {
  double mean_code_loss = 0.0;
  double median_code_loss = 0.0;
  double frac_zero = 0.0;
  double rec_mse_seen = 0.0;
  double rec_mse_pred = 0.0;
  std::int64_t pairs = 0;
};
CodeStats eval_code_stats(const Autoencoder& ae, const Projection& proj, const PairSet& pairs);

}  // namespace iex
