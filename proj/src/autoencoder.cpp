#include "iex/autoencoder.hpp"

#include <algorithm>
#include <cmath>

#include "iex/hashing.hpp"
#include "iex/loss.hpp"
#include "iex/prediction.hpp"

namespace iex {

Autoencoder::Autoencoder(AutoencoderConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.height != cfg_.width)
    throw ConfigError("autoencoder expects square frames, got " + std::to_string(cfg_.height) +
                      "x" + std::to_string(cfg_.width));
  if (cfg_.height % 2 != 0) throw ConfigError("autoencoder expects even frame size");
  const int m = cfg_.height;
  k1_ = pool_conv_kernel(m);
  c1s_ = conv_out(m, k1_, 1);
  q1_ = c1s_ / 2;
  k2_ = pool_conv_kernel(q1_);
  c2s_ = conv_out(q1_, k2_, 1);
  q2_ = c2s_ / 2;
  if (q2_ < 1) throw ConfigError("frame size too small for the two-block encoder");
  ka_ = deconv_kernel(q2_, 2, q1_);
  kb_ = deconv_kernel(q1_, 2, m);
  if (ka_ < 2 || kb_ < 2) throw ConfigError("decoder kernel derivation failed");
  flat_ = 16 * q2_ * q2_;

  conv1_ = LayerParams({8, 1, k1_, k1_}, {8});
  conv2_ = LayerParams({16, 8, k2_, k2_}, {16});
  deca_ = LayerParams({16, 8, ka_, ka_}, {8});
  decb_ = LayerParams({8, 1, kb_, kb_}, {1});
  init_layer(conv1_, k1_ * k1_, rng);
  init_layer(conv2_, 8 * k2_ * k2_, rng);
  init_layer(deca_, 16 * ka_ * ka_, rng);
  init_layer(decb_, 8 * kb_ * kb_, rng);
}

std::int64_t Autoencoder::param_count() const {
  std::int64_t n = 0;
  for (const LayerParams* p : const_cast<Autoencoder*>(this)->params())
    n += p->w.size() + p->b.size();
  return n;
}

Tensor Autoencoder::encode(const Tensor& x, Cache& c) const {
  const bool batched = x.rank() == 4;
  const int b = batched ? x.dim(0) : 1;
  const int ch = x.dim(batched ? 1 : 0);
  const int h = x.dim(batched ? 2 : 1);
  const int w = x.dim(batched ? 3 : 2);
  if (ch != 1 || h != cfg_.height || w != cfg_.width)
    throw InputError("autoencoder: frame " + shape_str(x.shape()) + ", expected (B,1," +
                     std::to_string(cfg_.height) + "," + std::to_string(cfg_.width) + ")");
  c.x = batched ? x : x.reshaped({1, 1, h, w});
  c.c1 = conv2d(c.x, conv1_, 1);
  c.r1 = relu(c.c1);
  c.p1 = maxpool2(c.r1, c.am1);
  c.c2 = conv2d(c.p1, conv2_, 1);
  c.r2 = relu(c.c2);
  c.p2 = maxpool2(c.r2, c.am2);
  c.z = c.p2.reshaped({b, flat_});
  return c.z;
}

Tensor Autoencoder::features(const Tensor& x) const {
  Cache c;
  Tensor z = encode(x, c);
  return x.rank() == 4 ? z : z.reshaped({flat_});
}

Tensor Autoencoder::forward(const Tensor& x) const {
  Cache c;
  return forward(x, c);
}

Tensor Autoencoder::forward(const Tensor& x, Cache& c) const {
  encode(x, c);
  const int b = c.x.dim(0);
  c.dain = c.z.reshaped({b, 16, q2_, q2_});
  c.ea = deconv2d(c.dain, deca_, 2, q1_, q1_);
  c.era = relu(c.ea);
  c.eb = deconv2d(c.era, decb_, 2, cfg_.height, cfg_.width);
  c.out = sigmoid(c.eb);
  return x.rank() == 4 ? c.out : c.out.reshaped({1, cfg_.height, cfg_.width});
}

void Autoencoder::backward(Cache& c, const Tensor& gout, const Tensor* g_feat) {
  const int b = c.x.dim(0);
  Tensor g = gout.rank() == 4 ? gout : gout.reshaped({1, 1, cfg_.height, cfg_.width});
  g = sigmoid_backward(c.out, g);
  g = deconv2d_backward(c.era, decb_, 2, g);
  g = relu_backward(c.ea, g);
  g = deconv2d_backward(c.dain, deca_, 2, g);
  g = g.reshaped({b, flat_});
  if (g_feat) {
    if (!g_feat->same_shape(g))
      throw ConfigError("autoencoder backward: feature grad " + shape_str(g_feat->shape()) +
                        " vs " + shape_str(g.shape()));
    g.array() += g_feat->array();
  }
  g = g.reshaped({b, 16, q2_, q2_});
  g = maxpool2_backward(c.am2, c.r2.shape(), g);
  g = relu_backward(c.c2, g);
  g = conv2d_backward(c.p1, conv2_, 1, g);
  g = maxpool2_backward(c.am1, c.r1.shape(), g);
  g = relu_backward(c.c1, g);
  conv2d_backward(c.x, conv1_, 1, g, /*need_gx=*/false);
}

void Autoencoder::zero_grad() {
  for (LayerParams* p : params()) p->zero_grad();
}

std::vector<LayerParams*> Autoencoder::params() { return {&conv1_, &conv2_, &deca_, &decb_}; }

std::vector<std::pair<std::string, Tensor*>> Autoencoder::named_params() {
  return {
      {"ae.conv1.w", &conv1_.w}, {"ae.conv1.b", &conv1_.b}, {"ae.conv2.w", &conv2_.w},
      {"ae.conv2.b", &conv2_.b}, {"ae.deca.w", &deca_.w},   {"ae.deca.b", &deca_.b},
      {"ae.decb.w", &decb_.w},   {"ae.decb.b", &decb_.b},
  };
}

std::vector<NamedTensor> Autoencoder::checkpoint_blocks() const {
  std::vector<NamedTensor> out;
  for (const auto& [name, tensor] : const_cast<Autoencoder*>(this)->named_params())
    out.emplace_back(name, tensor);
  return out;
}

void Autoencoder::load(const std::map<std::string, Tensor>& blocks) {
  const auto named = named_params();
  load_named(blocks, named, "autoencoder");
}

// --- phase 1 ------------------------------------------------------------------

FrameSet frames_from_dataset(const Dataset& ds) {
  FrameSet fs;
  fs.m = ds.header.m;
  fs.n = ds.header.n;
  fs.frames.reserve(ds.records.size());
  for (const TransitionRecord& rec : ds.records) fs.frames.push_back(rec.next_frame);
  return fs;
}

Tensor frame_set_batch(const FrameSet& fs, std::span<const std::size_t> idx) {
  Tensor x({static_cast<int>(idx.size()), 1, fs.m, fs.n});
  float* out = x.data();
  for (const std::size_t i : idx)
    for (const std::uint8_t p : fs.frames[i]) *out++ = static_cast<float>(p) / 255.0f;
  return x;
}

namespace {

double frame_set_bce(const Autoencoder& ae, const FrameSet& fs,
                     std::span<const std::size_t> idx, int batch) {
  double sum = 0.0;
  for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min(idx.size() - at, static_cast<std::size_t>(batch));
    const Tensor x = frame_set_batch(fs, idx.subspan(at, n));
    sum += static_cast<double>(bce_loss(ae.forward(x), x)) * static_cast<double>(n);
  }
  return sum / static_cast<double>(idx.size());
}

}  // namespace

std::vector<Phase1EpochPoint> train_phase1(Autoencoder& ae, const FrameSet& frames,
                                           const TrainPhase1Config& cfg,
                                           const Phase1Callback& on_epoch) {
  if (frames.frames.empty()) throw InputError("train_phase1: empty frame set");
  Rng split_rng = stream_rng(cfg.seed, "ae1.split");
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < frames.frames.size(); ++i)
    (split_rng.uniform() < cfg.val_fraction ? val_idx : train_idx).push_back(i);
  if (val_idx.empty()) {
    val_idx.push_back(train_idx.back());
    train_idx.pop_back();
  }
  if (train_idx.empty()) throw InputError("train_phase1: no training frames after split");

  AdamState opt(AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.grad_scale});
  Rng shuffle_rng = stream_rng(cfg.seed, "ae1.shuffle");
  std::vector<Phase1EpochPoint> curve;
  double best_val = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1], train_idx[static_cast<std::size_t>(shuffle_rng.below(i))]);
    double train_sum = 0.0;
    for (std::size_t at = 0; at < train_idx.size(); at += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t n = std::min(train_idx.size() - at, static_cast<std::size_t>(cfg.batch));
      const Tensor x = frame_set_batch(frames, std::span<const std::size_t>(train_idx).subspan(at, n));
      Autoencoder::Cache cache;
      const Tensor out = ae.forward(x, cache);
      const float loss = bce_loss(out, x);
      if (!std::isfinite(loss))
        throw NumericError("train_phase1: non-finite loss in epoch " + std::to_string(epoch));
      ae.zero_grad();
      ae.backward(cache, bce_loss_backward(out, x));
      adam_step(ae.params(), opt);
      train_sum += static_cast<double>(loss) * static_cast<double>(n);
    }
    Phase1EpochPoint pt;
    pt.epoch = epoch;
    pt.train_bce = train_sum / static_cast<double>(train_idx.size());
    pt.val_bce = frame_set_bce(ae, frames, val_idx, cfg.batch);
    if (!std::isfinite(pt.val_bce))
      throw NumericError("train_phase1: non-finite validation loss in epoch " +
                         std::to_string(epoch));
    curve.push_back(pt);
    if (on_epoch) on_epoch(pt);

    if (best_val - pt.val_bce < cfg.converge_tol * std::abs(best_val))
      ++stall;
    else
      stall = 0;
    best_val = std::min(best_val, pt.val_bce);
    if (stall >= cfg.converge_patience) break;
  }
  return curve;
}

// --- phase 2 ------------------------------------------------------------------

PairSet build_pair_set(const Dataset& ds, const PredictionNet& net,
                       std::span<const std::size_t> record_indices) {
  const PredictionConfig& cfg = net.config();
  PairSet pairs;
  pairs.m = ds.header.m;
  pairs.n = ds.header.n;
  pairs.seen.reserve(record_indices.size());
  pairs.pred.reserve(record_indices.size());
  const Eigen::Index plane = static_cast<Eigen::Index>(cfg.height) * cfg.width;
  constexpr std::size_t kChunk = 100;
  for (std::size_t at = 0; at < record_indices.size(); at += kChunk) {
    const std::size_t n = std::min(record_indices.size() - at, kChunk);
    const auto chunk = record_indices.subspan(at, n);
    const Tensor preds = net.forward(stack_batch(ds, chunk), action_batch(ds, chunk));
    for (std::size_t i = 0; i < n; ++i) {
      pairs.seen.push_back(ds.records[chunk[i]].next_frame);
      Tensor pf({cfg.height, cfg.width});
      std::copy_n(preds.data() + static_cast<Eigen::Index>(i) * plane, plane, pf.data());
      pairs.pred.push_back(quantize_frame(pf).px);
    }
  }
  return pairs;
}

std::pair<PairSet, PairSet> split_pair_set(const PairSet& pairs, double eval_fraction,
                                           std::uint64_t seed) {
  Rng rng = stream_rng(seed, "pairs.split");
  PairSet train, eval;
  train.m = eval.m = pairs.m;
  train.n = eval.n = pairs.n;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    PairSet& dst = rng.uniform() < eval_fraction ? eval : train;
    dst.seen.push_back(pairs.seen[i]);
    dst.pred.push_back(pairs.pred[i]);
  }
  return {std::move(train), std::move(eval)};
}

namespace {

Tensor pair_batch(const std::vector<std::vector<std::uint8_t>>& planes, int m, int n,
                  std::span<const std::size_t> idx) {
  Tensor x({static_cast<int>(idx.size()), 1, m, n});
  float* out = x.data();
  for (const std::size_t i : idx)
    for (const std::uint8_t p : planes[i]) *out++ = static_cast<float>(p) / 255.0f;
  return x;
}

// Per-pair matching gradients: lambda * d||zs - zp||_2, averaged over batch.
double matching_loss_and_grads(const Tensor& zs, const Tensor& zp, float lambda, Tensor& gzs,
                               Tensor& gzp) {
  const Eigen::Index b = zs.dim(0);
  const Eigen::Index d = zs.dim(1);
  gzs = Tensor(zs.shape());
  gzp = Tensor(zp.shape());
  double total = 0.0;
  const float scale = lambda / static_cast<float>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const float* s = zs.data() + i * d;
    const float* p = zp.data() + i * d;
    float sq = 0.0f;
    for (Eigen::Index j = 0; j < d; ++j) sq += (s[j] - p[j]) * (s[j] - p[j]);
    const float dist = std::sqrt(sq);
    total += dist;
    if (dist > 0.0f) {
      float* gs = gzs.data() + i * d;
      float* gp = gzp.data() + i * d;
      const float c = scale / dist;
      for (Eigen::Index j = 0; j < d; ++j) {
        gs[j] = c * (s[j] - p[j]);
        gp[j] = -gs[j];
      }
    }
  }
  return total / static_cast<double>(b);
}

}  // namespace

std::vector<Phase2EpochPoint> train_phase2(Autoencoder& ae, const PairSet& train_pairs,
                                           const PairSet& eval_pairs, const Projection& proj,
                                           const TrainPhase2Config& cfg,
                                           const Phase2Callback& on_epoch) {
  if (train_pairs.size() == 0) throw InputError("train_phase2: empty pair set");
  if (proj.dim != ae.feature_dim())
    throw ConfigError("train_phase2: projection dim " + std::to_string(proj.dim) +
                      " vs feature dim " + std::to_string(ae.feature_dim()));
  AdamState opt(AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.grad_scale});
  Rng shuffle_rng = stream_rng(cfg.seed, "ae2.shuffle");
  std::vector<std::size_t> order(train_pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Phase2EpochPoint> curve;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.below(i))]);
    double loss_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t n = std::min(order.size() - at, static_cast<std::size_t>(cfg.batch));
      const auto chunk = std::span<const std::size_t>(order).subspan(at, n);
      const Tensor xs = pair_batch(train_pairs.seen, train_pairs.m, train_pairs.n, chunk);
      const Tensor xp = pair_batch(train_pairs.pred, train_pairs.m, train_pairs.n, chunk);
      Autoencoder::Cache cs, cp;
      const Tensor outs = ae.forward(xs, cs);
      const Tensor outp = ae.forward(xp, cp);
      Tensor gzs, gzp;
      const double match = matching_loss_and_grads(cs.z, cp.z, cfg.lambda, gzs, gzp);
      const float rec_s = bce_loss(outs, xs);
      const float rec_p = bce_loss(outp, xp);
      const double loss = static_cast<double>(rec_s) + static_cast<double>(rec_p) +
                          static_cast<double>(cfg.lambda) * match;
      if (!std::isfinite(loss))
        throw NumericError("train_phase2: non-finite loss in epoch " + std::to_string(epoch));
      ae.zero_grad();
      ae.backward(cs, bce_loss_backward(outs, xs), &gzs);
      ae.backward(cp, bce_loss_backward(outp, xp), &gzp);
      adam_step(ae.params(), opt);
      loss_sum += loss * static_cast<double>(n);
    }
    const CodeStats stats = eval_code_stats(ae, proj, eval_pairs);
    Phase2EpochPoint pt;
    pt.epoch = epoch;
    pt.loss = loss_sum / static_cast<double>(order.size());
    pt.mean_code_loss = stats.mean_code_loss;
    pt.rec_mse_seen = stats.rec_mse_seen;
    pt.rec_mse_pred = stats.rec_mse_pred;
    curve.push_back(pt);
    if (on_epoch) on_epoch(pt);
  }
  return curve;
}

CodeStats eval_code_stats(const Autoencoder& ae, const Projection& proj, const PairSet& pairs) {
  CodeStats stats;
  stats.pairs = static_cast<std::int64_t>(pairs.size());
  if (pairs.size() == 0) return stats;
  std::vector<int> losses;
  losses.reserve(pairs.size());
  double mse_seen = 0.0, mse_pred = 0.0;
  constexpr std::size_t kChunk = 200;
  std::vector<std::size_t> idx(pairs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t at = 0; at < pairs.size(); at += kChunk) {
    const std::size_t n = std::min(pairs.size() - at, kChunk);
    const auto chunk = std::span<const std::size_t>(idx).subspan(at, n);
    const Tensor xs = pair_batch(pairs.seen, pairs.m, pairs.n, chunk);
    const Tensor xp = pair_batch(pairs.pred, pairs.m, pairs.n, chunk);
    Autoencoder::Cache cs, cp;
    const Tensor outs = ae.forward(xs, cs);
    const Tensor outp = ae.forward(xp, cp);
    mse_seen += static_cast<double>(mse_loss(outs, xs)) * static_cast<double>(n);
    mse_pred += static_cast<double>(mse_loss(outp, xp)) * static_cast<double>(n);
    const int d = ae.feature_dim();
    for (std::size_t i = 0; i < n; ++i) {
      Tensor zs({d}), zp({d});
      std::copy_n(cs.z.data() + static_cast<Eigen::Index>(i) * d, d, zs.data());
      std::copy_n(cp.z.data() + static_cast<Eigen::Index>(i) * d, d, zp.data());
      losses.push_back(code_loss(hash_features(proj, zs), hash_features(proj, zp)));
    }
  }
  double sum = 0.0;
  std::int64_t zeros = 0;
  for (const int v : losses) {
    sum += v;
    if (v == 0) ++zeros;
  }
  stats.mean_code_loss = sum / static_cast<double>(losses.size());
  std::vector<int> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  stats.median_code_loss = sorted.size() % 2 == 1
                               ? sorted[mid]
                               : (static_cast<double>(sorted[mid - 1]) + sorted[mid]) / 2.0;
  stats.frac_zero = static_cast<double>(zeros) / static_cast<double>(losses.size());
  stats.rec_mse_seen = mse_seen / static_cast<double>(pairs.size());
  stats.rec_mse_pred = mse_pred / static_cast<double>(pairs.size());
  return stats;
}

}  // namespace iex
