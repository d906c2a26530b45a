#include "iex/prediction.hpp"

#include <algorithm>
#include <cmath>

#include "iex/loss.hpp"

namespace iex {

PredictionNet::PredictionNet(PredictionConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.height != cfg_.width)
    throw ConfigError("prediction net expects square frames, got " + std::to_string(cfg_.height) +
                      "x" + std::to_string(cfg_.width));
  if (cfg_.height % 2 != 0) throw ConfigError("prediction net expects even frame size");
  const int m = cfg_.height;
  k1_ = stride2_kernel(m);
  s1_ = conv_out(m, k1_, 2);
  k2_ = stride2_kernel(s1_);
  s2_ = conv_out(s1_, k2_, 2);
  k3_ = 3;
  s3_ = conv_out(s2_, k3_, 1);
  if (s3_ < 1) throw ConfigError("frame size too small for the three-conv encoder");
  flat_ = 16 * s3_ * s3_;

  conv1_ = LayerParams({8, cfg_.frames, k1_, k1_}, {8});
  conv2_ = LayerParams({16, 8, k2_, k2_}, {16});
  conv3_ = LayerParams({16, 16, k3_, k3_}, {16});
  enc_fc_ = LayerParams({cfg_.feature_dim, flat_}, {cfg_.feature_dim});
  ws_ = LayerParams({cfg_.joint_dim, cfg_.feature_dim}, {});
  wa_ = LayerParams({cfg_.joint_dim, cfg_.actions}, {});
  dec_fc_ = LayerParams({flat_, cfg_.joint_dim}, {flat_});
  dec3_ = LayerParams({16, 16, k3_, k3_}, {16});
  dec2_ = LayerParams({16, 8, k2_, k2_}, {8});
  dec1_ = LayerParams({8, 1, k1_, k1_}, {1});

  init_layer(conv1_, cfg_.frames * k1_ * k1_, rng);
  init_layer(conv2_, 8 * k2_ * k2_, rng);
  init_layer(conv3_, 16 * k3_ * k3_, rng);
  init_layer(enc_fc_, flat_, rng);
  init_layer(ws_, cfg_.feature_dim, rng);
  init_layer(wa_, cfg_.actions, rng);
  init_layer(dec_fc_, cfg_.joint_dim, rng);
  init_layer(dec3_, 16 * k3_ * k3_, rng);
  init_layer(dec2_, 16 * k2_ * k2_, rng);
  init_layer(dec1_, 8 * k1_ * k1_, rng);
}

std::int64_t PredictionNet::param_count() const {
  std::int64_t n = 0;
  for (const LayerParams* p : const_cast<PredictionNet*>(this)->params())
    n += p->w.size() + p->b.size();
  return n;
}

Tensor PredictionNet::forward(const Tensor& x, const Tensor& a) const {
  Cache c;
  return forward(x, a, c);
}

Tensor PredictionNet::forward(const Tensor& x, const Tensor& a, Cache& c) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.frames || x.dim(2) != cfg_.height ||
      x.dim(3) != cfg_.width)
    throw ConfigError("prediction forward: state " + shape_str(x.shape()) + ", expected (B," +
                      std::to_string(cfg_.frames) + "," + std::to_string(cfg_.height) + "," +
                      std::to_string(cfg_.width) + ")");
  const int b = x.dim(0);
  c.x = x;
  c.a = a;
  c.c1 = conv2d(c.x, conv1_, 2);
  c.r1 = relu(c.c1);
  c.c2 = conv2d(c.r1, conv2_, 2);
  c.r2 = relu(c.c2);
  c.c3 = conv2d(c.r2, conv3_, 1);
  c.r3 = relu(c.c3);
  c.flat = c.r3.reshaped({b, flat_});
  c.hs = dense(c.flat, enc_fc_);
  c.joint = multiplicative_fusion(c.hs, c.a, ws_, wa_, &c.fusion);
  c.d0 = dense(c.joint, dec_fc_);
  c.dr0 = relu(c.d0);
  c.d3in = c.dr0.reshaped({b, 16, s3_, s3_});
  c.e3 = deconv2d(c.d3in, dec3_, 1, s2_, s2_);
  c.er3 = relu(c.e3);
  c.e2 = deconv2d(c.er3, dec2_, 2, s1_, s1_);
  c.er2 = relu(c.e2);
  c.e1 = deconv2d(c.er2, dec1_, 2, cfg_.height, cfg_.width);
  c.out = sigmoid(c.e1);
  return c.out;
}

void PredictionNet::backward(Cache& c, const Tensor& gout) {
  const int b = c.x.dim(0);
  Tensor g = sigmoid_backward(c.out, gout);
  g = deconv2d_backward(c.er2, dec1_, 2, g);
  g = relu_backward(c.e2, g);
  g = deconv2d_backward(c.er3, dec2_, 2, g);
  g = relu_backward(c.e3, g);
  g = deconv2d_backward(c.d3in, dec3_, 1, g);
  g = g.reshaped({b, flat_});
  g = relu_backward(c.d0, g);
  g = dense_backward(c.joint, dec_fc_, g);
  g = multiplicative_fusion_backward(c.hs, c.a, ws_, wa_, c.fusion, g);
  g = dense_backward(c.flat, enc_fc_, g);
  g = g.reshaped({b, 16, s3_, s3_});
  g = relu_backward(c.c3, g);
  g = conv2d_backward(c.r2, conv3_, 1, g);
  g = relu_backward(c.c2, g);
  g = conv2d_backward(c.r1, conv2_, 2, g);
  g = relu_backward(c.c1, g);
  conv2d_backward(c.x, conv1_, 2, g, /*need_gx=*/false);
}

void PredictionNet::zero_grad() {
  for (LayerParams* p : params()) p->zero_grad();
}

std::vector<LayerParams*> PredictionNet::params() {
  return {&conv1_, &conv2_, &conv3_, &enc_fc_, &ws_, &wa_, &dec_fc_, &dec3_, &dec2_, &dec1_};
}

std::vector<std::pair<std::string, Tensor*>> PredictionNet::named_params() {
  return {
      {"pred.conv1.w", &conv1_.w},   {"pred.conv1.b", &conv1_.b},
      {"pred.conv2.w", &conv2_.w},   {"pred.conv2.b", &conv2_.b},
      {"pred.conv3.w", &conv3_.w},   {"pred.conv3.b", &conv3_.b},
      {"pred.enc_fc.w", &enc_fc_.w}, {"pred.enc_fc.b", &enc_fc_.b},
      {"pred.ws.w", &ws_.w},         {"pred.wa.w", &wa_.w},
      {"pred.dec_fc.w", &dec_fc_.w}, {"pred.dec_fc.b", &dec_fc_.b},
      {"pred.dec3.w", &dec3_.w},     {"pred.dec3.b", &dec3_.b},
      {"pred.dec2.w", &dec2_.w},     {"pred.dec2.b", &dec2_.b},
      {"pred.dec1.w", &dec1_.w},     {"pred.dec1.b", &dec1_.b},
  };
}

std::vector<NamedTensor> PredictionNet::checkpoint_blocks() const {
  std::vector<NamedTensor> out;
  for (const auto& [name, tensor] : const_cast<PredictionNet*>(this)->named_params())
    out.emplace_back(name, tensor);
  return out;
}

void PredictionNet::load(const std::map<std::string, Tensor>& blocks) {
  const auto named = named_params();
  load_named(blocks, named, "prediction net");
}

// --- module operations ------------------------------------------------------

Tensor predict_frame(const PredictionNet& net, const FrameStack& state, int action) {
  const PredictionConfig& cfg = net.config();
  if (action < 0 || action >= cfg.actions)
    throw InputError("predict_frame: action " + std::to_string(action) + " out of range [0," +
                     std::to_string(cfg.actions) + ")");
  Tensor x = state.to_tensor().reshaped({1, cfg.frames, cfg.height, cfg.width});
  Tensor a({1, cfg.actions});
  a[action] = 1.0f;
  return net.forward(x, a).reshaped({cfg.height, cfg.width});
}

Frame quantize_frame(const Tensor& float_frame) {
  const int rank = float_frame.rank();
  if (rank != 2 && !(rank == 3 && float_frame.dim(0) == 1))
    throw ConfigError("quantize_frame: expected (m,n) or (1,m,n), got " +
                      shape_str(float_frame.shape()));
  const int m = float_frame.dim(rank - 2);
  const int n = float_frame.dim(rank - 1);
  Frame f(m, n);
  for (Eigen::Index i = 0; i < float_frame.size(); ++i) {
    const float v = std::clamp(float_frame[i], 0.0f, 1.0f);
    f.px[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return f;
}

FrameStack compose_state(const FrameStack& state, Frame new_frame) {
  const Frame& last = state.last();
  if (new_frame.height != last.height || new_frame.width != last.width)
    throw ConfigError("compose_state: frame " + std::to_string(new_frame.height) + "x" +
                      std::to_string(new_frame.width) + " vs stack " +
                      std::to_string(last.height) + "x" + std::to_string(last.width));
  FrameStack next = state;
  next.push(std::move(new_frame));
  return next;
}

std::vector<Frame> rollout(const FramePredictor& predict, const FrameStack& state, int action,
                           int horizon) {
  if (horizon < 0) throw InputError("rollout: horizon must be >= 0");
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(horizon));
  FrameStack cur = state;
  for (int i = 0; i < horizon; ++i) {
    Frame f = quantize_frame(predict(cur, action));
    cur = compose_state(cur, f);
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<Frame> rollout(const PredictionNet& net, const FrameStack& state, int action,
                           int horizon) {
  return rollout([&net](const FrameStack& s, int a) { return predict_frame(net, s, a); }, state,
                 action, horizon);
}

std::vector<Frame> rollout_recorded(const PredictionNet& net, const FrameStack& state,
                                    std::span<const int> actions) {
  std::vector<Frame> frames;
  frames.reserve(actions.size());
  FrameStack cur = state;
  for (const int a : actions) {
    Frame f = quantize_frame(predict_frame(net, cur, a));
    cur = compose_state(cur, f);
    frames.push_back(std::move(f));
  }
  return frames;
}

// --- training ----------------------------------------------------------------

namespace {

double batch_mse(const PredictionNet& net, const Dataset& ds,
                 std::span<const std::size_t> idx, int batch) {
  double sum = 0.0;
  for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min(idx.size() - at, static_cast<std::size_t>(batch));
    const auto chunk = idx.subspan(at, n);
    const Tensor x = stack_batch(ds, chunk);
    const Tensor a = action_batch(ds, chunk);
    const Tensor t = next_frame_batch(ds, chunk);
    sum += static_cast<double>(mse_loss(net.forward(x, a), t)) * static_cast<double>(n);
  }
  return sum / static_cast<double>(idx.size());
}

}  // namespace

std::vector<LossCurvePoint> train_prediction(PredictionNet& net, const Dataset& ds,
                                             const TrainPredConfig& cfg,
                                             const EpochCallback& on_epoch) {
  if (ds.records.empty()) throw InputError("train_prediction: empty dataset");
  const EpisodeSplit split = split_by_episode(ds, cfg.val_fraction, cfg.seed);
  if (split.train.empty()) throw InputError("train_prediction: no training episodes after split");

  AdamState opt(AdamConfig{cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.grad_scale});
  Rng shuffle_rng = stream_rng(cfg.seed, "pred.shuffle");
  std::vector<std::size_t> order = split.train;
  std::vector<LossCurvePoint> curve;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates with the run's stream rng.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.below(i));
      std::swap(order[i - 1], order[j]);
    }
    double train_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t n = std::min(order.size() - at, static_cast<std::size_t>(cfg.batch));
      const auto chunk = std::span<const std::size_t>(order).subspan(at, n);
      const Tensor x = stack_batch(ds, chunk);
      const Tensor a = action_batch(ds, chunk);
      const Tensor t = next_frame_batch(ds, chunk);
      PredictionNet::Cache cache;
      const Tensor out = net.forward(x, a, cache);
      const float loss = mse_loss(out, t);
      if (!std::isfinite(loss))
        throw NumericError("train_prediction: non-finite loss in epoch " + std::to_string(epoch));
      net.zero_grad();
      net.backward(cache, mse_loss_backward(out, t));
      adam_step(net.params(), opt);
      train_sum += static_cast<double>(loss) * static_cast<double>(n);
    }
    LossCurvePoint pt;
    pt.epoch = epoch;
    pt.train_mse = train_sum / static_cast<double>(order.size());
    pt.val_mse = split.val.empty() ? pt.train_mse : batch_mse(net, ds, split.val, cfg.batch);
    if (!std::isfinite(pt.val_mse))
      throw NumericError("train_prediction: non-finite validation loss in epoch " +
                         std::to_string(epoch));
    curve.push_back(pt);
    if (on_epoch) on_epoch(pt);
  }
  return curve;
}

std::vector<MultiStepRow> eval_multistep_mse(const PredictionNet& net, const Dataset& ds,
                                             std::span<const std::size_t> record_indices,
                                             std::span<const int> horizons) {
  if (!std::is_sorted(horizons.begin(), horizons.end()))
    throw InputError("eval_multistep_mse: horizons must be sorted ascending");
  const PredictionConfig& cfg = net.config();
  const int max_h = horizons.empty() ? 0 : horizons.back();
  const Eigen::Index plane = static_cast<Eigen::Index>(cfg.height) * cfg.width;

  // Feasible rollout length per start: records t .. t+K-1 must sit inside one
  // episode (terminal closes it).
  std::vector<std::pair<std::size_t, int>> starts;  // (record index, feasible K)
  for (const std::size_t t : record_indices) {
    int feasible = 0;
    for (int k = 0; k < max_h; ++k) {
      const std::size_t j = t + static_cast<std::size_t>(k);
      if (j >= ds.records.size()) break;
      ++feasible;
      if (ds.records[j].terminal) break;
    }
    starts.emplace_back(t, feasible);
  }

  std::vector<MultiStepRow> rows(horizons.size());
  for (std::size_t h = 0; h < horizons.size(); ++h) rows[h].horizon = horizons[h];

  constexpr std::size_t kChunk = 64;
  for (std::size_t at = 0; at < starts.size(); at += kChunk) {
    const std::size_t n = std::min(starts.size() - at, kChunk);
    std::vector<FrameStack> stacks;
    stacks.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      stacks.push_back(FrameStack::from_bytes(ds.records[starts[at + i].first].state, cfg.frames,
                                              cfg.height, cfg.width));
    for (int k = 1; k <= max_h; ++k) {
      std::vector<std::size_t> alive;
      for (std::size_t i = 0; i < n; ++i)
        if (starts[at + i].second >= k) alive.push_back(i);
      if (alive.empty()) break;
      Tensor x({static_cast<int>(alive.size()), cfg.frames, cfg.height, cfg.width});
      Tensor a({static_cast<int>(alive.size()), cfg.actions});
      for (std::size_t bi = 0; bi < alive.size(); ++bi) {
        const Tensor st = stacks[alive[bi]].to_tensor();
        std::copy_n(st.data(), st.size(), x.data() + static_cast<Eigen::Index>(bi) * st.size());
        const std::size_t rec = starts[at + alive[bi]].first + static_cast<std::size_t>(k) - 1;
        a[static_cast<Eigen::Index>(bi) * cfg.actions + ds.records[rec].action] = 1.0f;
      }
      const Tensor preds = net.forward(x, a);
      for (std::size_t bi = 0; bi < alive.size(); ++bi) {
        const std::size_t rec = starts[at + alive[bi]].first + static_cast<std::size_t>(k) - 1;
        const float* p = preds.data() + static_cast<Eigen::Index>(bi) * plane;
        const auto h_it = std::find(horizons.begin(), horizons.end(), k);
        if (h_it != horizons.end()) {
          double err = 0.0;
          const auto& truth = ds.records[rec].next_frame;
          for (Eigen::Index px = 0; px < plane; ++px) {
            const double d = static_cast<double>(p[px]) -
                             static_cast<double>(truth[static_cast<std::size_t>(px)]) / 255.0;
            err += d * d;
          }
          MultiStepRow& row = rows[static_cast<std::size_t>(h_it - horizons.begin())];
          row.mse += err / static_cast<double>(plane);
          ++row.starts_used;
        }
        // Quantized re-entry keeps predicted and seen stacks in one domain.
        Tensor pf({cfg.height, cfg.width});
        std::copy_n(p, plane, pf.data());
        stacks[alive[bi]] = compose_state(stacks[alive[bi]], quantize_frame(pf));
      }
    }
  }
  for (std::size_t h = 0; h < rows.size(); ++h) {
    if (rows[h].starts_used > 0) rows[h].mse /= static_cast<double>(rows[h].starts_used);
    rows[h].starts_skipped = static_cast<std::int64_t>(starts.size()) - rows[h].starts_used;
  }
  return rows;
}

}  // namespace iex
