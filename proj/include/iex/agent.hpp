#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>

#include "iex/adam.hpp"
#include "iex/autoencoder.hpp"
#include "iex/dataset.hpp"
#include "iex/env.hpp"
#include "iex/hashing.hpp"
#include "iex/nets.hpp"
#include "iex/ops.hpp"
#include "iex/prediction.hpp"

namespace iex {

struct QNetConfig {
  int frames = 4;
  int height = 30;
  int width = 30;
  int actions = 4;
  int hidden = 128;
};

// Conv encoder over the frame stack (same block structure as the autoencoder
// encoder) plus a dense head emitting one value per action.
class QNetwork {
 public:
  QNetwork(QNetConfig cfg, Rng& rng);

  const QNetConfig& config() const { return cfg_; }

  struct Cache {
    Tensor x;
    Tensor c1, r1, p1, c2, r2, p2;
    std::vector<Eigen::Index> am1, am2;
    Tensor flat, d1, rd1, q;
  };

  // x: (B, r, m, n) floats; returns (B, l).
  Tensor forward(const Tensor& x) const;
  Tensor forward(const Tensor& x, Cache& c) const;
  void backward(Cache& c, const Tensor& gq);

  void zero_grad();
  std::vector<LayerParams*> params();
  std::vector<std::pair<std::string, Tensor*>> named_params();
  std::vector<NamedTensor> checkpoint_blocks() const;
  void load(const std::map<std::string, Tensor>& blocks);
  void copy_from(const QNetwork& other);

 private:
  QNetConfig cfg_;
  int k1_, k2_, q1_, q2_, flat_;
  LayerParams conv1_, conv2_, fc1_, head_;
};

// --- exploration policy -------------------------------------------------------

// rho = sum_i beta^(i-1) / sqrt(counts[i] + 0.01), evaluated in double.
double novelty_score(std::span<const double> counts, double beta);

// For each action: H-step rollout repeating that action, count lookups for
// each predicted frame (query only), novelty score; returns the argmax with
// ties broken toward the lowest action index.
int informed_action(const FrameStack& state, const PredictionNet& pred, const Autoencoder& ae,
                    const Projection& proj, const CountTable& table, int horizon, double beta);

struct EpsSchedule {
  double start = 1.0;
  double end = 0.1;
  std::int64_t anneal_steps = 1;

  double at(std::int64_t step) const {
    if (anneal_steps <= 0 || step >= anneal_steps) return end;
    const double f = static_cast<double>(step) / static_cast<double>(anneal_steps);
    return start + (end - start) * f;
  }
};

enum class ExploreMode { Random, InformedHash };

std::string explore_mode_name(ExploreMode m);
ExploreMode explore_mode_from_name(const std::string& name);

struct PolicyConfig {
  EpsSchedule eps;
  int horizon = 3;     // H (the paper's q)
  double beta = 0.9;   // novelty discount
  double gamma = 0.99; // Q discount
  ExploreMode mode = ExploreMode::InformedHash;

  void validate() const;
};

struct ExplorationModels {
  const PredictionNet* pred = nullptr;
  const Autoencoder* ae = nullptr;
  const Projection* proj = nullptr;
  const CountTable* table = nullptr;
};

// Greedy Q argmax with probability 1 - eps(step); otherwise the exploratory
// action (informed or uniform random per mode). Ties go to the lowest index.
int select_action(const FrameStack& state, const QNetwork& qnet, const ExplorationModels& models,
                  const PolicyConfig& cfg, std::int64_t step, Rng& rng);

// --- learner -------------------------------------------------------------------

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(TransitionRecord rec);  // strictly FIFO eviction once full
  std::size_t size() const { return full_ ? buf_.size() : next_; }
  std::size_t capacity() const { return buf_.size(); }
  const TransitionRecord& at(std::size_t i) const { return buf_[i]; }
  // Uniform over the filled region.
  std::vector<std::size_t> sample(std::size_t k, Rng& rng) const;

 private:
  std::vector<TransitionRecord> buf_;
  std::size_t next_ = 0;
  bool full_ = false;
};

struct StackDims {
  int r = 4, m = 30, n = 30, l = 4;
};

// One TD step on a uniform batch: y = r + gamma * max_a' Qtarget(s',a'), with
// y = r on true terminals (bootstraps through truncation); squared error on
// the taken action. QModel needs forward/backward/params/zero_grad.
template <typename QModel>
float dqn_update(QModel& qnet, const QModel& target, const ReplayBuffer& buffer,
                 std::span<const std::size_t> batch, const StackDims& dims, float gamma,
                 AdamState& opt);

struct DqnConfig {
  float lr = 1e-3f;
  int batch = 32;
  int target_sync = 500;      // updates between target copies
  int update_period = 10;     // env steps between updates
  std::size_t buffer_capacity = 50000;
  std::size_t min_buffer = 1000;
};

struct EpisodeRow {
  std::int64_t env_step = 0;       // global step at episode end
  std::int64_t episode_index = 0;
  double episode_return = 0.0;
  std::int64_t steps_to_first_reward = -1;  // global step of first reward, -1 if none yet
};

struct AgentRunResult {
  std::vector<EpisodeRow> curve;
  std::int64_t first_reward_step = -1;
  std::uint64_t count_table_total = 0;
  std::size_t count_table_distinct = 0;
  std::string counts_csv;  // hex/count dump (informed mode)
};

// Single-seed training loop: select action, step, insert the newly seen
// frame's code (informed mode), store the transition, periodic TD updates and
// target syncs. Models must be frozen/trained in informed mode and may be
// null in random mode.
AgentRunResult train_agent(const EnvSpec& spec, const PolicyConfig& policy, const DqnConfig& dqn,
                           QNetwork& qnet, const ExplorationModels& models, std::int64_t budget,
                           std::uint64_t seed);

}  // namespace iex
