#include "iex/env.hpp"

#include <algorithm>

#include "iex/errors.hpp"

namespace iex {

Tensor frame_to_tensor(const Frame& f) {
  Tensor t({1, f.height, f.width});
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(f.px[static_cast<std::size_t>(i)]) / 255.0f;
  return t;
}

FrameStack::FrameStack(int r, Frame initial) {
  if (r < 1) throw ConfigError("frame stack needs r >= 1");
  frames_.assign(static_cast<std::size_t>(r), initial);
  frames_.back() = std::move(initial);
}

void FrameStack::push(Frame f) {
  frames_.erase(frames_.begin());
  frames_.push_back(std::move(f));
}

Tensor FrameStack::to_tensor() const {
  const int r = count();
  const int m = frames_.front().height;
  const int n = frames_.front().width;
  Tensor t({r, m, n});
  Eigen::Index idx = 0;
  for (const Frame& f : frames_)
    for (const std::uint8_t p : f.px) t[idx++] = static_cast<float>(p) / 255.0f;
  return t;
}

std::vector<std::uint8_t> FrameStack::bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(frames_.size() * frames_.front().px.size());
  for (const Frame& f : frames_) out.insert(out.end(), f.px.begin(), f.px.end());
  return out;
}

FrameStack FrameStack::from_bytes(const std::vector<std::uint8_t>& data, int r, int m, int n) {
  const std::size_t plane = static_cast<std::size_t>(m) * n;
  if (data.size() != plane * static_cast<std::size_t>(r))
    throw ConfigError("frame stack bytes: got " + std::to_string(data.size()) + ", want " +
                      std::to_string(plane * static_cast<std::size_t>(r)));
  FrameStack s;
  for (int k = 0; k < r; ++k) {
    Frame f(m, n);
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(k * plane), plane, f.px.begin());
    s.frames_.push_back(std::move(f));
  }
  return s;
}

std::string env_kind_name(EnvKind k) {
  return k == EnvKind::GoalGrid ? "goal-grid" : "paddle-ball";
}

EnvKind env_kind_from_name(const std::string& name) {
  if (name == "goal-grid") return EnvKind::GoalGrid;
  if (name == "paddle-ball") return EnvKind::PaddleBall;
  throw ConfigError("unknown env kind '" + name + "' (goal-grid | paddle-ball)");
}

void EnvSpec::validate() const {
  if (cell < 2) throw ConfigError("env cell size must be >= 2");
  if (grid < 3) throw ConfigError("env grid must be >= 3");
  if (frames < 1) throw ConfigError("env frame count must be >= 1");
  if (max_steps < 1) throw ConfigError("env max_steps must be >= 1");
  if (actions() < 2) throw ConfigError("env needs at least 2 actions");
  if (height() % 2 != 0 || width() % 2 != 0)
    throw ConfigError("frame dims must be even for 2x2 pooling, got " +
                      std::to_string(height()) + "x" + std::to_string(width()));
}

namespace {

void fill_cell(Frame& f, int cell, int gi, int gj, std::uint8_t v) {
  for (int i = 0; i < cell; ++i)
    for (int j = 0; j < cell; ++j) f.at(gi * cell + i, gj * cell + j) = v;
}

}  // namespace

Frame render_goal_grid(const EnvSpec& spec, const GridLogicalState& s) {
  Frame f(spec.height(), spec.width());
  fill_cell(f, spec.cell, spec.grid - 1, spec.grid - 1, kPxGoal);
  fill_cell(f, spec.cell, s.agent_i, s.agent_j, kPxAgent);
  return f;
}

Frame render_paddle_ball(const EnvSpec& spec, const PaddleLogicalState& s) {
  Frame f(spec.height(), spec.width());
  for (int k = 0; k < kPaddleWidth; ++k)
    fill_cell(f, spec.cell, spec.grid - 1, s.paddle_j + k, kPxPaddle);
  fill_cell(f, spec.cell, s.ball_i, s.ball_j, kPxAgent);
  return f;
}

Env::Env(EnvSpec spec) : spec_(spec) { spec_.validate(); }

Frame Env::render() const {
  return spec_.kind == EnvKind::GoalGrid ? render_goal_grid(spec_, grid_)
                                         : render_paddle_ball(spec_, paddle_);
}

const FrameStack& Env::reset(std::uint64_t seed) {
  steps_ = 0;
  done_ = false;
  if (spec_.kind == EnvKind::GoalGrid) {
    grid_ = GridLogicalState{0, 0};
  } else {
    Rng rng(derive_seed(seed, "env.reset"));
    paddle_.ball_i = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec_.grid / 2)));
    paddle_.ball_j = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec_.grid)));
    paddle_.vel_i = 1;
    paddle_.vel_j = 1;
    paddle_.paddle_j = (spec_.grid - kPaddleWidth) / 2;
  }
  stack_ = FrameStack(spec_.frames, render());
  return stack_;
}

Env::StepOutcome Env::step(int action) {
  if (done_) throw UsageError("env.step called on a finished episode; call reset first");
  if (action < 0 || action >= spec_.actions())
    throw InputError("action " + std::to_string(action) + " out of range [0," +
                     std::to_string(spec_.actions()) + ")");
  StepOutcome out;
  const int g = spec_.grid;
  if (spec_.kind == EnvKind::GoalGrid) {
    // 0 up, 1 down, 2 left, 3 right; walls block.
    static constexpr int di[4] = {-1, 1, 0, 0};
    static constexpr int dj[4] = {0, 0, -1, 1};
    const int ni = grid_.agent_i + di[action];
    const int nj = grid_.agent_j + dj[action];
    if (ni >= 0 && ni < g && nj >= 0 && nj < g) {
      grid_.agent_i = ni;
      grid_.agent_j = nj;
    }
    if (grid_.agent_i == g - 1 && grid_.agent_j == g - 1) {
      out.reward = 1.0f;
      out.terminal = true;
    }
  } else {
    // 0 noop, 1 left, 2 right; paddle moves before the ball.
    if (action == 1) paddle_.paddle_j = std::max(0, paddle_.paddle_j - 1);
    if (action == 2) paddle_.paddle_j = std::min(g - kPaddleWidth, paddle_.paddle_j + 1);
    PaddleLogicalState& s = paddle_;
    if (s.ball_j + s.vel_j < 0 || s.ball_j + s.vel_j >= g) s.vel_j = -s.vel_j;
    const int nj = s.ball_j + s.vel_j;
    if (s.ball_i + s.vel_i < 0) s.vel_i = -s.vel_i;
    if (s.ball_i + s.vel_i == g - 1 && nj >= s.paddle_j && nj < s.paddle_j + kPaddleWidth) {
      s.vel_i = -s.vel_i;
      out.reward = 1.0f;
    }
    s.ball_i += s.vel_i;
    s.ball_j = nj;
    if (s.ball_i == g - 1) out.terminal = true;  // past the paddle
  }
  ++steps_;
  if (!out.terminal && steps_ >= spec_.max_steps) {
    out.terminal = true;
    out.truncated = true;
  }
  done_ = out.terminal;
  stack_.push(render());
  return out;
}

}  // namespace iex
