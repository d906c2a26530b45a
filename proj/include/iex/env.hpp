#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iex/rng.hpp"
#include "iex/tensor.hpp"

namespace iex {

// Pixel intensity palette shared by every environment renderer.
inline constexpr std::uint8_t kPxBackground = 0;
inline constexpr std::uint8_t kPxWall = 77;
inline constexpr std::uint8_t kPxGoal = 153;
inline constexpr std::uint8_t kPxAgent = 255;  // also the ball
inline constexpr std::uint8_t kPxPaddle = 204;

// One grayscale frame, row-major u8 intensities.
struct Frame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> px;

  Frame() = default;
  Frame(int h, int w) : height(h), width(w), px(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int i, int j) { return px[static_cast<std::size_t>(i) * width + j]; }
  std::uint8_t at(int i, int j) const { return px[static_cast<std::size_t>(i) * width + j]; }
  bool operator==(const Frame&) const = default;
};

// Float view in [0,1], shape (1,m,n).
Tensor frame_to_tensor(const Frame& f);

// The r most recent frames, oldest first.
class FrameStack {
 public:
  FrameStack() = default;
  FrameStack(int r, Frame initial);

  void push(Frame f);  // drops the oldest
  int count() const { return static_cast<int>(frames_.size()); }
  const Frame& frame(int idx) const { return frames_[static_cast<std::size_t>(idx)]; }
  const Frame& last() const { return frames_.back(); }
  const std::vector<Frame>& frames() const { return frames_; }

  // (r, m, n) floats in [0,1].
  Tensor to_tensor() const;
  std::vector<std::uint8_t> bytes() const;  // concatenated r*m*n
  static FrameStack from_bytes(const std::vector<std::uint8_t>& data, int r, int m, int n);

 private:
  std::vector<Frame> frames_;
};

enum class EnvKind { GoalGrid, PaddleBall };

std::string env_kind_name(EnvKind k);
EnvKind env_kind_from_name(const std::string& name);

struct EnvSpec {
  EnvKind kind = EnvKind::GoalGrid;
  int grid = 15;      // G cells per side
  int cell = 2;       // pixels per cell
  int frames = 4;     // r
  int max_steps = 300;

  int height() const { return grid * cell; }
  int width() const { return grid * cell; }
  int actions() const { return kind == EnvKind::GoalGrid ? 4 : 3; }
  void validate() const;

  static EnvSpec goal_grid() { return EnvSpec{}; }
  static EnvSpec paddle_ball() { return EnvSpec{EnvKind::PaddleBall, 12, 2, 4, 200}; }
};

struct GridLogicalState {
  int agent_i = 0;
  int agent_j = 0;
};

struct PaddleLogicalState {
  int ball_i = 0;
  int ball_j = 0;
  int vel_i = 1;
  int vel_j = 1;
  int paddle_j = 0;  // leftmost paddle cell
};

inline constexpr int kPaddleWidth = 3;

Frame render_goal_grid(const EnvSpec& spec, const GridLogicalState& s);
Frame render_paddle_ball(const EnvSpec& spec, const PaddleLogicalState& s);

// Deterministic toy MDP with pixel observations. Goal-grid: actions
// {up,down,left,right} move one cell, walls block, +1 and terminal at the
// far-corner goal. Paddle-ball: actions {noop,left,right}, the ball bounces
// off walls and paddle (+1 per hit) and the episode ends when it reaches the
// bottom row unprotected. Hitting max_steps terminates with the truncated
// flag set so learners can bootstrap through it.
class Env {
 public:
  explicit Env(EnvSpec spec);

  const FrameStack& reset(std::uint64_t seed);

  struct StepOutcome {
    float reward = 0.0f;
    bool terminal = false;
    bool truncated = false;
  };
  StepOutcome step(int action);

  const EnvSpec& spec() const { return spec_; }
  const FrameStack& stack() const { return stack_; }
  bool done() const { return done_; }
  int steps() const { return steps_; }

  const GridLogicalState& grid_state() const { return grid_; }
  const PaddleLogicalState& paddle_state() const { return paddle_; }

 private:
  Frame render() const;

  EnvSpec spec_;
  FrameStack stack_;
  GridLogicalState grid_;
  PaddleLogicalState paddle_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace iex
