#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iex/env.hpp"
#include "iex/rng.hpp"

namespace iex {

// One training atom: the stacked state, the action taken, and what came back.
struct TransitionRecord {
  std::vector<std::uint8_t> state;       // r*m*n bytes, oldest frame first
  std::vector<std::uint8_t> next_frame;  // m*n bytes
  std::uint8_t action = 0;
  float reward = 0.0f;
  bool terminal = false;
  bool truncated = false;
};

struct DatasetHeader {
  int r = 0;
  int m = 0;
  int n = 0;
  int l = 0;
  std::uint64_t count = 0;

  std::size_t state_bytes() const { return static_cast<std::size_t>(r) * m * n; }
  std::size_t frame_bytes() const { return static_cast<std::size_t>(m) * n; }
  std::size_t record_bytes() const { return state_bytes() + frame_bytes() + 1 + 4 + 1; }
};

struct Dataset {
  DatasetHeader header;
  std::vector<TransitionRecord> records;
};

// On-disk layout (little-endian): magic "IEXD", version u32=1, r u8, m u16,
// n u16, l u8, record count u64, then packed records: state bytes, next-frame
// bytes, action u8, reward f32, flags u8 (bit0 terminal, bit1 truncated).
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 22;

void dataset_write(const std::string& path, const DatasetHeader& header,
                   std::span<const TransitionRecord> records);
Dataset dataset_read(const std::string& path);

// Action selector; drawing from rng is allowed.
using PolicyFn = std::function<int(const FrameStack&, Rng&)>;
PolicyFn uniform_policy(int actions);

// Roll episodes until n records are collected, restarting on terminal. With
// probability epsilon a uniform-random action overrides the policy's pick.
// Fully determined by (spec, policy, n, epsilon, seed).
Dataset gen_dataset(const EnvSpec& spec, const PolicyFn& policy, std::int64_t n, double epsilon,
                    std::uint64_t seed);

// Episode record-index ranges [first, last) in file order.
std::vector<std::pair<std::size_t, std::size_t>> episode_ranges(const Dataset& ds);

// Seeded split of episodes into train/validation index lists (by record).
struct EpisodeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
EpisodeSplit split_by_episode(const Dataset& ds, double val_fraction, std::uint64_t seed);

// Mini-batch tensor builders (u8 -> float / 255).
Tensor stack_batch(const Dataset& ds, std::span<const std::size_t> idx);       // (B,r,m,n)
Tensor next_frame_batch(const Dataset& ds, std::span<const std::size_t> idx);  // (B,1,m,n)
Tensor action_batch(const Dataset& ds, std::span<const std::size_t> idx);      // (B,l) one-hot

}  // namespace iex
