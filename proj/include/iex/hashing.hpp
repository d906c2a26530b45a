#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "iex/env.hpp"
#include "iex/rng.hpp"
#include "iex/tensor.hpp"

namespace iex {

class Autoencoder;

// Fixed random sign-projection. Created once per experiment from the master
// seed and persisted with checkpoints; counts only make sense under one A.
struct Projection {
  std::uint64_t seed = 0;
  int bits = 0;  // p
  int dim = 0;   // d
  Tensor a;      // (p, d), i.i.d. N(0,1)

  static Projection create(std::uint64_t master_seed, int bits, int dim);
};

struct HashCode {
  int nbits = 0;
  std::vector<std::uint64_t> words;  // bit i lives in words[i/64] at position i%64

  bool bit(int i) const { return (words[static_cast<std::size_t>(i) / 64] >> (i % 64)) & 1; }
  bool operator==(const HashCode&) const = default;
  std::string hex() const;  // big-endian nibbles, (nbits+3)/4 digits
};

struct HashCodeHasher {
  std::size_t operator()(const HashCode& c) const;
};

// bit_i = 1 iff (A z)_i >= 0; sgn(0) maps to 1.
HashCode hash_features(const Projection& proj, const Tensor& z);

// Hamming distance.
int code_loss(const HashCode& a, const HashCode& b);

// Visit counts keyed by hash code. Queries never mutate; the sum of all
// counts always equals the number of inserts.
class CountTable {
 public:
  std::uint64_t insert(const HashCode& code) {
    ++total_;
    return ++counts_[code];
  }
  std::uint64_t query(const HashCode& code) const {
    const auto it = counts_.find(code);
    return it == counts_.end() ? 0 : it->second;
  }
  std::uint64_t total() const { return total_; }
  std::size_t distinct() const { return counts_.size(); }

  // CSV (hex code, count), sorted by hex for deterministic output.
  void dump_csv(std::ostream& os) const;

 private:
  std::unordered_map<HashCode, std::uint64_t, HashCodeHasher> counts_;
  std::uint64_t total_ = 0;
};

// Full counting pipeline for one frame: z = phi(frame), c = sgn(Az),
// psi = H(c). Pure query; never inserts.
std::uint64_t count_state(const CountTable& table, const Projection& proj, const Autoencoder& ae,
                          const Frame& frame);
HashCode frame_code(const Projection& proj, const Autoencoder& ae, const Frame& frame);

}  // namespace iex
