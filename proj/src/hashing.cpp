#include "iex/hashing.hpp"

#include <algorithm>
#include <bit>

#include "iex/autoencoder.hpp"

namespace iex {

Projection Projection::create(std::uint64_t master_seed, int bits, int dim) {
  if (bits < 1 || dim < 1)
    throw ConfigError("projection needs bits >= 1 and dim >= 1, got p=" + std::to_string(bits) +
                      " d=" + std::to_string(dim));
  Projection proj;
  proj.seed = master_seed;
  proj.bits = bits;
  proj.dim = dim;
  proj.a = Tensor({bits, dim});
  Rng rng = stream_rng(master_seed, "projection");
  for (Eigen::Index i = 0; i < proj.a.size(); ++i)
    proj.a[i] = static_cast<float>(rng.normal());
  return proj;
}

std::string HashCode::hex() const {
  static const char* digits = "0123456789abcdef";
  const int n_nibbles = (nbits + 3) / 4;
  std::string out(static_cast<std::size_t>(n_nibbles), '0');
  for (int nib = 0; nib < n_nibbles; ++nib) {
    int v = 0;
    for (int b = 0; b < 4; ++b) {
      const int i = nib * 4 + b;
      if (i < nbits && bit(i)) v |= 1 << b;
    }
    // Leftmost digit holds the highest-numbered nibble.
    out[static_cast<std::size_t>(n_nibbles - 1 - nib)] = digits[v];
  }
  return out;
}

std::size_t HashCodeHasher::operator()(const HashCode& c) const {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(c.nbits);
  for (const std::uint64_t w : c.words) {
    h ^= w;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h);
}

HashCode hash_features(const Projection& proj, const Tensor& z) {
  if (z.rank() != 1 || z.dim(0) != proj.dim)
    throw InputError("hash_features: feature vector " + shape_str(z.shape()) +
                     " vs projection dim " + std::to_string(proj.dim));
  HashCode code;
  code.nbits = proj.bits;
  code.words.assign(static_cast<std::size_t>((proj.bits + 63) / 64), 0);
  Eigen::VectorXf projected = proj.a.mat(proj.bits, proj.dim) * z.vec();
  for (int i = 0; i < proj.bits; ++i)
    if (projected[i] >= 0.0f)  // sgn(0) -> 1
      code.words[static_cast<std::size_t>(i) / 64] |= 1ULL << (i % 64);
  return code;
}

int code_loss(const HashCode& a, const HashCode& b) {
  if (a.nbits != b.nbits)
    throw InputError("code_loss: code lengths differ (" + std::to_string(a.nbits) + " vs " +
                     std::to_string(b.nbits) + ")");
  int dist = 0;
  for (std::size_t w = 0; w < a.words.size(); ++w)
    dist += std::popcount(a.words[w] ^ b.words[w]);
  return dist;
}

void CountTable::dump_csv(std::ostream& os) const {
  std::vector<std::pair<std::string, std::uint64_t>> rows;
  rows.reserve(counts_.size());
  for (const auto& [code, count] : counts_) rows.emplace_back(code.hex(), count);
  std::sort(rows.begin(), rows.end());
  os << "code,count\n";
  for (const auto& [hexcode, count] : rows) os << hexcode << ',' << count << '\n';
}

HashCode frame_code(const Projection& proj, const Autoencoder& ae, const Frame& frame) {
  return hash_features(proj, ae.features(frame_to_tensor(frame)));
}

std::uint64_t count_state(const CountTable& table, const Projection& proj, const Autoencoder& ae,
                          const Frame& frame) {
  return table.query(frame_code(proj, ae, frame));
}

}  // namespace iex
