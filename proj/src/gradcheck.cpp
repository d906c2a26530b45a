#include "iex/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace iex {

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradCheckTarget> targets, int samples_per_target,
                           Rng& rng, float h) {
  GradCheckReport rep;
  for (const GradCheckTarget& t : targets) {
    const Eigen::Index n = t.count;
    if (n == 0) continue;
    // All coordinates when the block is small, a random sample otherwise.
    std::vector<Eigen::Index> idx;
    if (n <= samples_per_target) {
      idx.resize(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    } else {
      idx.reserve(static_cast<std::size_t>(samples_per_target));
      for (int i = 0; i < samples_per_target; ++i)
        idx.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    }
    for (const Eigen::Index i : idx) {
      const float saved = t.data[i];
      t.data[i] = saved + h;
      const double up = loss();
      t.data[i] = saved - h;
      const double down = loss();
      t.data[i] = saved;
      const double fd = (up - down) / (2.0 * static_cast<double>(h));
      const double an = static_cast<double>(t.grad[i]);
      // Floor keeps float roundoff in the FD quotient from swamping
      // coordinates whose gradient is genuinely tiny.
      const double denom = std::max({std::abs(an), std::abs(fd), 0.02});
      const double rel = std::abs(an - fd) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = t.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace iex
