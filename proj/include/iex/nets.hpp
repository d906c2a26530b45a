#pragma once

#include <map>

#include "iex/checkpoint.hpp"
#include "iex/rng.hpp"
#include "iex/tensor.hpp"

namespace iex {

// Gaussian init, std = sqrt(2 / fan_in), zero bias.
inline void init_layer(LayerParams& p, int fan_in, Rng& rng) {
  const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
  for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w[i] = rng.normalf(stddev);
  p.b.set_zero();
}

// Kernel-size rules that keep every layer's geometry exact (no uncovered
// border cells) for even frame sizes.
//
// stride-2 conv: (in - k) % 2 == 0  ->  k = 4 on even input, 3 on odd.
inline int stride2_kernel(int in) { return in % 2 == 0 ? 4 : 3; }
// stride-1 conv feeding a 2x2 pool: output must stay even.
inline int pool_conv_kernel(int in) { return in % 2 == 0 ? 3 : 4; }
// transposed conv hitting an exact target size.
inline int deconv_kernel(int in, int stride, int target) { return target - (in - 1) * stride; }

inline int conv_out(int in, int k, int stride) { return (in - k) / stride + 1; }

// Copy checkpoint blocks into named parameter tensors; every name must be
// present with a matching shape.
void load_named(const std::map<std::string, Tensor>& blocks,
                std::span<const std::pair<std::string, Tensor*>> dst, const std::string& what);

}  // namespace iex
