#pragma once

#include <cstdint>
#include <vector>

#include "iex/tensor.hpp"

namespace iex {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  // Applied to every gradient before the moment update.
  float grad_scale = 1.0f;
};

// Bias-corrected Adam over a fixed set of parameter tensors. Moments are
// allocated on the first step and mirror the parameter shapes afterwards.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step() const { return step_; }

  friend void adam_step(const std::vector<LayerParams*>& params, AdamState& st);

 private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// One optimizer step over params' accumulated gradients. Throws NumericError
// with diagnostics if any gradient is non-finite. Does not clear gradients.
void adam_step(const std::vector<LayerParams*>& params, AdamState& st);

}  // namespace iex
