#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iex/rng.hpp"
#include "iex/tensor.hpp"

namespace iex {

// One block of coordinates to verify: live parameter (or input) storage plus
// the analytic gradient computed for it.
struct GradCheckTarget {
  std::string name;
  float* data = nullptr;
  const float* grad = nullptr;
  Eigen::Index count = 0;

  GradCheckTarget(std::string n, Tensor& values, const Tensor& gradient)
      : name(std::move(n)), data(values.data()), grad(gradient.data()), count(values.size()) {}
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "target[index]" of the worst coordinate
};

// Central finite differences (h = 1e-3 on 32-bit floats) against the analytic
// gradient, sampling up to samples_per_target coordinates of each target. The
// loss closure must be deterministic and must not touch the analytic grads.
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradCheckTarget> targets, int samples_per_target,
                           Rng& rng, float h = 1e-3f);

}  // namespace iex
