#pragma once

#include "iex/tensor.hpp"

namespace iex {

// Per-pixel Bernoulli cross-entropy, averaged over all elements. Predictions
// are clamped to [1e-7, 1-1e-7] inside the loss only; clamped coordinates get
// zero gradient so the loss stays differentiable everywhere.
inline constexpr float kBceClamp = 1e-7f;
float bce_loss(const Tensor& pred, const Tensor& target);
Tensor bce_loss_backward(const Tensor& pred, const Tensor& target);

// Mean squared difference over all elements.
float mse_loss(const Tensor& pred, const Tensor& target);
Tensor mse_loss_backward(const Tensor& pred, const Tensor& target);

// Euclidean norm of u - v.
float l2_distance(const Tensor& u, const Tensor& v);
// Gradients of (gout * l2_distance) accumulated into gu and gv; zero at u == v.
void l2_distance_backward(const Tensor& u, const Tensor& v, float gout, Tensor& gu, Tensor& gv);

}  // namespace iex
