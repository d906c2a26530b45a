#include "iex/loss.hpp"

#include <cmath>

namespace iex {
namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  if (a.size() == 0) throw ConfigError(std::string(op) + ": empty tensors");
}

}  // namespace

float bce_loss(const Tensor& pred, const Tensor& target) {
  check_same(pred, target, "bce_loss");
  const auto p = pred.array().min(1.0f - kBceClamp).max(kBceClamp);
  const auto t = target.array();
  const float sum = -(t * p.log() + (1.0f - t) * (1.0f - p).log()).sum();
  return sum / static_cast<float>(pred.size());
}

Tensor bce_loss_backward(const Tensor& pred, const Tensor& target) {
  check_same(pred, target, "bce_loss");
  Tensor g(pred.shape());
  const float inv_n = 1.0f / static_cast<float>(pred.size());
  const auto p = pred.array().min(1.0f - kBceClamp).max(kBceClamp);
  const auto t = target.array();
  const auto inside = (pred.array() >= kBceClamp) && (pred.array() <= 1.0f - kBceClamp);
  g.array() = inside.select(-(t / p - (1.0f - t) / (1.0f - p)) * inv_n, 0.0f);
  return g;
}

float mse_loss(const Tensor& pred, const Tensor& target) {
  check_same(pred, target, "mse_loss");
  return (pred.array() - target.array()).square().sum() / static_cast<float>(pred.size());
}

Tensor mse_loss_backward(const Tensor& pred, const Tensor& target) {
  check_same(pred, target, "mse_loss");
  Tensor g(pred.shape());
  g.array() = 2.0f * (pred.array() - target.array()) / static_cast<float>(pred.size());
  return g;
}

float l2_distance(const Tensor& u, const Tensor& v) {
  check_same(u, v, "l2_distance");
  return std::sqrt((u.array() - v.array()).square().sum());
}

void l2_distance_backward(const Tensor& u, const Tensor& v, float gout, Tensor& gu, Tensor& gv) {
  check_same(u, v, "l2_distance");
  check_same(u, gu, "l2_distance_backward");
  check_same(v, gv, "l2_distance_backward");
  const float dist = l2_distance(u, v);
  if (dist <= 0.0f) return;
  const float scale = gout / dist;
  gu.array() += scale * (u.array() - v.array());
  gv.array() -= scale * (u.array() - v.array());
}

}  // namespace iex
