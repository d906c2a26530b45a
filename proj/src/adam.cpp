#include "iex/adam.hpp"

#include <cmath>

namespace iex {
namespace {

void moment_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, const AdamConfig& c,
                   float bc1, float bc2, const char* what, std::size_t idx) {
  if (!grad.all_finite())
    throw NumericError("adam_step: non-finite gradient in " + std::string(what) + " tensor #" +
                       std::to_string(idx) + " " + shape_str(grad.shape()));
  const auto g = grad.array() * c.grad_scale;
  m.array() = c.beta1 * m.array() + (1.0f - c.beta1) * g;
  v.array() = c.beta2 * v.array() + (1.0f - c.beta2) * g.square();
  param.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
}

}  // namespace

void adam_step(const std::vector<LayerParams*>& params, AdamState& st) {
  const std::size_t n = params.size() * 2;
  if (st.m_.empty()) {
    st.m_.reserve(n);
    st.v_.reserve(n);
    for (const LayerParams* p : params) {
      st.m_.push_back(Tensor(p->w.shape()));
      st.m_.push_back(Tensor(p->b.shape()));
      st.v_.push_back(Tensor(p->w.shape()));
      st.v_.push_back(Tensor(p->b.shape()));
    }
  }
  if (st.m_.size() != n)
    throw ConfigError("adam_step: optimizer built for " + std::to_string(st.m_.size() / 2) +
                      " parameter sets, got " + std::to_string(params.size()));
  ++st.step_;
  const AdamConfig& c = st.cfg_;
  const float bc1 = 1.0f - std::pow(c.beta1, static_cast<float>(st.step_));
  const float bc2 = 1.0f - std::pow(c.beta2, static_cast<float>(st.step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    LayerParams& p = *params[i];
    if (!p.w.same_shape(st.m_[2 * i]) || !p.b.same_shape(st.m_[2 * i + 1]))
      throw ConfigError("adam_step: parameter shapes changed under the optimizer (set #" +
                        std::to_string(i) + ")");
    moment_update(p.w, p.gw, st.m_[2 * i], st.v_[2 * i], c, bc1, bc2, "weight", i);
    if (p.b.size() > 0)
      moment_update(p.b, p.gb, st.m_[2 * i + 1], st.v_[2 * i + 1], c, bc1, bc2, "bias", i);
  }
}

}  // namespace iex
