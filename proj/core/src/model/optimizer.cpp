#include "kalm/model/optimizer.hpp"

#include <cmath>

#include "kalm/errors.hpp"

namespace kalm::model {

RAdam::RAdam(num::ParameterList params, RAdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    if (!p.tensor.is_leaf() || !p.tensor.requires_grad()) throw StateError(p.name + " is not a trainable parameter");
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

double RAdam::rho(std::size_t t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, double(t));
  return rho_inf - 2.0 * double(t) * b2t / (1.0 - b2t);
}

void RAdam::step() {
  ++t_;
  const auto& c = config_;
  const double b1t = std::pow(c.beta1, double(t_));
  const double b2t = std::pow(c.beta2, double(t_));
  const double rho_inf = 2.0 / (1.0 - c.beta2) - 1.0;
  last_rho_ = rho(t_, c.beta2);
  const bool rectified = last_rho_ > 4.0;
  double r = 0.0;
  if (rectified) {
    r = std::sqrt((last_rho_ - 4.0) * (last_rho_ - 2.0) * rho_inf /
                  ((rho_inf - 4.0) * (rho_inf - 2.0) * last_rho_));
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    num::Tensor param = params_[k].tensor;
    auto theta = param.mutable_data();
    if (theta.size() != m_[k].size()) throw StateError("parameter " + params_[k].name + " changed shape");
    const bool has_grad = param.has_grad();
    const auto grad = param.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      if (c.weight_decay != 0.0) theta[i] *= 1.0 - c.lr * c.weight_decay;
      const double m_hat = m[i] / (1.0 - b1t);
      if (rectified) {
        const double adapt = std::sqrt(1.0 - b2t) / (std::sqrt(v[i]) + c.eps);
        theta[i] -= c.lr * r * m_hat * adapt;
      } else {
        theta[i] -= c.lr * m_hat;
      }
    }
  }
}

double clip_grad_norm(const num::ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      num::Tensor t = p.tensor;
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

}  // namespace kalm::model
