#pragma once

#include <cstddef>
#include <vector>

#include "kalm/num/linear.hpp"

namespace kalm::model {

struct RAdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Rectified Adam. While the approximated SMA length rho_t is at most 4 the
/// step is plain bias-corrected momentum; afterwards the adaptive step is
/// scaled by the variance rectification term r_t. Weight decay is decoupled:
/// theta <- theta * (1 - lr * weight_decay) before the update.
class RAdam {
 public:
  RAdam(num::ParameterList params, RAdamConfig config);

  /// One update from the gradients currently held by the parameters.
  void step();
  std::size_t steps() const { return t_; }
  /// rho_t of the most recent step.
  double last_rho() const { return last_rho_; }
  bool last_step_rectified() const { return last_rho_ > 4.0; }
  static double rho(std::size_t t, double beta2);

  const RAdamConfig& config() const { return config_; }

 private:
  num::ParameterList params_;
  RAdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  double last_rho_ = 0.0;
};

/// Scales all gradients so their joint L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(const num::ParameterList& params, double max_norm);

}  // namespace kalm::model
