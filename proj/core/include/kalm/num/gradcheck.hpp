#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kalm/num/tensor.hpp"

namespace kalm::num {

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Max relative error per parameter tensor, in input order.
  std::vector<double> per_param;
};

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences, per entry: |analytic − numeric| / (|analytic| + 1e-8).
/// Throws CheckInvalidError when two evaluations at the same point differ.
FdReport fd_check(const std::function<Tensor()>& f, std::span<const Tensor> params, double eps = 1e-5);

}  // namespace kalm::num
