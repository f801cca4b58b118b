#include "kalm/num/gradcheck.hpp"

#include <cmath>

#include "kalm/errors.hpp"

namespace kalm::num {

FdReport fd_check(const std::function<Tensor()>& f, std::span<const Tensor> params, double eps) {
  std::vector<Tensor> ps(params.begin(), params.end());
  for (auto& p : ps) {
    if (!p.is_leaf() || !p.requires_grad()) throw InputError("fd_check parameters must be trainable leaves");
    p.zero_grad();
  }
  const Tensor loss = f();
  const double base = loss.item();
  if (f().item() != base) throw CheckInvalidError("function is not deterministic; disable dropout and fix seeds");
  backward(loss);

  FdReport report;
  report.per_param.assign(ps.size(), 0.0);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto values = ps[k].mutable_data();
    const std::vector<double> analytic = ps[k].has_grad() ? std::vector<double>(ps[k].grad().begin(), ps[k].grad().end())
                                                          : std::vector<double>(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double rel = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-8);
      ++report.entries_checked;
      report.per_param[k] = std::max(report.per_param[k], rel);
      if (rel > report.max_rel_error || report.entries_checked == 1) {
        report.max_rel_error = rel;
        report.worst_param = k;
        report.worst_index = i;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace kalm::num
