#include "kalm/num/linear.hpp"

#include <cmath>

#include "kalm/num/ops.hpp"

namespace kalm::num {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return uniform_init({fan_in, fan_out}, fan_in, rng);
}

Tensor small_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = 0.02 * rng.normal();
  return Tensor::from({rows, cols}, std::move(v), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool bias) : weight_(uniform_weight(in, out, rng)) {
  if (bias) bias_ = Tensor::zeros({1, out}, true);
}

Tensor Linear::operator()(const Tensor& x) const {
  auto y = matmul(x, weight_);
  return bias_.defined() ? add_row(y, bias_) : y;
}

void Linear::collect(ParameterList& out, const std::string& prefix, int layer) const {
  out.push_back({prefix + ".weight", layer, weight_});
  if (bias_.defined()) out.push_back({prefix + ".bias", layer, bias_});
}

LayerNorm::LayerNorm(std::size_t width)
    : gain_(Tensor::full({1, width}, 1.0, true)), bias_(Tensor::zeros({1, width}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gain_, bias_); }

void LayerNorm::collect(ParameterList& out, const std::string& prefix, int layer) const {
  out.push_back({prefix + ".gain", layer, gain_});
  out.push_back({prefix + ".bias", layer, bias_});
}

}  // namespace kalm::num
