#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kalm/num/random.hpp"
#include "kalm/num/tensor.hpp"

namespace kalm::num {

/// A trainable tensor with its checkpoint name and owning layer (-1 for none).
struct NamedParameter {
  std::string name;
  int layer = -1;
  Tensor tensor;
};
using ParameterList = std::vector<NamedParameter>;

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) trainable matrix.
Tensor uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);
/// Same distribution with an explicit shape.
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);
/// 0.02 * standard normal trainable matrix.
Tensor small_normal(std::size_t rows, std::size_t cols, Rng& rng);

/// y = x W + b with W: in×out, b: 1×out.
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  Tensor operator()(const Tensor& x) const;
  std::size_t in_features() const { return weight_.rows(); }
  std::size_t out_features() const { return weight_.cols(); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  void collect(ParameterList& out, const std::string& prefix, int layer) const;

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Row-wise layer normalization with trainable gain and bias.
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);
  Tensor operator()(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix, int layer) const;

 private:
  Tensor gain_;
  Tensor bias_;
};

}  // namespace kalm::num
