#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kalm/num/linear.hpp"
#include "kalm/num/ops.hpp"

namespace kalm::layers {

/// Train/eval switch passed through every forward call.
struct Mode {
  bool train = false;
  double dropout = 0.0;
};

/// Transformer encoder block: pre-norm multi-head self-attention and a
/// ×ffn_mult ReLU feed-forward, each wrapped in a residual connection.
/// No positional encoding; outputs are equivariant to row permutations.
class EncoderBlock {
 public:
  struct Output {
    num::Tensor y;
    /// Per-head m×m attention (rows are queries), before dropout.
    std::vector<num::Tensor> attention;
  };

  EncoderBlock() = default;
  EncoderBlock(std::size_t d_model, std::size_t n_heads, std::size_t ffn_mult, std::uint64_t dropout_seed,
               num::Rng& rng);

  Output forward(const num::Tensor& x, const Mode& mode) const;
  void collect(num::ParameterList& out, const std::string& prefix, int layer) const;
  std::size_t heads() const { return n_heads_; }

 private:
  std::size_t d_model_ = 0, n_heads_ = 1;
  num::LayerNorm norm_attn_, norm_ffn_;
  num::Linear q_, k_, v_, o_;  // k_ has no bias: it would shift every score of a query equally
  num::Linear ffn_in_, ffn_out_;
  mutable num::DropoutStream dropout_;
};

}  // namespace kalm::layers
