#include "kalm/layers/encoder.hpp"

#include <cmath>

#include "kalm/errors.hpp"

namespace kalm::layers {

using namespace kalm::num;

EncoderBlock::EncoderBlock(std::size_t d_model, std::size_t n_heads, std::size_t ffn_mult, std::uint64_t dropout_seed,
                           Rng& rng)
    : d_model_(d_model),
      n_heads_(n_heads),
      norm_attn_(d_model),
      norm_ffn_(d_model),
      q_(d_model, d_model, rng),
      k_(d_model, d_model, rng, /*bias=*/false),
      v_(d_model, d_model, rng),
      o_(d_model, d_model, rng),
      ffn_in_(d_model, d_model * ffn_mult, rng),
      ffn_out_(d_model * ffn_mult, d_model, rng),
      dropout_(dropout_seed) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw DimensionError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(n_heads) +
                         " heads");
  }
}

EncoderBlock::Output EncoderBlock::forward(const Tensor& x, const Mode& mode) const {
  if (x.rank() != 2 || x.cols() != d_model_) {
    throw DimensionError("encoder block expects ?x" + std::to_string(d_model_) + ", got " + shape_string(x.shape()));
  }
  Output out;
  const std::size_t dh = d_model_ / n_heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor h = norm_attn_(x);
  const Tensor q = q_(h), k = k_(h), v = v_(h);
  std::vector<Tensor> heads;
  heads.reserve(n_heads_);
  for (std::size_t i = 0; i < n_heads_; ++i) {
    const auto c0 = i * dh, c1 = c0 + dh;
    const Tensor scores = scale(matmul(slice_cols(q, c0, c1), transpose(slice_cols(k, c0, c1))), inv_sqrt);
    const Tensor attn = softmax(scores, -1);
    out.attention.push_back(attn);
    heads.push_back(matmul(dropout(attn, mode.dropout, dropout_, mode.train), slice_cols(v, c0, c1)));
  }
  const Tensor attended = o_(n_heads_ == 1 ? heads.front() : concat_cols(heads));
  const Tensor x1 = x + dropout(attended, mode.dropout, dropout_, mode.train);
  const Tensor ff = ffn_out_(relu(ffn_in_(norm_ffn_(x1))));
  out.y = x1 + dropout(ff, mode.dropout, dropout_, mode.train);
  return out;
}

void EncoderBlock::collect(ParameterList& out, const std::string& prefix, int layer) const {
  norm_attn_.collect(out, prefix + ".norm_attn", layer);
  q_.collect(out, prefix + ".q", layer);
  k_.collect(out, prefix + ".k", layer);
  v_.collect(out, prefix + ".v", layer);
  o_.collect(out, prefix + ".o", layer);
  norm_ffn_.collect(out, prefix + ".norm_ffn", layer);
  ffn_in_.collect(out, prefix + ".ffn_in", layer);
  ffn_out_.collect(out, prefix + ".ffn_out", layer);
}

}  // namespace kalm::layers
