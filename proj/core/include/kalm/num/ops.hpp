#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kalm/num/tensor.hpp"

namespace kalm::num {

// Shape conventions: matrices are rank 2, row vectors are 1×n. Every op
// checks its shapes and throws DimensionError on mismatch.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x (m×n) + row (1×n) broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& row);
/// x (m×n) scaled row-wise by col (m×1).
Tensor mul_col(const Tensor& x, const Tensor& col);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

Tensor elu(const Tensor& x, double alpha = 1.0);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);

/// Max-subtracted softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);

/// Normalizes each row, then applies gain and bias (both 1×n).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Counter-based mask source. Each dropout call draws a fresh mask from
/// (seed, call index, element index), so a run is reproducible from its seed.
class DropoutStream {
 public:
  explicit DropoutStream(std::uint64_t seed = 0) : seed_(seed) {}
  std::uint64_t next_call() { return calls_++; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t calls() const { return calls_; }
  void reset(std::uint64_t seed) {
    seed_ = seed;
    calls_ = 0;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;
};

/// Inverted dropout; identity when !train or p == 0.
Tensor dropout(const Tensor& x, double p, DropoutStream& stream, bool train);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

/// out[e] = x[index[e]].
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
/// out[index[e]] += x[e], out has n_out rows.
Tensor scatter_add_rows(const Tensor& x, std::span<const std::size_t> index, std::size_t n_out);
/// Softmax of an E×1 column within groups sharing the same segment id.
Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segment, std::size_t n_segments);

Tensor mean_rows(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);
Tensor pick(const Tensor& x, std::size_t r, std::size_t c);
/// -log_probs[0, label] for a 1×C row of log-probabilities.
Tensor nll(const Tensor& log_probs, std::size_t label);
Tensor reshape(const Tensor& x, Shape shape);

}  // namespace kalm::num
