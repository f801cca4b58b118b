#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kalm::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
struct Access;
}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode gradient tracking.
///
/// A Tensor is a cheap handle onto a node of the computation graph. Values of
/// non-leaf tensors are fixed once the op that produced them returns. Leaf
/// tensors created with requires_grad are parameters: their values may be
/// edited in place (by an optimizer) and their gradients accumulate across
/// backward passes until zero_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);
  /// 1×n matrix.
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  /// Only valid on leaves; non-leaf values are immutable.
  std::span<double> mutable_data();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;

  bool requires_grad() const;
  bool is_leaf() const;
  void zero_grad();

  double item() const;
  double at(std::size_t r, std::size_t c) const;
  std::vector<double> to_vector() const;

  /// Identity of the underlying node; stable for the lifetime of the tensor.
  std::uint64_t id() const;

  /// Value copy detached from the graph.
  Tensor detach(bool requires_grad = false) const;

 private:
  friend struct detail::Access;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Gradients of the graph leaves reached by a backward pass, keyed by Tensor::id().
using GradientMap = std::map<std::uint64_t, std::vector<double>>;

/// Reverse-mode sweep from a scalar loss. Visits every node reachable from
/// `loss` exactly once, in reverse construction order, accumulating into the
/// gradients of leaves that require them. Intermediate nodes are released
/// afterwards; a second call on the same graph raises StaleTapeError.
GradientMap backward(const Tensor& loss);

}  // namespace kalm::num
