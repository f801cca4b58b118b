#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "kalm/num/tensor.hpp"

namespace kalm::num::detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool consumed = false;
  bool leaf = true;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;

  double* ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad.data();
  }
};

std::uint64_t next_seq();

struct Access {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> value, bool requires_grad);

/// Result node of an op. `backward` is only retained when some parent needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

}  // namespace kalm::num::detail
