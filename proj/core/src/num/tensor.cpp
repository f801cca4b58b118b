#include "kalm/num/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "kalm/errors.hpp"
#include "node.hpp"

namespace kalm::num {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> value, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (shape_numel(shape) != value.size()) {
    throw DimensionError("data length " + std::to_string(value.size()) + " does not match shape " +
                         shape_string(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->seq = next_seq();
  return n;
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->seq = next_seq();
  n->leaf = false;
  bool needs = false;
  for (const auto& p : parents) needs = needs || Access::node(p)->requires_grad;
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(Access::node(p));
    n->backward_fn = std::move(backward);
  }
  return Access::wrap(std::move(n));
}

}  // namespace detail

using detail::Access;
using detail::Node;

namespace {
const Node& need(const std::shared_ptr<Node>& n) {
  if (!n) throw StateError("use of an undefined tensor");
  return *n;
}
}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(detail::make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(detail::make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from({1, n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return need(node_).shape; }
std::size_t Tensor::numel() const { return need(node_).value.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("rows() on tensor of shape " + shape_string(s));
  return s[0];
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.size() != 2) throw DimensionError("cols() on tensor of shape " + shape_string(s));
  return s[1];
}

std::span<const double> Tensor::data() const { return need(node_).value; }

std::span<double> Tensor::mutable_data() {
  need(node_);
  if (!node_->leaf) throw StateError("values of non-leaf tensors are immutable");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return need(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  need(node_);
  node_->ensure_grad();
  return node_->grad;
}

bool Tensor::has_grad() const { return !need(node_).grad.empty(); }
bool Tensor::requires_grad() const { return need(node_).requires_grad; }
bool Tensor::is_leaf() const { return need(node_).leaf; }

void Tensor::zero_grad() {
  need(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  const auto& n = need(node_);
  if (n.value.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(n.shape));
  return n.value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = need(node_);
  if (n.shape.size() != 2 || r >= n.shape[0] || c >= n.shape[1]) {
    throw DimensionError("index (" + std::to_string(r) + "," + std::to_string(c) + ") out of range for " +
                         shape_string(n.shape));
  }
  return n.value[r * n.shape[1] + c];
}

std::vector<double> Tensor::to_vector() const { return need(node_).value; }

std::uint64_t Tensor::id() const { return need(node_).seq; }

Tensor Tensor::detach(bool requires_grad) const {
  const auto& n = need(node_);
  return from(n.shape, n.value, requires_grad);
}

GradientMap backward(const Tensor& loss) {
  const auto& root = Access::node(loss);
  need(root);
  if (root->value.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_string(root->shape));
  }
  if (root->consumed) throw StaleTapeError("backward() called twice on the same graph; run forward again");

  // Collect reachable nodes that carry gradients.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n->leaf && n->consumed) throw StaleTapeError("graph was already consumed by an earlier backward()");
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  // Construction order is a topological order.
  std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });

  GradientMap grads;
  if (!root->requires_grad) return grads;
  root->ensure_grad()[0] += 1.0;
  for (Node* n : order) {
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
  // Parent links are moved here so nodes in `order` outlive this loop.
  std::vector<std::shared_ptr<Node>> released;
  for (Node* n : order) {
    if (n->leaf) {
      grads.emplace(n->seq, n->grad);
    } else {
      n->consumed = true;
      n->backward_fn = nullptr;
      for (auto& p : n->parents) released.push_back(std::move(p));
      n->parents.clear();
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
  return grads;
}

}  // namespace kalm::num
