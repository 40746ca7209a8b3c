#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "voxelcast/core.hpp"

namespace voxelcast::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& s);

/// One value on the tape. `backward` reads this node's grad and accumulates
/// into its parents' grads.
template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Handle to a tape node. Copies share the node.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  /// Constant (no gradient) tensor.
  static Tensor constant(Shape shape, std::vector<T> values) {
    if (values.size() != numel(shape)) throw DimensionError("values do not match shape " + shape_string(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    return Tensor(std::move(n));
  }
  static Tensor zeros(Shape shape) {
    const std::size_t count = numel(shape);
    return constant(std::move(shape), std::vector<T>(count, T(0)));
  }
  /// Leaf that accumulates gradient.
  static Tensor leaf(Shape shape, std::vector<T> values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  /// Empty span when no gradient has reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }
  T item() const {
    if (size() != 1) throw DimensionError("item() on a tensor of shape " + shape_string(shape()));
    return node_->value[0];
  }

  /// Same values, cut from the tape.
  Tensor detach() const { return constant(shape(), node_->value); }

  /// Reverse pass from a scalar: seeds d(self)/d(self) = 1 and runs every
  /// reachable backward function in reverse topological order.
  void backward() const;

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates the output node of an op. Parents are recorded (and `backward`
/// kept) only if some parent needs a gradient.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    for (auto& p : parents) n->parents.push_back(p.node_ptr());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

template <class T>
void Tensor<T>::backward() const {
  if (size() != 1) throw DimensionError("backward() needs a scalar, got " + shape_string(shape()));
  if (!requires_grad()) return;
  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node<T>*> order;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  std::unordered_set<Node<T>*> visited{node_.get()};
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

}  // namespace voxelcast::ad
