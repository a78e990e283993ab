#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dlma::nn {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_string(const Shape& s);

// One vertex of the recorded computation graph.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized like data when requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Adds this node's grad into its parents' grads. Empty for leaves.
  std::function<void(Node&)> backward_fn;
};

/// Reference-semantics handle on a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  /// Result of an operation: gradients are required iff any parent requires them.
  static Tensor from_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                        std::function<void(Node&)> backward_fn);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  /// Value of a one-element tensor.
  double item() const;

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  /// calls; intermediate gradients are recomputed each time.
  void backward();
  void zero_grad();

  /// Same values, cut from the graph, no gradient.
  Tensor detach() const;

  Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// While alive, operations on this thread record no graph (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

}  // namespace dlma::nn
