#include "dlma/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "dlma/error.hpp"

namespace dlma::nn {
namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw Error(ErrorCode::invalid_argument, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : node_(std::make_shared<Node>()) {
  const std::size_t n = shape_numel(shape);
  node_->shape = std::move(shape);
  node_->data.assign(n, fill);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad.assign(n, 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) : node_(std::make_shared<Node>()) {
  if (shape_numel(shape) != data.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "tensor data size " + std::to_string(data.size()) + " does not match shape " + shape_string(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                       std::function<void(Node&)> backward_fn) {
  Tensor t(std::move(shape), std::move(data), false);
  const bool needs = g_grad_enabled &&
                     std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (needs) {
    t.node_->requires_grad = true;
    t.node_->grad.assign(t.node_->data.size(), 0.0);
    for (auto& p : parents) t.node_->parents.push_back(p.node_);
    t.node_->backward_fn = std::move(backward_fn);
  }
  return t;
}

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorCode::dimension_mismatch, "item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

void Tensor::backward() {
  if (numel() != 1) throw Error(ErrorCode::dimension_mismatch, "backward() needs a scalar, got " + shape_string(shape()));
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->backward_fn) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

}  // namespace dlma::nn
