#include "mislas/tensor.hpp"

#include <unordered_set>
#include <utility>

namespace mislas {

namespace detail {

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

}  // namespace detail

namespace {

void check_finite(const Matrix& m, const char* op) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value) {
  Tensor t = constant(std::move(value));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t = constant(node().value);
  t.node_->requires_grad = node().requires_grad;
  return t;
}

detail::Node& Tensor::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() requires a single-element tensor");
  return node().value(0, 0);
}

void Tensor::set_requires_grad(bool on) {
  if (!node().is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  node().requires_grad = on;
}

Matrix Tensor::grad() const {
  const auto& n = node();
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tensor::zero_grad() { node().grad.resize(0, 0); }

Tensor Tensor::from_op(Matrix value, const char* op, std::vector<Tensor> inputs,
                       std::function<void(detail::Node&)> backward) {
  check_finite(value, op);
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->op = op;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node_);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

Graph Graph::record(const Tensor& root) {
  Graph g;
  if (!root.defined() || !root.requires_grad()) return g;

  // Iterative post-order DFS; only nodes that require grad are recorded.
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.handle(), 0);
  seen.insert(root.handle().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      auto parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) {
        stack.emplace_back(std::move(parent), 0);
      }
      continue;
    }
    g.nodes_.push_back(node);
    stack.pop_back();
  }
  return g;
}

std::vector<std::string> Graph::op_names() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.emplace_back(n->op);
  return out;
}

long Graph::position(const Tensor& t) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] == t.handle()) return static_cast<long>(i);
  }
  return -1;
}

void Graph::backward() const {
  if (nodes_.empty()) return;
  // Interior buffers hold only this pass; leaves keep accumulating.
  for (const auto& n : nodes_) {
    if (!n->is_leaf()) n->grad.resize(0, 0);
  }
  auto& root = *nodes_.back();
  root.accumulate(Matrix::Ones(root.value.rows(), root.value.cols()));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& n = **it;
    if (n.is_leaf() || n.grad.size() == 0) continue;
    n.backward(n);
  }
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward() requires a scalar loss");
  }
  Graph::record(loss).backward();
}

}  // namespace mislas
