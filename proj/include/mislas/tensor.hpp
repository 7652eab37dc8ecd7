#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mislas/errors.hpp"

namespace mislas {

using Index = Eigen::Index;
/// Row-major dense storage shared by tensors, datasets and parameter blobs.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Tensors are rank <= 2. A length-K vector is stored as 1 x K; a scalar is 1 x 1.
using Shape = std::array<Index, 2>;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until the first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents that require grad.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return parents.empty(); }
  void accumulate(const Matrix& g);
};

}  // namespace detail

/// Dense f64 array with optional gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage and gradient.
/// Operations on tensors that require grad record their parents so that
/// backward() can replay them in reverse topological order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }
  /// Detached leaf copy of the value with the same requires_grad flag.
  Tensor clone() const;

  bool defined() const { return node_ != nullptr; }
  Shape shape() const { return {node().value.rows(), node().value.cols()}; }
  Index rows() const { return node().value.rows(); }
  Index cols() const { return node().value.cols(); }
  Index size() const { return node().value.size(); }

  const Matrix& value() const { return node().value; }
  /// Direct write access for optimizers and checkpoint loading. Must not be
  /// used on tensors that are part of a pending graph.
  Matrix& mutable_value() { return node().value; }
  double item() const;

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool on);

  bool has_grad() const { return node().grad.size() != 0; }
  /// Gradient buffer; zeros of matching shape when nothing accumulated yet.
  Matrix grad() const;
  void zero_grad();

  const char* op_name() const { return node().op; }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

  /// Internal: build a recorded result node.
  static Tensor from_op(Matrix value, const char* op, std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;
};

/// Topologically ordered record of the operations reachable from a root.
///
/// Every node appears after all of its inputs. backward() walks the record
/// in reverse and visits each node exactly once.
class Graph {
 public:
  static Graph record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  std::vector<std::string> op_names() const;
  /// Position of a tensor's node in the record, or -1 when absent.
  long position(const Tensor& t) const;

  void backward() const;

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Accumulates dLoss/dT into every requires-grad leaf reachable from `loss`.
/// Throws ContractError when `loss` is not 1 x 1.
void backward(const Tensor& loss);

}  // namespace mislas
