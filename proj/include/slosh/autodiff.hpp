#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace slosh {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Parameter {
  std::string name;
  Matrix value;
};

/// Named, ordered collection of trainable tensors.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix value);
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool operator==(const ParamStore& o) const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Append-only reverse-mode record. Nodes only reference earlier nodes, so
/// a single reverse sweep computes all gradients. Tapes are single-owner.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  /// Leaf that accumulates a gradient (when the tape records gradients).
  Var variable(Matrix value);
  /// Leaf bound to store[index]; one node per parameter per tape.
  Var param(const ParamStore& store, std::size_t index);
  Var param(const ParamStore& store, const std::string& name) { return param(store, store.index_of(name)); }

  /// Records a node. `backward` is dropped when no input needs a gradient.
  Var push(Matrix value, std::vector<int> inputs, Backward backward, const char* op);

  /// Reverse sweep from a 1×1 root. Throws InputError for a non-scalar root.
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient accumulator, allocated as zeros on first access.
  Matrix& grad(int id);
  const Matrix* grad_if_any(int id) const;

  /// Gradients for every parameter of `store` (zeros for unused ones).
  std::vector<Matrix> param_grads(const ParamStore& store) const;

  std::size_t size() const { return nodes_.size(); }
  const char* op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }
  const std::vector<int>& inputs(int id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    std::vector<int> inputs;
    const char* op = "";
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const ParamStore*, std::unordered_map<std::size_t, int>> param_nodes_;
  bool grad_enabled_;
};

namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var matmul(Var a, Var b);
/// a (n×c) + bias (1×c) broadcast over rows.
Var add_bias(Var a, Var bias);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
/// out[k] = a[index[k]]
Var gather_rows(Var a, std::vector<int> index);
/// out[index[k]] += a[k], out has `rows` rows.
Var scatter_sum_rows(Var a, std::vector<int> index, Eigen::Index rows);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
/// a^gamma for a > 0, else 0. The derivative is evaluated at max(a, floor)
/// so it stays finite near 0.
Var pow_guarded(Var a, double gamma, double floor = 1e-9);
/// Per-row Euclidean norm: (n×c) → (n×1).
Var row_norm(Var a);
Var sum(Var a);
/// Column means: (n×c) → (1×c).
Var mean_rows(Var a);
/// (1×c) → (n×c).
Var broadcast_rows(Var a, Eigen::Index rows);
/// Elementwise product with a constant matrix of the same shape.
Var mul_const(Var a, const Matrix& c);

}  // namespace ad
}  // namespace slosh
