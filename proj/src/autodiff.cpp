#include "slosh/autodiff.hpp"

#include <cmath>
#include <cstring>

#include "slosh/errors.hpp"

namespace slosh {

std::size_t ParamStore::add(std::string name, Matrix value) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  by_name_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

bool ParamStore::operator==(const ParamStore& o) const {
  if (params_.size() != o.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = o.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
    if (a.value.size() && std::memcmp(a.value.data(), b.value.data(), sizeof(double) * a.value.size()) != 0)
      return false;
  }
  return true;
}

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, "const", false});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, "var", grad_enabled_});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  auto& cache = param_nodes_[&store];
  if (auto it = cache.find(index); it != cache.end()) return {this, it->second};
  Var v = variable(store[index].value);
  nodes_.back().op = "param";
  cache.emplace(index, v.id);
  return v;
}

Var Tape::push(Matrix value, std::vector<int> inputs, Backward backward, const char* op) {
  bool needs = false;
  if (grad_enabled_)
    for (int i : inputs) needs = needs || nodes_[static_cast<std::size_t>(i)].needs_grad;
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.op = op;
  n.needs_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

const Matrix* Tape::grad_if_any(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.grad.size() ? &n.grad : nullptr;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw InputError("backward: root belongs to another tape");
  const Matrix& rv = value(root.id);
  if (rv.rows() != 1 || rv.cols() != 1) throw InputError("backward: root must be a 1x1 scalar");
  if (!grad_enabled_) throw InputError("backward: tape was recorded without gradients");
  grad(root.id)(0, 0) += 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
  }
}

std::vector<Matrix> Tape::param_grads(const ParamStore& store) const {
  std::vector<Matrix> out(store.size());
  const auto it = param_nodes_.find(&store);
  for (std::size_t i = 0; i < store.size(); ++i) {
    out[i] = Matrix::Zero(store[i].value.rows(), store[i].value.cols());
    if (it == param_nodes_.end()) continue;
    if (auto jt = it->second.find(i); jt != it->second.end())
      if (const Matrix* g = grad_if_any(jt->second)) out[i] = *g;
  }
  return out;
}

namespace ad {
namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
}

void accumulate(Tape& t, int id, const Matrix& g) {
  if (t.needs_grad(id)) t.grad(id) += g;
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.tape->push(a.value() + b.value(), {a.id, b.id},
                      [a = a.id, b = b.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        accumulate(t, a, g);
                        accumulate(t, b, g);
                      },
                      "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.tape->push(a.value() - b.value(), {a.id, b.id},
                      [a = a.id, b = b.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        accumulate(t, a, g);
                        if (t.needs_grad(b)) t.grad(b) -= g;
                      },
                      "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  return a.tape->push(a.value().cwiseProduct(b.value()), {a.id, b.id},
                      [a = a.id, b = b.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        if (t.needs_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
                        if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
                      },
                      "mul");
}

Var scale(Var a, double s) {
  return a.tape->push(a.value() * s, {a.id},
                      [a = a.id, s](Tape& t, int self) {
                        if (t.needs_grad(a)) t.grad(a) += s * t.grad(self);
                      },
                      "scale");
}

Var add_scalar(Var a, double s) {
  return a.tape->push(a.value().array() + s, {a.id},
                      [a = a.id](Tape& t, int self) { accumulate(t, a, t.grad(self)); }, "add_scalar");
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw ConfigError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.rows()) + ")");
  return a.tape->push(a.value() * b.value(), {a.id, b.id},
                      [a = a.id, b = b.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        if (t.needs_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
                        if (t.needs_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
                      },
                      "matmul");
}

Var add_bias(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ConfigError("add_bias: bias must be 1 x cols");
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  return a.tape->push(std::move(out), {a.id, bias.id},
                      [a = a.id, b = bias.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        accumulate(t, a, g);
                        if (t.needs_grad(b)) t.grad(b) += g.colwise().sum();
                      },
                      "add_bias");
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ConfigError("concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  return a.tape->push(std::move(out), {a.id, b.id},
                      [a = a.id, b = b.id, ca = a.cols(), cb = b.cols()](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        if (t.needs_grad(a)) t.grad(a) += g.leftCols(ca);
                        if (t.needs_grad(b)) t.grad(b) += g.rightCols(cb);
                      },
                      "concat_cols");
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw ConfigError("slice_cols: out of range");
  return a.tape->push(a.value().middleCols(begin, count), {a.id},
                      [a = a.id, begin, count](Tape& t, int self) {
                        if (t.needs_grad(a)) t.grad(a).middleCols(begin, count) += t.grad(self);
                      },
                      "slice_cols");
}

Var gather_rows(Var a, std::vector<int> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= a.rows()) throw ConfigError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(index[k]);
  }
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id, index = std::move(index)](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        const Matrix& g = t.grad(self);
                        Matrix& ga = t.grad(a);
                        for (std::size_t k = 0; k < index.size(); ++k)
                          ga.row(index[k]) += g.row(static_cast<Eigen::Index>(k));
                      },
                      "gather_rows");
}

Var scatter_sum_rows(Var a, std::vector<int> index, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows())
    throw ConfigError("scatter_sum_rows: one index per input row required");
  Matrix out = Matrix::Zero(rows, a.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= rows) throw ConfigError("scatter_sum_rows: index out of range");
    out.row(index[k]) += a.value().row(static_cast<Eigen::Index>(k));
  }
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id, index = std::move(index)](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        const Matrix& g = t.grad(self);
                        Matrix& ga = t.grad(a);
                        for (std::size_t k = 0; k < index.size(); ++k)
                          ga.row(static_cast<Eigen::Index>(k)) += g.row(index[k]);
                      },
                      "scatter_sum_rows");
}

Var relu(Var a) {
  return a.tape->push(a.value().cwiseMax(0.0), {a.id},
                      [a = a.id](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        t.grad(a).array() += (t.value(a).array() > 0.0).select(t.grad(self).array(), 0.0);
                      },
                      "relu");
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        const auto s = t.value(self).array();
                        t.grad(a).array() += t.grad(self).array() * s * (1.0 - s);
                      },
                      "sigmoid");
}

Var exp(Var a) {
  return a.tape->push(a.value().array().exp().matrix(), {a.id},
                      [a = a.id](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        t.grad(a).array() += t.grad(self).array() * t.value(self).array();
                      },
                      "exp");
}

Var pow_guarded(Var a, double gamma, double floor) {
  Matrix out = a.value().unaryExpr([=](double x) { return x > 0.0 ? std::pow(x, gamma) : 0.0; });
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id, gamma, floor](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        const Matrix& x = t.value(a);
                        const Matrix& g = t.grad(self);
                        Matrix& ga = t.grad(a);
                        for (Eigen::Index i = 0; i < x.size(); ++i) {
                          const double xi = x.data()[i];
                          if (xi > 0.0) ga.data()[i] += g.data()[i] * gamma * std::pow(std::max(xi, floor), gamma - 1.0);
                        }
                      },
                      "pow_guarded");
}

Var row_norm(Var a) {
  Matrix out = a.value().rowwise().norm();
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id](Tape& t, int self) {
                        if (!t.needs_grad(a)) return;
                        const Matrix& x = t.value(a);
                        const Matrix& n = t.value(self);
                        const Matrix& g = t.grad(self);
                        Matrix& ga = t.grad(a);
                        for (Eigen::Index i = 0; i < x.rows(); ++i)
                          if (n(i, 0) > 0.0) ga.row(i) += (g(i, 0) / n(i, 0)) * x.row(i);
                      },
                      "row_norm");
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id](Tape& t, int self) {
                        if (t.needs_grad(a)) t.grad(a).array() += t.grad(self)(0, 0);
                      },
                      "sum");
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw InputError("mean_rows: empty input");
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id, inv](Tape& t, int self) {
                        if (t.needs_grad(a)) t.grad(a).rowwise() += inv * t.grad(self).row(0);
                      },
                      "mean_rows");
}

Var broadcast_rows(Var a, Eigen::Index rows) {
  if (a.rows() != 1) throw ConfigError("broadcast_rows: input must have one row");
  Matrix out = a.value().replicate(rows, 1);
  return a.tape->push(std::move(out), {a.id},
                      [a = a.id](Tape& t, int self) {
                        if (t.needs_grad(a)) t.grad(a) += t.grad(self).colwise().sum();
                      },
                      "broadcast_rows");
}

Var mul_const(Var a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) throw ConfigError("mul_const: shape mismatch");
  return a.tape->push(a.value().cwiseProduct(c), {a.id},
                      [a = a.id, c](Tape& t, int self) {
                        if (t.needs_grad(a)) t.grad(a) += t.grad(self).cwiseProduct(c);
                      },
                      "mul_const");
}

}  // namespace ad
}  // namespace slosh
