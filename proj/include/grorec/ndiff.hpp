#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Graph is a tape: every op appends a node whose parents already exist,
// so node ids are a topological order and backward is a single reverse
// sweep. Scalars are 1x1 tensors, column vectors are n x 1.

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "grorec/common.hpp"

namespace grorec::ndiff {

class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, double fill = 0.0);
  Tensor(int rows, int cols, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor column(std::span<const double> v);
  static Tensor row(std::span<const double> v);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<const double> row_span(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  /// Value of a 1x1 tensor.
  double item() const;
  void fill(double v);
  Tensor& operator+=(const Tensor& o);

  bool operator==(const Tensor&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// A trainable array owned outside any graph. Binding it into a graph with
/// Graph::param makes backward accumulate into `grad`.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor(value.rows(), value.cols()); }
};

class Graph;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Accumulated gradient from every backward() call so far; empty if none
  /// reached this node.
  const Tensor& grad() const;
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  /// Called during backward with the node's upstream adjoint; must add the
  /// parents' contributions through Graph::adjoint.
  using Backprop = std::function<void(const Tensor& upstream, Graph& g)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Constant that aliases caller storage; the tensor must outlive the graph.
  Var constant_ref(const Tensor& value);
  /// Differentiable input owned by the graph.
  Var leaf(Tensor value);
  /// Differentiable input aliasing `p.value`; backward adds into `p.grad`.
  Var param(Parameter& p);

  /// Reverse sweep from a scalar root seeded with 1. Adds d(root)/d(node)
  /// into every reachable node's grad, so repeated calls accumulate.
  void backward(Var root);
  void zero_grad();

  /// True when `leaf` lies on some path into `root`.
  bool depends_on(Var root, Var leaf) const;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// Record hinge/relu inputs as they are computed (for kink detection).
  void set_track_kinks(bool on) { track_kinks_ = on; }
  const std::vector<double>& kink_inputs() const { return kink_inputs_; }
  void note_kink_inputs(std::span<const double> pre);

  // --- op-author interface -------------------------------------------------
  Var record(Tensor value, std::vector<int> parents, Backprop backprop);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const Tensor& value_of(int id) const;
  const Tensor& grad_of(int id) const { return nodes_[id].grad; }
  /// Adjoint buffer of node `id` for the backward sweep in progress
  /// (zero-initialized on first touch).
  Tensor& adjoint(int id);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<int> parents;
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node n);

  std::deque<Node> nodes_;
  std::vector<Tensor> adjoints_;
  std::vector<double> kink_inputs_;
  bool grad_enabled_ = true;
  bool track_kinks_ = false;
};

// --- ops --------------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (r x c) plus a 1 x c row broadcast over every row.
Var add_row(Var a, Var row);
Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var gather_rows(Var a, std::span<const int> rows);
Var slice_rows(Var a, int begin, int end);
Var concat_rows(std::span<const Var> parts);
Var tanh(Var a);
Var sigmoid(Var a);
/// max(x, 0); subgradient at exactly 0 is 0.
Var relu(Var a);
inline Var hinge(Var a) { return relu(a); }
/// Row-wise softmax. With `causal`, entry (i, j > i) is masked out.
Var softmax_rows(Var a, bool causal = false);
/// Sum over rows of -log softmax(logits_r)[targets_r].
Var softmax_cross_entropy(Var logits, std::span<const int> targets);
Var sum(Var a);
Var mean(Var a);

// --- gradient oracles ---------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  bool pass = false;
};

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, double h);

using GraphFunction = std::function<Var(Graph&, Var)>;

/// Compares backward-mode gradients of `f` at `point` to central
/// differences. Coordinates whose +-h perturbation moves a hinge input
/// across zero, or moves one that sits within 10h of zero, are excluded.
/// pass <=> max_rel_error <= tol || max_abs_error <= abs_tol.
GradCheckReport grad_check(const GraphFunction& f, const Tensor& point,
                           double h = 1e-4, double tol = 1e-5,
                           double abs_tol = 1e-8);

/// |a - b| / max(|a|, |b|), 0 when both are 0.
double relative_error(double a, double b);

}  // namespace grorec::ndiff
