#include "grorec/ndiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "grorec/common.hpp"

namespace grorec::ndiff {

// --- Tensor -------------------------------------------------------------------

Tensor::Tensor(int rows, int cols, double fill)
    : rows_(rows), cols_(cols),
      data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {
  require(rows >= 0 && cols >= 0, "tensor dimensions must be non-negative");
}

Tensor::Tensor(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
          "tensor data size does not match shape");
}

Tensor Tensor::column(std::span<const double> v) {
  return Tensor(static_cast<int>(v.size()), 1, std::vector<double>(v.begin(), v.end()));
}

Tensor Tensor::row(std::span<const double> v) {
  return Tensor(1, static_cast<int>(v.size()), std::vector<double>(v.begin(), v.end()));
}

double Tensor::item() const {
  require(rows_ == 1 && cols_ == 1, "item() on a non-scalar tensor");
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& o) {
  require(same_shape(o), "tensor += shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

// --- Var / Graph ----------------------------------------------------------------

const Tensor& Var::value() const { return graph_->value_of(id_); }
const Tensor& Var::grad() const { return graph_->grad_of(id_); }

const Tensor& Graph::value_of(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Var Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::constant_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  return push(std::move(n));
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

Var Graph::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = grad_enabled_ ? &p : nullptr;
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

Var Graph::record(Tensor value, std::vector<int> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (int p : parents) {
      if (nodes_[p].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.backprop = std::move(backprop);
  }
  return push(std::move(n));
}

Tensor& Graph::adjoint(int id) {
  Tensor& a = adjoints_[id];
  if (a.empty()) {
    const Tensor& v = value_of(id);
    a = Tensor(v.rows(), v.cols());
  }
  return a;
}

void Graph::note_kink_inputs(std::span<const double> pre) {
  if (track_kinks_) kink_inputs_.insert(kink_inputs_.end(), pre.begin(), pre.end());
}

void Graph::backward(Var root) {
  require(root.graph() == this, "backward: root belongs to another graph");
  const Tensor& rv = value_of(root.id());
  require(rv.rows() == 1 && rv.cols() == 1, "backward: root must be a scalar");
  if (!nodes_[root.id()].requires_grad) return;

  adjoints_.assign(static_cast<std::size_t>(root.id()) + 1, Tensor());
  adjoints_[root.id()] = Tensor::scalar(1.0);
  for (int id = root.id(); id >= 0; --id) {
    if (adjoints_[id].empty()) continue;
    Node& n = nodes_[id];
    for (int p : n.parents) {
      if (p >= id) fail(ErrorCode::kInternal, "backward: cycle detected in graph");
    }
    Tensor upstream = std::move(adjoints_[id]);
    if (n.backprop) n.backprop(upstream, *this);
    if (n.param != nullptr) {
      if (!n.param->grad.same_shape(n.param->value)) n.param->zero_grad();
      n.param->grad += upstream;
    }
    if (n.grad.empty()) {
      n.grad = std::move(upstream);
    } else {
      n.grad += upstream;
    }
  }
  adjoints_.clear();
}

void Graph::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

bool Graph::depends_on(Var root, Var leaf) const {
  if (root.graph() != this || leaf.graph() != this) return false;
  if (leaf.id() > root.id()) return false;
  std::vector<char> seen(static_cast<std::size_t>(root.id()) + 1, 0);
  std::vector<int> stack{root.id()};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    if (id == leaf.id()) return true;
    if (seen[id]) continue;
    seen[id] = 1;
    for (int p : nodes_[id].parents) stack.push_back(p);
  }
  return false;
}

// --- ops --------------------------------------------------------------------------

namespace {

Graph& graph_of(Var a, Var b) {
  require(a.graph() == b.graph() && a.graph() != nullptr, "ops on vars from different graphs");
  return *a.graph();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kInvalidArgument,
         std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()) + ")");
  }
}

// out += a * b (a: n x k, b: k x m)
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out) {
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    double* o = out.data() + static_cast<std::size_t>(i) * m;
    for (int p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* br = b.data() + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

// out += a * b^T (a: n x k, b: m x k)
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  const int n = a.rows(), k = a.cols(), m = b.rows();
  for (int i = 0; i < n; ++i) {
    const double* ar = a.data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < m; ++j) {
      const double* br = b.data() + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ar[p] * br[p];
      out(i, j) += s;
    }
  }
}

// out += a^T * b (a: k x n, b: k x m)
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  const int k = a.rows(), n = a.cols(), m = b.cols();
  for (int p = 0; p < k; ++p) {
    const double* ar = a.data() + static_cast<std::size_t>(p) * n;
    const double* br = b.data() + static_cast<std::size_t>(p) * m;
    for (int i = 0; i < n; ++i) {
      const double av = ar[i];
      if (av == 0.0) continue;
      double* o = out.data() + static_cast<std::size_t>(i) * m;
      for (int j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

template <class F, class DF>
Var unary(Var a, F f, DF df_from_out) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const int ia = a.id();
  return g.record(std::move(out), {ia}, [ia, df_from_out](const Tensor& up, Graph& gg) {
    // Output value is re-read from the tape through the owning node.
    Tensor& ga = gg.adjoint(ia);
    const Tensor& x = gg.value_of(ia);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * df_from_out(x[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](const Tensor& up, Graph& gg) {
    if (gg.requires_grad(ia)) gg.adjoint(ia) += up;
    if (gg.requires_grad(ib)) gg.adjoint(ib) += up;
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](const Tensor& up, Graph& gg) {
    if (gg.requires_grad(ia)) gg.adjoint(ia) += up;
    if (gg.requires_grad(ib)) {
      Tensor& gb = gg.adjoint(ib);
      for (std::size_t i = 0; i < up.size(); ++i) gb[i] -= up[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](const Tensor& up, Graph& gg) {
    const Tensor& av = gg.value_of(ia);
    const Tensor& bv2 = gg.value_of(ib);
    if (gg.requires_grad(ia)) {
      Tensor& ga = gg.adjoint(ia);
      for (std::size_t i = 0; i < up.size(); ++i) ga[i] += up[i] * bv2[i];
    }
    if (gg.requires_grad(ib)) {
      Tensor& gb = gg.adjoint(ib);
      for (std::size_t i = 0; i < up.size(); ++i) gb[i] += up[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const int ia = a.id();
  return g.record(std::move(out), {ia}, [ia, s](const Tensor& up, Graph& gg) {
    Tensor& ga = gg.adjoint(ia);
    for (std::size_t i = 0; i < up.size(); ++i) ga[i] += s * up[i];
  });
}

Var add_scalar(Var a, double s) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  const int ia = a.id();
  return g.record(std::move(out), {ia}, [ia](const Tensor& up, Graph& gg) {
    gg.adjoint(ia) += up;
  });
}

Var add_row(Var a, Var row) {
  Graph& g = graph_of(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == av.cols(), "add_row: row must be 1 x cols");
  Tensor out = av;
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  const int ia = a.id(), ir = row.id();
  return g.record(std::move(out), {ia, ir}, [ia, ir](const Tensor& up, Graph& gg) {
    if (gg.requires_grad(ia)) gg.adjoint(ia) += up;
    if (gg.requires_grad(ir)) {
      Tensor& gr = gg.adjoint(ir);
      for (int i = 0; i < up.rows(); ++i)
        for (int j = 0; j < up.cols(); ++j) gr(0, j) += up(i, j);
    }
  });
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) fail(ErrorCode::kInvalidArgument, "matmul: inner dimension mismatch");
  Tensor out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](const Tensor& up, Graph& gg) {
    if (gg.requires_grad(ia)) gemm_nt(up, gg.value_of(ib), gg.adjoint(ia));  // dA = up * B^T
    if (gg.requires_grad(ib)) gemm_tn(gg.value_of(ia), up, gg.adjoint(ib));  // dB = A^T * up
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) fail(ErrorCode::kInvalidArgument, "matmul_nt: inner dimension mismatch");
  Tensor out(av.rows(), bv.rows());
  gemm_nt(av, bv, out);
  const int ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](const Tensor& up, Graph& gg) {
    if (gg.requires_grad(ia)) gemm_nn(up, gg.value_of(ib), gg.adjoint(ia));  // dA = up * B
    if (gg.requires_grad(ib)) gemm_tn(up, gg.value_of(ia), gg.adjoint(ib));  // dB = up^T * A
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  Tensor out(av.cols(), av.rows());
  for (int i = 0; i < av.rows(); ++i)
    for (int j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  const int ia = a.id();
  return g.record(std::move(out), {ia}, [ia](const Tensor& up, Graph& gg) {
    Tensor& ga = gg.adjoint(ia);
    for (int i = 0; i < ga.rows(); ++i)
      for (int j = 0; j < ga.cols(); ++j) ga(i, j) += up(j, i);
  });
}

Var gather_rows(Var a, std::span<const int> rows) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const int n = static_cast<int>(rows.size()), c = av.cols();
  Tensor out(n, c);
  for (int i = 0; i < n; ++i) {
    const int r = rows[i];
    if (r < 0 || r >= av.rows()) fail(ErrorCode::kInvalidArgument, "gather_rows: row index out of range");
    std::copy_n(av.data() + static_cast<std::size_t>(r) * c, c,
                out.data() + static_cast<std::size_t>(i) * c);
  }
  const int ia = a.id();
  std::vector<int> idx(rows.begin(), rows.end());
  return g.record(std::move(out), {ia}, [ia, idx = std::move(idx), c](const Tensor& up, Graph& gg) {
    Tensor& ga = gg.adjoint(ia);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = ga.data() + static_cast<std::size_t>(idx[i]) * c;
      const double* src = up.data() + i * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var slice_rows(Var a, int begin, int end) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  require(0 <= begin && begin <= end && end <= av.rows(), "slice_rows: range out of bounds");
  const int c = av.cols();
  Tensor out(end - begin, c);
  std::copy_n(av.data() + static_cast<std::size_t>(begin) * c, out.size(), out.data());
  const int ia = a.id();
  return g.record(std::move(out), {ia}, [ia, begin, c](const Tensor& up, Graph& gg) {
    Tensor& ga = gg.adjoint(ia);
    double* dst = ga.data() + static_cast<std::size_t>(begin) * c;
    for (std::size_t i = 0; i < up.size(); ++i) dst[i] += up[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Graph& g = *parts[0].graph();
  const int c = parts[0].value().cols();
  int total = 0;
  std::vector<int> ids, offsets;
  for (const Var& p : parts) {
    require(p.graph() == &g, "concat_rows: vars from different graphs");
    require(p.value().cols() == c, "concat_rows: column mismatch");
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.value().rows();
  }
  Tensor out(total, c);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    std::copy_n(pv.data(), pv.size(), out.data() + static_cast<std::size_t>(offsets[k]) * c);
  }
  return g.record(std::move(out), ids, [ids, offsets, c](const Tensor& up, Graph& gg) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!gg.requires_grad(ids[k])) continue;
      Tensor& gp = gg.adjoint(ids[k]);
      const double* src = up.data() + static_cast<std::size_t>(offsets[k]) * c;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
    }
  });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Var sigmoid(Var a) {
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary(a, sig, [sig](double x) {
    const double s = sig(x);
    return s * (1.0 - s);
  });
}

Var relu(Var a) {
  a.graph()->note_kink_inputs(a.value().values());
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var a, bool causal) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const int r = av.rows(), c = av.cols();
  if (causal) require(r <= c, "softmax_rows: causal mask needs rows <= cols");
  Tensor out(r, c);
  for (int i = 0; i < r; ++i) {
    const int lim = causal ? i + 1 : c;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < lim; ++j) mx = std::max(mx, av(i, j));
    double z = 0.0;
    for (int j = 0; j < lim; ++j) {
      out(i, j) = std::exp(av(i, j) - mx);
      z += out(i, j);
    }
    for (int j = 0; j < lim; ++j) out(i, j) /= z;
  }
  const int ia = a.id();
  Tensor probs = out;
  return g.record(std::move(out), {ia}, [ia, probs = std::move(probs)](const Tensor& up, Graph& gg) {
    Tensor& ga = gg.adjoint(ia);
    for (int i = 0; i < probs.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < probs.cols(); ++j) dot += up(i, j) * probs(i, j);
      for (int j = 0; j < probs.cols(); ++j) ga(i, j) += probs(i, j) * (up(i, j) - dot);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  Graph& g = *logits.graph();
  const Tensor& lv = logits.value();
  const int r = lv.rows(), c = lv.cols();
  require(static_cast<int>(targets.size()) == r, "softmax_cross_entropy: one target per row");
  Tensor probs(r, c);
  double loss = 0.0;
  for (int i = 0; i < r; ++i) {
    const int t = targets[i];
    require(t >= 0 && t < c, "softmax_cross_entropy: target out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j) mx = std::max(mx, lv(i, j));
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      probs(i, j) = std::exp(lv(i, j) - mx);
      z += probs(i, j);
    }
    for (int j = 0; j < c; ++j) probs(i, j) /= z;
    loss += -(lv(i, t) - mx - std::log(z));
  }
  const int il = logits.id();
  std::vector<int> tg(targets.begin(), targets.end());
  return g.record(Tensor::scalar(loss), {il},
                  [il, probs = std::move(probs), tg = std::move(tg)](const Tensor& up, Graph& gg) {
                    Tensor& gl = gg.adjoint(il);
                    const double u = up[0];
                    for (int i = 0; i < probs.rows(); ++i) {
                      for (int j = 0; j < probs.cols(); ++j) gl(i, j) += u * probs(i, j);
                      gl(i, tg[i]) -= u;
                    }
                  });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const int ia = a.id();
  return g.record(Tensor::scalar(s), {ia}, [ia](const Tensor& up, Graph& gg) {
    Tensor& ga = gg.adjoint(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += up[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  require(n > 0, "mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

// --- oracles ------------------------------------------------------------------------

double relative_error(double a, double b) {
  const double denom = std::max(std::fabs(a), std::fabs(b));
  if (denom == 0.0) return 0.0;
  return std::fabs(a - b) / denom;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, double h) {
  require(h > 0.0, "finite_difference_gradient: h must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(ErrorCode::kNumeric, "finite_difference_gradient: non-finite function value");
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

namespace {

struct Probe {
  double value;
  std::vector<double> kinks;
};

Probe probe(const GraphFunction& f, const Tensor& x) {
  Graph g(false);
  g.set_track_kinks(true);
  Var y = f(g, g.leaf(x));
  require(y.value().size() == 1, "grad_check: function must return a scalar");
  if (!std::isfinite(y.value()[0])) fail(ErrorCode::kNumeric, "grad_check: non-finite function value");
  return {y.value()[0], g.kink_inputs()};
}

}  // namespace

GradCheckReport grad_check(const GraphFunction& f, const Tensor& point, double h, double tol,
                           double abs_tol) {
  require(h > 0.0, "grad_check: h must be positive");
  Graph g;
  Var x = g.leaf(point);
  Var y = f(g, x);
  g.backward(y);
  Tensor analytic = x.grad().empty() ? Tensor(point.rows(), point.cols()) : x.grad();

  const Probe base = probe(f, point);
  GradCheckReport rep;
  Tensor xp = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const Probe plus = probe(f, xp);
    xp[i] = orig - h;
    const Probe minus = probe(f, xp);
    xp[i] = orig;

    bool near_kink = plus.kinks.size() != minus.kinks.size() || plus.kinks.size() != base.kinks.size();
    for (std::size_t j = 0; !near_kink && j < base.kinks.size(); ++j) {
      const bool moved = plus.kinks[j] != minus.kinks[j];
      const bool crossed = (plus.kinks[j] > 0.0) != (minus.kinks[j] > 0.0);
      if (crossed || (moved && std::fabs(base.kinks[j]) < 10.0 * h)) near_kink = true;
    }
    if (near_kink) {
      ++rep.excluded;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * h);
    const double abs_err = std::fabs(numeric - analytic[i]);
    const double rel_err = relative_error(numeric, analytic[i]);
    ++rep.checked;
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (rep.checked == 1 || rel_err > rep.max_rel_error) {
      rep.worst_coordinate = i;
      rep.max_rel_error = rel_err;
    }
  }
  rep.pass = rep.max_rel_error <= tol || rep.max_abs_error <= abs_tol;
  return rep;
}

}  // namespace grorec::ndiff
