#include "lnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace lnet {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << '}';
  return os.str();
}

namespace detail {
void Node::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}
}  // namespace detail

namespace {

using detail::Node;

[[noreturn]] void op_error(const char* op, const std::string& msg) {
  throw std::invalid_argument(std::string(op) + ": " + msg);
}

void require_rank2(const char* op, const Value& v) {
  if (v.shape().size() != 2)
    op_error(op, "expected rank-2 operand, got shape " + shape_str(v.shape()));
}

void require_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.shape() != b.shape())
    op_error(op, "shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace

Value make_op(const char* op, Shape shape, std::vector<Value> parents,
              std::function<void(detail::Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->data.resize(shape_size(n->shape));
  for (const auto& p : parents) {
    n->parents.push_back(p.handle());
    n->requires_grad = n->requires_grad || p.requires_grad();
  }
  if (n->requires_grad) n->backward = std::move(backward);
  return Value(std::move(n));
}

Value Value::constant(Shape shape, std::vector<double> data) {
  if (data.size() != shape_size(shape))
    throw std::invalid_argument("Value::constant: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return Value(std::move(n));
}

Value Value::parameter(Shape shape, std::vector<double> data) {
  Value v = constant(std::move(shape), std::move(data));
  v.node_->requires_grad = true;
  return v;
}

Value Value::scalar(double v) { return constant({1}, {v}); }

Value Value::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(shape_size(shape), 0.0);
  return requires_grad ? parameter(std::move(shape), std::move(d))
                       : constant(std::move(shape), std::move(d));
}

double Value::item() const {
  if (node_->data.size() != 1)
    throw std::invalid_argument("Value::item: shape " + shape_str(shape()) +
                                " is not a scalar");
  return node_->data[0];
}

double Value::operator()(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

// --- affine ------------------------------------------------------------------

Value affine(const Value& x, const Value& w, const Value& b) {
  require_rank2("affine", x);
  require_rank2("affine", w);
  const std::size_t n = x.rows(), in = x.cols(), out = w.cols();
  if (w.rows() != in)
    op_error("affine", "inner dimensions disagree: x " + shape_str(x.shape()) +
                           " vs w " + shape_str(w.shape()));
  if (b.defined() && b.size() != out)
    op_error("affine", "bias length " + shape_str(b.shape()) +
                           " does not match w " + shape_str(w.shape()));

  std::vector<Value> parents{x, w};
  if (b.defined()) parents.push_back(b);
  Value y = make_op(
      "affine", {n, out}, parents, [n, in, out](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        const double* g = self.grad.data();
        if (xn.requires_grad) {
          xn.ensure_grad();
          // dx = g @ w^T
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out; ++o) {
              const double gv = g[r * out + o];
              if (gv == 0.0) continue;
              const double* wrow = wn.data.data() + o;  // column o
              double* dx = xn.grad.data() + r * in;
              for (std::size_t i = 0; i < in; ++i) dx[i] += gv * wrow[i * out];
            }
        }
        if (wn.requires_grad) {
          wn.ensure_grad();
          // dw = x^T @ g
          for (std::size_t r = 0; r < n; ++r) {
            const double* xrow = xn.data.data() + r * in;
            const double* grow = g + r * out;
            for (std::size_t i = 0; i < in; ++i) {
              const double xv = xrow[i];
              if (xv == 0.0) continue;
              double* dwrow = wn.grad.data() + i * out;
              for (std::size_t o = 0; o < out; ++o) dwrow[o] += xv * grow[o];
            }
          }
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
          Node& bn = *self.parents[2];
          bn.ensure_grad();
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t o = 0; o < out; ++o)
              bn.grad[o] += g[r * out + o];
        }
      });

  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  for (std::size_t r = 0; r < n; ++r) {
    double* yrow = yd + r * out;
    if (b.defined())
      std::copy(b.data().begin(), b.data().end(), yrow);
    else
      std::fill(yrow, yrow + out, 0.0);
    const double* xrow = xd + r * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = xrow[i];
      if (xv == 0.0) continue;
      const double* wrow = wd + i * out;
      for (std::size_t o = 0; o < out; ++o) yrow[o] += xv * wrow[o];
    }
  }
  return y;
}

// --- elementwise -------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Value unary_elementwise(const char* op, const Value& x, Fwd fwd, Bwd dfdx) {
  Value y = make_op(op, x.shape(), {x}, [dfdx](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      xn.grad[i] += self.grad[i] * dfdx(xn.data[i], self.data[i]);
  });
  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  for (std::size_t i = 0; i < x.size(); ++i) yd[i] = fwd(xd[i]);
  return y;
}

}  // namespace

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a, b);
  Value y = make_op("add", a.shape(), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      Node& pn = *self.parents[p];
      if (!pn.requires_grad) continue;
      pn.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        pn.grad[i] += self.grad[i];
    }
  });
  double* yd = y.node()->data.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    yd[i] = a.data()[i] + b.data()[i];
  return y;
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a, b);
  Value y = make_op("sub", a.shape(), {a, b}, [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      an.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        an.grad[i] += self.grad[i];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        bn.grad[i] -= self.grad[i];
    }
  });
  double* yd = y.node()->data.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    yd[i] = a.data()[i] - b.data()[i];
  return y;
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a, b);
  Value y = make_op("mul", a.shape(), {a, b}, [](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    if (an.requires_grad) {
      an.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        an.grad[i] += self.grad[i] * bn.data[i];
    }
    if (bn.requires_grad) {
      bn.ensure_grad();
      for (std::size_t i = 0; i < self.size(); ++i)
        bn.grad[i] += self.grad[i] * an.data[i];
    }
  });
  double* yd = y.node()->data.data();
  for (std::size_t i = 0; i < a.size(); ++i)
    yd[i] = a.data()[i] * b.data()[i];
  return y;
}

Value softplus(const Value& x) {
  return unary_elementwise(
      "softplus", x,
      [](double v) {
        // log(1+e^v) without overflow
        return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Value sigmoid(const Value& x) {
  return unary_elementwise(
      "sigmoid", x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Value relu(const Value& x) {
  return unary_elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Value square(const Value& x) {
  return unary_elementwise(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Value scale(const Value& x, double c) {
  return unary_elementwise(
      "scale", x, [c](double v) { return c * v; },
      [c](double, double) { return c; });
}

// --- reductions --------------------------------------------------------------

Value sum_axis(const Value& x, int axis) {
  require_rank2("sum_axis", x);
  if (axis != 0 && axis != 1)
    op_error("sum_axis", "axis must be 0 or 1, got " + std::to_string(axis));
  const std::size_t n = x.rows(), m = x.cols();
  const Shape out_shape = axis == 0 ? Shape{m} : Shape{n};
  Value y = make_op("sum_axis", out_shape, {x}, [n, m, axis](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c)
        xn.grad[r * m + c] += self.grad[axis == 0 ? c : r];
  });
  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  std::fill(yd, yd + y.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c)
      yd[axis == 0 ? c : r] += xd[r * m + c];
  return y;
}

Value sum_all(const Value& x) {
  Value y = make_op("sum", {1}, {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (double& g : xn.grad) g += self.grad[0];
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  y.node()->data[0] = acc;
  return y;
}

Value mean_all(const Value& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  Value y = make_op("mean", {1}, {x}, [inv](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (double& g : xn.grad) g += self.grad[0] * inv;
  });
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  y.node()->data[0] = acc * inv;
  return y;
}

// --- row/column indexing -----------------------------------------------------

Value gather_rows(const Value& x, std::vector<std::size_t> rows) {
  require_rank2("gather_rows", x);
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t r : rows)
    if (r >= n)
      op_error("gather_rows", "row index " + std::to_string(r) +
                                  " out of range for " + shape_str(x.shape()));
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  Value y = make_op("gather_rows", {idx->size(), m}, {x}, [idx, m](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t e = 0; e < idx->size(); ++e) {
      double* dst = xn.grad.data() + (*idx)[e] * m;
      const double* src = self.grad.data() + e * m;
      for (std::size_t c = 0; c < m; ++c) dst[c] += src[c];
    }
  });
  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  for (std::size_t e = 0; e < idx->size(); ++e)
    std::copy(xd + (*idx)[e] * m, xd + ((*idx)[e] + 1) * m, yd + e * m);
  return y;
}

Value scatter_add_rows(const Value& x, std::vector<std::size_t> dst,
                       std::size_t num_rows) {
  require_rank2("scatter_add_rows", x);
  const std::size_t e_count = x.rows(), m = x.cols();
  if (dst.size() != e_count)
    op_error("scatter_add_rows",
             "index count " + std::to_string(dst.size()) +
                 " does not match rows of " + shape_str(x.shape()));
  for (std::size_t r : dst)
    if (r >= num_rows)
      op_error("scatter_add_rows", "destination index " + std::to_string(r) +
                                       " out of range " +
                                       std::to_string(num_rows));
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(dst));
  Value y = make_op(
      "scatter_add_rows", {num_rows, m}, {x}, [idx, m](Node& self) {
        Node& xn = *self.parents[0];
        if (!xn.requires_grad) return;
        xn.ensure_grad();
        for (std::size_t e = 0; e < idx->size(); ++e) {
          const double* src = self.grad.data() + (*idx)[e] * m;
          double* dgt = xn.grad.data() + e * m;
          for (std::size_t c = 0; c < m; ++c) dgt[c] += src[c];
        }
      });
  double* yd = y.node()->data.data();
  std::fill(yd, yd + y.size(), 0.0);
  const double* xd = x.data().data();
  for (std::size_t e = 0; e < e_count; ++e) {
    double* dgt = yd + (*idx)[e] * m;
    const double* src = xd + e * m;
    for (std::size_t c = 0; c < m; ++c) dgt[c] += src[c];
  }
  return y;
}

Value concat_cols(const std::vector<Value>& xs) {
  if (xs.empty()) op_error("concat_cols", "no operands");
  const std::size_t n = xs[0].rows();
  std::size_t total = 0;
  for (const Value& v : xs) {
    require_rank2("concat_cols", v);
    if (v.rows() != n)
      op_error("concat_cols", "row mismatch " + shape_str(xs[0].shape()) +
                                  " vs " + shape_str(v.shape()));
    total += v.cols();
  }
  Value y = make_op("concat_cols", {n, total}, xs, [n, total](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t m = p->cols();
      if (p->requires_grad) {
        p->ensure_grad();
        for (std::size_t r = 0; r < n; ++r) {
          const double* src = self.grad.data() + r * total + off;
          double* dst = p->grad.data() + r * m;
          for (std::size_t c = 0; c < m; ++c) dst[c] += src[c];
        }
      }
      off += m;
    }
  });
  double* yd = y.node()->data.data();
  std::size_t off = 0;
  for (const Value& v : xs) {
    const std::size_t m = v.cols();
    for (std::size_t r = 0; r < n; ++r)
      std::copy(v.data().begin() + r * m, v.data().begin() + (r + 1) * m,
                yd + r * total + off);
    off += m;
  }
  return y;
}

Value select_cols(const Value& x, std::vector<std::size_t> cols) {
  require_rank2("select_cols", x);
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t c : cols)
    if (c >= m)
      op_error("select_cols", "column index " + std::to_string(c) +
                                  " out of range for " + shape_str(x.shape()));
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(cols));
  const std::size_t k = idx->size();
  Value y = make_op("select_cols", {n, k}, {x}, [idx, n, m, k](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t r = 0; r < n; ++r) {
      const double* src = self.grad.data() + r * k;
      double* dst = xn.grad.data() + r * m;
      for (std::size_t c = 0; c < k; ++c) dst[(*idx)[c]] += src[c];
    }
  });
  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) yd[r * k + c] = xd[r * m + (*idx)[c]];
  return y;
}

Value repeat_cols(const Value& x, std::size_t k) {
  require_rank2("repeat_cols", x);
  if (k == 0) op_error("repeat_cols", "repeat count must be positive");
  const std::size_t n = x.rows(), m = x.cols();
  Value y = make_op("repeat_cols", {n, m * k}, {x}, [n, m, k](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        double acc = 0.0;
        const double* src = self.grad.data() + r * m * k + c * k;
        for (std::size_t t = 0; t < k; ++t) acc += src[t];
        xn.grad[r * m + c] += acc;
      }
  });
  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t t = 0; t < k; ++t)
        yd[r * m * k + c * k + t] = xd[r * m + c];
  return y;
}

Value scale_rows(const Value& x, const Value& s) {
  require_rank2("scale_rows", x);
  const std::size_t n = x.rows(), m = x.cols();
  if (s.size() != n)
    op_error("scale_rows", "scale length " + shape_str(s.shape()) +
                               " does not match rows of " +
                               shape_str(x.shape()));
  Value y = make_op("scale_rows", {n, m}, {x, s}, [n, m](Node& self) {
    Node& xn = *self.parents[0];
    Node& sn = *self.parents[1];
    if (xn.requires_grad) {
      xn.ensure_grad();
      for (std::size_t r = 0; r < n; ++r) {
        const double sv = sn.data[r];
        for (std::size_t c = 0; c < m; ++c)
          xn.grad[r * m + c] += self.grad[r * m + c] * sv;
      }
    }
    if (sn.requires_grad) {
      sn.ensure_grad();
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c)
          acc += self.grad[r * m + c] * xn.data[r * m + c];
        sn.grad[r] += acc;
      }
    }
  });
  double* yd = y.node()->data.data();
  const double* xd = x.data().data();
  const double* sd = s.data().data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) yd[r * m + c] = xd[r * m + c] * sd[r];
  return y;
}

Value rowwise_matvec(const Value& m, const Value& x, std::size_t u) {
  require_rank2("rowwise_matvec", m);
  require_rank2("rowwise_matvec", x);
  const std::size_t e_count = m.rows(), v = x.cols();
  if (x.rows() != e_count || m.cols() != u * v)
    op_error("rowwise_matvec", "shapes " + shape_str(m.shape()) + " and " +
                                   shape_str(x.shape()) +
                                   " incompatible with u=" + std::to_string(u));
  Value y =
      make_op("rowwise_matvec", {e_count, u}, {m, x},
              [e_count, u, v](Node& self) {
                Node& mn = *self.parents[0];
                Node& xn = *self.parents[1];
                if (mn.requires_grad) mn.ensure_grad();
                if (xn.requires_grad) xn.ensure_grad();
                for (std::size_t e = 0; e < e_count; ++e) {
                  const double* g = self.grad.data() + e * u;
                  const double* xe = xn.data.data() + e * v;
                  const double* me = mn.data.data() + e * u * v;
                  for (std::size_t i = 0; i < u; ++i) {
                    const double gv = g[i];
                    if (gv == 0.0) continue;
                    if (mn.requires_grad) {
                      double* dm = mn.grad.data() + e * u * v + i * v;
                      for (std::size_t j = 0; j < v; ++j) dm[j] += gv * xe[j];
                    }
                    if (xn.requires_grad) {
                      double* dx = xn.grad.data() + e * v;
                      const double* mrow = me + i * v;
                      for (std::size_t j = 0; j < v; ++j) dx[j] += gv * mrow[j];
                    }
                  }
                }
              });
  double* yd = y.node()->data.data();
  const double* md = m.data().data();
  const double* xd = x.data().data();
  for (std::size_t e = 0; e < e_count; ++e) {
    const double* xe = xd + e * v;
    for (std::size_t i = 0; i < u; ++i) {
      const double* mrow = md + e * u * v + i * v;
      double acc = 0.0;
      for (std::size_t j = 0; j < v; ++j) acc += mrow[j] * xe[j];
      yd[e * u + i] = acc;
    }
  }
  return y;
}

Value reshape(const Value& x, Shape shape) {
  if (shape_size(shape) != x.size())
    op_error("reshape", "cannot reshape " + shape_str(x.shape()) + " into " +
                            shape_str(shape));
  Value y = make_op("reshape", std::move(shape), {x}, [](Node& self) {
    Node& xn = *self.parents[0];
    if (!xn.requires_grad) return;
    xn.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      xn.grad[i] += self.grad[i];
  });
  std::copy(x.data().begin(), x.data().end(), y.node()->data.begin());
  return y;
}

// --- backprop ----------------------------------------------------------------

void backprop(const Value& root) {
  if (root.size() != 1)
    throw std::invalid_argument("backprop: root must be scalar, got shape " +
                                shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order over the subgraph that requires grad.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad.assign(n->data.size(), 0.0);
  root.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

}  // namespace lnet
