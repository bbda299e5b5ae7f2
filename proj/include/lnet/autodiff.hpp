#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lnet {

// Dense row-major array shape. Rank 1 ({n}) or 2 ({rows, cols}) everywhere;
// scalars are shape {1}.
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // sized on demand during backprop
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pushes d(root)/d(this) into parents
  const char* op = "leaf";

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  void ensure_grad();
};

}  // namespace detail

// Handle to a node of the reverse-mode tape. Cheap to copy; the graph is
// owned via shared parents, so a live root keeps its ancestors alive.
class Value {
 public:
  Value() = default;

  static Value constant(Shape shape, std::vector<double> data);
  static Value parameter(Shape shape, std::vector<double> data);
  static Value scalar(double v);
  static Value zeros(Shape shape, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const { return node_->rows(); }
  std::size_t cols() const { return node_->cols(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> data() const { return node_->data; }
  // In-place mutation of leaf storage (optimizer updates, finite differences).
  std::span<double> mutable_data() { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  double item() const;        // value of a one-element array
  double operator()(std::size_t r, std::size_t c) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

 private:
  explicit Value(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Value make_op(const char* op, Shape shape,
                       std::vector<Value> parents,
                       std::function<void(detail::Node&)> backward);
};

// --- primitive operations ---------------------------------------------------

// y = x @ w + b, x:{n,i} w:{i,o} b:{o} (b may be an undefined Value).
Value affine(const Value& x, const Value& w, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value softplus(const Value& x);
Value sigmoid(const Value& x);
Value relu(const Value& x);
Value square(const Value& x);
Value scale(const Value& x, double c);
// Sum over one axis of a rank-2 array: axis 0 -> {cols}, axis 1 -> {rows}.
Value sum_axis(const Value& x, int axis);
Value sum_all(const Value& x);
Value mean_all(const Value& x);
Value gather_rows(const Value& x, std::vector<std::size_t> rows);
// out has num_rows rows; row dst[e] accumulates x row e.
Value scatter_add_rows(const Value& x, std::vector<std::size_t> dst,
                       std::size_t num_rows);
Value concat_cols(const std::vector<Value>& xs);
Value select_cols(const Value& x, std::vector<std::size_t> cols);
// Each column repeated k times in place: {n,m} -> {n,m*k},
// out[:, c*k+t] = x[:, c].
Value repeat_cols(const Value& x, std::size_t k);
// Row-wise scaling: out[r,:] = x[r,:] * s[r], s:{n}.
Value scale_rows(const Value& x, const Value& s);
// Batched matrix-vector product: m:{E, u*v} (row e is a u-by-v matrix),
// x:{E, v} -> {E, u}.
Value rowwise_matvec(const Value& m, const Value& x, std::size_t u);
Value reshape(const Value& x, Shape shape);

// Populates grads of all ancestors of a scalar root that require them.
// Grads of the reachable subgraph are reset first; within one call,
// contributions from multiple uses of a Value accumulate additively.
void backprop(const Value& root);

}  // namespace lnet
