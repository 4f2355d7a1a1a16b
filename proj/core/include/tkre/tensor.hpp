#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tkre/errors.hpp"
#include "tkre/rng.hpp"

namespace tkre {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  bool leaf = true;
  std::string name;  // set for parameters
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into the parents' grads.
  std::function<void(Node&)> backfn;

  void ensure_grad() {
    if (grad.size() != data.size()) {
      grad.assign(data.size(), 0.0);
    }
  }
};

}  // namespace detail

// Dense row-major tensor of doubles participating in a reverse-mode tape.
// Copies are shallow handles; two Tensor values may share one node. The tape
// is the implicit parent graph: calling backward(loss) walks it once in
// reverse topological order. Gradients accumulate until zero_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

  const std::vector<double>& data() const { return node_->data; }
  // In-place mutation is for leaves only (optimizer updates, test fixtures);
  // mutating an op output would desynchronize the tape.
  std::vector<double>& mutable_data();

  double value() const;  // scalar tensors only
  double at(std::size_t i) const { return node_->data.at(i); }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  const std::vector<double>& grad() const;  // StateError if never populated
  void zero_grad();

  void set_name(const std::string& name) { node_->name = name; }
  const std::string& name() const { return node_->name; }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Ops. Every function returns a fresh tensor wired into the tape whenever any
// input requires gradients.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
// y = mul_c * x + add_c, elementwise with constants.
Tensor affine(const Tensor& x, double mul_c, double add_c);
Tensor scale(const Tensor& x, double c);
// Broadcast-multiply by a single-element tensor (differentiable in both).
Tensor mul_by_scalar_tensor(const Tensor& x, const Tensor& s);
// [n,d] + [d], broadcast over rows.
Tensor add_rowvec(const Tensor& m, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat(const std::vector<Tensor>& vecs);        // rank-1 inputs
Tensor concat_cols(const std::vector<Tensor>& mats);   // rank-2, equal rows
Tensor slice(const Tensor& v, std::size_t offset, std::size_t len);
Tensor slice_cols(const Tensor& m, std::size_t c0, std::size_t c1);
Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& rows);
// Stack M rank-1 tensors of width d into [M,d].
Tensor stack_rows(const std::vector<Tensor>& rows);

Tensor sum(const Tensor& x);  // full reduction -> shape {1}
// Mean of the unmasked rows of [n,d] -> [d]. EmptySupportError if none.
Tensor mean_rows_masked(const Tensor& m, const std::vector<bool>& mask);

Tensor softmax(const Tensor& x, std::size_t axis);
// Row softmax of [q,n] with an optional column (key) mask; masked columns get
// exactly zero weight. mask == nullptr means all positions live.
Tensor masked_softmax_rows(const Tensor& scores, const std::vector<bool>* mask);

Tensor sigmoid(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-5);
// Inverted dropout: identity in eval mode, keep-prob scaling in train mode.
// Draws come from the provided run RNG.
Tensor dropout(const Tensor& x, double p, bool training, Rng* rng);

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids);

// lse(logits) - logits[target]; backward is softmax(logits) - onehot(target).
Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t target);

// x may be rank-1 {in} or rank-2 {n,in}; W is {in,out}, b is {out}.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct Attention {
  Tensor output;   // [q,d] (or [d] for a rank-1 query)
  Tensor weights;  // [q,n] (or [n]); rows sum to 1 over unmasked keys
};

// Projection-free scaled dot-product attention: softmax(q K^T / sqrt(d)) V.
// Masked key positions receive exactly zero weight; fully masked keys raise
// EmptySupportError.
Attention scaled_dot_attention(const Tensor& query, const Tensor& keys,
                               const Tensor& values,
                               const std::vector<bool>* mask = nullptr);

// Reverse-mode sweep from a scalar loss. Repeated calls accumulate into
// existing gradients; callers zero grads between steps.
void backward(const Tensor& loss);

}  // namespace tkre
