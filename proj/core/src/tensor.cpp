#include "tkre/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace tkre {

using detail::Node;

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) {
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::wrap(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  const std::size_t count = shape_size(shape);
  n->shape = std::move(shape);
  n->data.assign(count, value);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

std::vector<double>& Tensor::mutable_data() {
  if (node_->requires_grad && !node_->leaf) {
    throw StateError("refusing to mutate a non-leaf tensor on the tape");
  }
  return node_->data;
}

double Tensor::value() const {
  if (size() != 1) {
    throw ShapeError("value() expects a scalar tensor, got shape " + shape_str(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) {
    throw ShapeError("at(i,j) expects rank-2, got shape " + shape_str(shape()));
  }
  return node_->data.at(i * dim(1) + j);
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw StateError("gradient not populated for tensor" +
                     (node_->name.empty() ? std::string() : " '" + node_->name + "'"));
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_->grad.size() == node_->data.size()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

namespace {

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backfn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->leaf = false;
  bool rg = false;
  for (const auto& p : parents) {
    rg = rg || p->requires_grad;
  }
  n->requires_grad = rg;
  if (rg) {
    n->parents = std::move(parents);
    n->backfn = std::move(backfn);
  }
  return Tensor::wrap(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void check_no_nan(const std::vector<double>& xs, const char* op) {
  for (const double x : xs) {
    if (std::isnan(x)) {
      throw NumericError(std::string(op) + ": input contains NaN");
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node* p = self.parents[k].get();
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += self.grad[i];
      if (pb->requires_grad) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op(a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa->requires_grad) pa->grad[i] += self.grad[i] * pb->data[i];
      if (pb->requires_grad) pb->grad[i] += self.grad[i] * pa->data[i];
    }
  });
}

Tensor affine(const Tensor& x, double mul_c, double add_c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mul_c * x.data()[i] + add_c;
  return make_op(x.shape(), std::move(out), {x.node_ptr()}, [mul_c](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += mul_c * self.grad[i];
  });
}

Tensor scale(const Tensor& x, double c) { return affine(x, c, 0.0); }

Tensor mul_by_scalar_tensor(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) {
    throw ShapeError("mul_by_scalar_tensor: scalar operand has shape " + shape_str(s.shape()));
  }
  const double sv = s.data()[0];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * x.data()[i];
  return make_op(x.shape(), std::move(out), {x.node_ptr(), s.node_ptr()}, [sv](Node& self) {
    Node* px = self.parents[0].get();
    Node* ps = self.parents[1].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (px->requires_grad) px->grad[i] += sv * self.grad[i];
      if (ps->requires_grad) ps->grad[0] += self.grad[i] * px->data[i];
    }
  });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) {
    throw ShapeError("add_rowvec: incompatible shapes " + shape_str(m.shape()) + " and " +
                     shape_str(v.shape()));
  }
  const std::size_t n = m.dim(0), d = m.dim(1);
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = m.data()[i * d + j] + v.data()[j];
  return make_op(m.shape(), std::move(out), {m.node_ptr(), v.node_ptr()}, [n, d](Node& self) {
    Node* pm = self.parents[0].get();
    Node* pv = self.parents[1].get();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double g = self.grad[i * d + j];
        if (pm->requires_grad) pm->grad[i * d + j] += g;
        if (pv->requires_grad) pv->grad[j] += g;
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto& A = a.data();
  const auto& B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = A[i * k + t];
      if (av == 0.0) continue;
      const double* brow = B.data() + t * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_op({m, n}, std::move(out), {a.node_ptr(), b.node_ptr()}, [m, k, n](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    const auto& g = self.grad;
    if (pa->requires_grad) {
      // dA = dC B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          double acc = 0.0;
          const double* grow = g.data() + i * n;
          const double* brow = pb->data.data() + t * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          pa->grad[i * k + t] += acc;
        }
    }
    if (pb->requires_grad) {
      // dB = A^T dC
      for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa->data.data() + i * k;
        const double* grow = g.data() + i * n;
        for (std::size_t t = 0; t < k; ++t) {
          const double av = arow[t];
          if (av == 0.0) continue;
          double* brow = pb->grad.data() + t * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& m) {
  if (m.rank() != 2) {
    throw ShapeError("transpose expects rank-2, got " + shape_str(m.shape()));
  }
  const std::size_t r = m.dim(0), c = m.dim(1);
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m.data()[i * c + j];
  return make_op({c, r}, std::move(out), {m.node_ptr()}, [r, c](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p->grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out = x.data();
  return make_op(std::move(shape), std::move(out), {x.node_ptr()}, [](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& vecs) {
  if (vecs.empty()) throw ShapeError("concat: no inputs");
  std::vector<double> out;
  std::vector<std::shared_ptr<Node>> parents;
  std::vector<std::size_t> sizes;
  for (const Tensor& v : vecs) {
    if (v.rank() != 1) {
      throw ShapeError("concat expects rank-1 inputs, got " + shape_str(v.shape()));
    }
    out.insert(out.end(), v.data().begin(), v.data().end());
    parents.push_back(v.node_ptr());
    sizes.push_back(v.size());
  }
  const std::size_t total = out.size();
  return make_op({total}, std::move(out), std::move(parents),
                 [sizes = std::move(sizes)](Node& self) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < sizes.size(); ++k) {
                     Node* p = self.parents[k].get();
                     if (p->requires_grad) {
                       for (std::size_t i = 0; i < sizes[k]; ++i) p->grad[i] += self.grad[off + i];
                     }
                     off += sizes[k];
                   }
                 });
}

Tensor concat_cols(const std::vector<Tensor>& mats) {
  if (mats.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = mats.front().dim(0);
  std::size_t total_cols = 0;
  std::vector<std::size_t> widths;
  std::vector<std::shared_ptr<Node>> parents;
  for (const Tensor& m : mats) {
    if (m.rank() != 2 || m.dim(0) != n) {
      throw ShapeError("concat_cols: row mismatch at " + shape_str(m.shape()));
    }
    widths.push_back(m.dim(1));
    total_cols += m.dim(1);
    parents.push_back(m.node_ptr());
  }
  std::vector<double> out(n * total_cols);
  std::size_t off = 0;
  for (std::size_t k = 0; k < mats.size(); ++k) {
    const auto& src = mats[k].data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * total_cols + off + j] = src[i * widths[k] + j];
    off += widths[k];
  }
  return make_op({n, total_cols}, std::move(out), std::move(parents),
                 [n, total_cols, widths = std::move(widths)](Node& self) {
                   std::size_t col = 0;
                   for (std::size_t k = 0; k < widths.size(); ++k) {
                     Node* p = self.parents[k].get();
                     if (p->requires_grad) {
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < widths[k]; ++j)
                           p->grad[i * widths[k] + j] += self.grad[i * total_cols + col + j];
                     }
                     col += widths[k];
                   }
                 });
}

Tensor slice(const Tensor& v, std::size_t offset, std::size_t len) {
  if (v.rank() != 1 || offset + len > v.dim(0)) {
    throw ShapeError("slice: range [" + std::to_string(offset) + "," +
                     std::to_string(offset + len) + ") out of " + shape_str(v.shape()));
  }
  std::vector<double> out(v.data().begin() + static_cast<std::ptrdiff_t>(offset),
                          v.data().begin() + static_cast<std::ptrdiff_t>(offset + len));
  return make_op({len}, std::move(out), {v.node_ptr()}, [offset, len](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < len; ++i) p->grad[offset + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& m, std::size_t c0, std::size_t c1) {
  if (m.rank() != 2 || c0 >= c1 || c1 > m.dim(1)) {
    throw ShapeError("slice_cols: bad column range on " + shape_str(m.shape()));
  }
  const std::size_t n = m.dim(0), d = m.dim(1), w = c1 - c0;
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = m.data()[i * d + c0 + j];
  return make_op({n, w}, std::move(out), {m.node_ptr()}, [n, d, w, c0](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) p->grad[i * d + c0 + j] += self.grad[i * w + j];
  });
}

namespace {

Tensor gather_rows_impl(const Tensor& m, std::vector<std::size_t> rows, const char* op) {
  if (m.rank() != 2) {
    throw ShapeError(std::string(op) + " expects rank-2, got " + shape_str(m.shape()));
  }
  const std::size_t n = m.dim(0), d = m.dim(1);
  for (const std::size_t r : rows) {
    if (r >= n) {
      throw DataError(std::string(op) + ": index " + std::to_string(r) +
                      " out of range for " + shape_str(m.shape()));
    }
  }
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = m.data()[rows[i] * d + j];
  const std::size_t k = rows.size();
  return make_op({k, d}, std::move(out), {m.node_ptr()},
                 [d, rows = std::move(rows)](Node& self) {
                   Node* p = self.parents[0].get();
                   for (std::size_t i = 0; i < rows.size(); ++i)
                     for (std::size_t j = 0; j < d; ++j)
                       p->grad[rows[i] * d + j] += self.grad[i * d + j];
                 });
}

}  // namespace

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& rows) {
  return gather_rows_impl(m, rows, "gather_rows");
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::size_t>& ids) {
  return gather_rows_impl(table, ids, "embedding_lookup");
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t d = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * d);
  std::vector<std::shared_ptr<Node>> parents;
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.size() != d) {
      throw ShapeError("stack_rows: row shape mismatch at " + shape_str(r.shape()));
    }
    out.insert(out.end(), r.data().begin(), r.data().end());
    parents.push_back(r.node_ptr());
  }
  const std::size_t m = rows.size();
  return make_op({m, d}, std::move(out), std::move(parents), [m, d](Node& self) {
    for (std::size_t i = 0; i < m; ++i) {
      Node* p = self.parents[i].get();
      if (!p->requires_grad) continue;
      for (std::size_t j = 0; j < d; ++j) p->grad[j] += self.grad[i * d + j];
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (const double v : x.data()) acc += v;
  return make_op({1}, {acc}, {x.node_ptr()}, [](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0];
  });
}

Tensor mean_rows_masked(const Tensor& m, const std::vector<bool>& mask) {
  if (m.rank() != 2 || mask.size() != m.dim(0)) {
    throw ShapeError("mean_rows_masked: mask length " + std::to_string(mask.size()) +
                     " vs shape " + shape_str(m.shape()));
  }
  const std::size_t n = m.dim(0), d = m.dim(1);
  std::size_t cnt = 0;
  for (const bool b : mask) cnt += b ? 1 : 0;
  if (cnt == 0) throw EmptySupportError("mean_rows_masked: all rows masked");
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += m.data()[i * d + j];
  }
  const double inv = 1.0 / static_cast<double>(cnt);
  for (double& v : out) v *= inv;
  return make_op({d}, std::move(out), {m.node_ptr()}, [n, d, inv, mask](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      for (std::size_t j = 0; j < d; ++j) p->grad[i * d + j] += inv * self.grad[j];
    }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(x.shape()));
  }
  check_no_nan(x.data(), "softmax");
  const std::size_t an = x.dim(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * an * inner + in;
      double mx = x.data()[base];
      for (std::size_t a = 1; a < an; ++a) mx = std::max(mx, x.data()[base + a * inner]);
      double z = 0.0;
      for (std::size_t a = 0; a < an; ++a) {
        const double e = std::exp(x.data()[base + a * inner] - mx);
        out[base + a * inner] = e;
        z += e;
      }
      for (std::size_t a = 0; a < an; ++a) out[base + a * inner] /= z;
    }
  }
  return make_op(x.shape(), std::move(out), {x.node_ptr()},
                 [an, outer, inner](Node& self) {
                   Node* p = self.parents[0].get();
                   for (std::size_t o = 0; o < outer; ++o) {
                     for (std::size_t in = 0; in < inner; ++in) {
                       const std::size_t base = o * an * inner + in;
                       double dot = 0.0;
                       for (std::size_t a = 0; a < an; ++a) {
                         const std::size_t idx = base + a * inner;
                         dot += self.grad[idx] * self.data[idx];
                       }
                       for (std::size_t a = 0; a < an; ++a) {
                         const std::size_t idx = base + a * inner;
                         p->grad[idx] += self.data[idx] * (self.grad[idx] - dot);
                       }
                     }
                   }
                 });
}

Tensor masked_softmax_rows(const Tensor& scores, const std::vector<bool>* mask) {
  if (scores.rank() != 2) {
    throw ShapeError("masked_softmax_rows expects rank-2, got " + shape_str(scores.shape()));
  }
  const std::size_t q = scores.dim(0), n = scores.dim(1);
  if (mask != nullptr) {
    if (mask->size() != n) {
      throw ShapeError("masked_softmax_rows: mask length " + std::to_string(mask->size()) +
                       " vs " + std::to_string(n) + " keys");
    }
    if (std::none_of(mask->begin(), mask->end(), [](bool b) { return b; })) {
      throw EmptySupportError("attention: all key positions are masked");
    }
  }
  std::vector<bool> live(n, true);
  if (mask != nullptr) live = *mask;
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (live[j] && std::isnan(scores.data()[i * n + j])) {
        throw NumericError("attention scores contain NaN");
      }
    }
  }
  std::vector<double> out(q * n, 0.0);
  for (std::size_t i = 0; i < q; ++i) {
    double mx = -HUGE_VAL;
    for (std::size_t j = 0; j < n; ++j)
      if (live[j]) mx = std::max(mx, scores.data()[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!live[j]) continue;
      const double e = std::exp(scores.data()[i * n + j] - mx);
      out[i * n + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (live[j]) out[i * n + j] /= z;
  }
  return make_op({q, n}, std::move(out), {scores.node_ptr()},
                 [q, n, live = std::move(live)](Node& self) {
                   Node* p = self.parents[0].get();
                   for (std::size_t i = 0; i < q; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < n; ++j) {
                       if (!live[j]) continue;
                       dot += self.grad[i * n + j] * self.data[i * n + j];
                     }
                     for (std::size_t j = 0; j < n; ++j) {
                       if (!live[j]) continue;
                       const std::size_t idx = i * n + j;
                       p->grad[idx] += self.data[idx] * (self.grad[idx] - dot);
                     }
                   }
                 });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return make_op(x.shape(), std::move(out), {x.node_ptr()}, [](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.data[i];
      p->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return make_op(x.shape(), std::move(out), {x.node_ptr()}, [](Node& self) {
    Node* p = self.parents[0].get();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = p->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      p->grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1) throw ShapeError("layernorm: rank-0 input");
  const std::size_t d = x.dim(x.rank() - 1);
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d) {
    throw ShapeError("layernorm: affine params must be [" + std::to_string(d) + "]");
  }
  const std::size_t rows = x.size() / d;
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xi = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xi[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xi[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xi[j] - mu) * inv[r];
      xhat[r * d + j] = h;
      out[r * d + j] = gamma.data()[j] * h + beta.data()[j];
    }
  }
  return make_op(x.shape(), std::move(out), {x.node_ptr(), gamma.node_ptr(), beta.node_ptr()},
                 [rows, d, xhat = std::move(xhat), inv = std::move(inv)](Node& self) {
                   Node* px = self.parents[0].get();
                   Node* pg = self.parents[1].get();
                   Node* pb = self.parents[2].get();
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* g = self.grad.data() + r * d;
                     const double* h = xhat.data() + r * d;
                     double mean_dh = 0.0, mean_dh_h = 0.0;
                     for (std::size_t j = 0; j < d; ++j) {
                       const double dh = g[j] * pg->data[j];
                       mean_dh += dh;
                       mean_dh_h += dh * h[j];
                       if (pg->requires_grad) pg->grad[j] += g[j] * h[j];
                       if (pb->requires_grad) pb->grad[j] += g[j];
                     }
                     mean_dh /= static_cast<double>(d);
                     mean_dh_h /= static_cast<double>(d);
                     if (px->requires_grad) {
                       for (std::size_t j = 0; j < d; ++j) {
                         const double dh = g[j] * pg->data[j];
                         px->grad[r * d + j] += inv[r] * (dh - mean_dh - h[j] * mean_dh_h);
                       }
                     }
                   }
                 });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng* rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout probability must lie in [0,1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) {
    return x;  // identity in eval mode
  }
  if (rng == nullptr) {
    throw StateError("dropout in training mode requires the run RNG");
  }
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng->uniform() >= p ? keep_scale : 0.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
  return make_op(x.shape(), std::move(out), {x.node_ptr()},
                 [mask = std::move(mask)](Node& self) {
                   Node* px = self.parents[0].get();
                   for (std::size_t i = 0; i < self.grad.size(); ++i)
                     px->grad[i] += self.grad[i] * mask[i];
                 });
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t target) {
  if (logits.rank() != 1) {
    throw ShapeError("cross_entropy_with_logits expects rank-1 logits, got " +
                     shape_str(logits.shape()));
  }
  if (target >= logits.dim(0)) {
    throw DataError("cross_entropy_with_logits: target " + std::to_string(target) +
                    " out of range");
  }
  check_no_nan(logits.data(), "cross_entropy_with_logits");
  const std::size_t c = logits.dim(0);
  double mx = logits.data()[0];
  for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, logits.data()[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < c; ++i) z += std::exp(logits.data()[i] - mx);
  const double lse = mx + std::log(z);
  std::vector<double> probs(c);
  for (std::size_t i = 0; i < c; ++i) probs[i] = std::exp(logits.data()[i] - lse);
  const double loss = lse - logits.data()[target];
  return make_op({1}, {loss}, {logits.node_ptr()},
                 [target, probs = std::move(probs)](Node& self) {
                   Node* p = self.parents[0].get();
                   const double g = self.grad[0];
                   for (std::size_t i = 0; i < probs.size(); ++i) {
                     p->grad[i] += g * (probs[i] - (i == target ? 1.0 : 0.0));
                   }
                 });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() == 1) {
    const Tensor row = reshape(x, {1, x.dim(0)});
    const Tensor y = add_rowvec(matmul(row, w), b);
    return reshape(y, {w.dim(1)});
  }
  return add_rowvec(matmul(x, w), b);
}

Attention scaled_dot_attention(const Tensor& query, const Tensor& keys, const Tensor& values,
                               const std::vector<bool>* mask) {
  if (keys.rank() != 2 || values.rank() != 2) {
    throw ShapeError("attention: keys/values must be rank-2");
  }
  const std::size_t n = keys.dim(0), d = keys.dim(1);
  if (values.dim(0) != n || values.dim(1) != d) {
    throw ShapeError("attention: keys " + shape_str(keys.shape()) + " vs values " +
                     shape_str(values.shape()));
  }
  const bool vec = query.rank() == 1;
  if ((vec && query.dim(0) != d) || (!vec && (query.rank() != 2 || query.dim(1) != d))) {
    throw ShapeError("attention: query " + shape_str(query.shape()) + " incompatible with d=" +
                     std::to_string(d));
  }
  const Tensor q2 = vec ? reshape(query, {1, d}) : query;
  const Tensor scores = scale(matmul(q2, transpose(keys)), 1.0 / std::sqrt(static_cast<double>(d)));
  const Tensor w = masked_softmax_rows(scores, mask);
  const Tensor out = matmul(w, values);
  if (vec) {
    return {reshape(out, {d}), reshape(w, {n})};
  }
  return {out, w};
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward expects a scalar loss, got shape " + shape_str(loss.shape()));
  }
  Node* root = loss.node();
  if (!root->requires_grad) {
    return;  // nothing on the tape
  }
  // Iterative post-order DFS over grad-requiring ancestors; the reversed
  // order is a valid topological order from the loss.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node* p = f.node->parents[f.next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->ensure_grad();
    if (!n->backfn) continue;
    for (const auto& p : n->parents) {
      if (p->requires_grad) p->ensure_grad();
    }
    n->backfn(*n);
  }
}

}  // namespace tkre
