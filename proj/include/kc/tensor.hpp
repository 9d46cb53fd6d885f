#pragma once

// Dense row-major tensors of doubles with a reverse-mode gradient tape.
//
// Every op returns a fresh Tensor. When any input requires a gradient the
// result records its inputs and a backward closure; `backward(loss)` walks
// that DAG once in reverse topological order. Gradients accumulate into
// leaf tensors across calls until `zero_grad()` is called.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kc/error.hpp"

namespace kc {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Half-open column range [begin, end).
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const Segment&) const = default;
};

// Norms at or below this are rejected by the normalization ops.
inline constexpr double kNormEpsilon = 1e-12;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass reaches it
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward;  // null for leaves

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false) {
    if (shape.empty()) throw DimensionError("tensor shape must be non-empty");
    for (auto d : shape) {
      if (d == 0) {
        throw DimensionError("tensor dimensions must be positive, got " +
                             shape_string(shape));
      }
    }
    if (shape_size(shape) != data.size()) {
      throw DimensionError("shape " + shape_string(shape) + " needs " +
                           std::to_string(shape_size(shape)) +
                           " values, got " + std::to_string(data.size()));
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor filled(Shape shape, double value, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value),
                requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }

  // Row/column view: a rank-1 tensor is treated as a single row.
  std::size_t rows() const { return rank() == 1 ? 1 : impl_->shape[0]; }
  std::size_t cols() const { return impl_->shape.back(); }

  std::span<const double> data() const { return impl_->data; }
  // In-place access for optimizers and checkpoint loading. Does not touch
  // the tape.
  std::span<double> mutable_data() { return impl_->data; }

  double item() const {
    if (size() != 1) {
      throw ContractError("item() on non-scalar tensor " +
                          shape_string(shape()));
    }
    return impl_->data[0];
  }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const {
    return impl_->data[r * cols() + c];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return !impl_->backward; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->ensure_grad(); }
  void zero_grad() {
    if (impl_->requires_grad) impl_->grad.assign(impl_->data.size(), 0.0);
  }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

  friend Tensor make_result(Shape, std::vector<double>,
                            std::initializer_list<Tensor>,
                            std::function<void(detail::TensorImpl&)>);
  friend Tensor make_result(Shape, std::vector<double>, std::span<const Tensor>,
                            std::function<void(detail::TensorImpl&)>);

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Builds an op result. The backward closure receives the output node; its
// `grad` holds dLoss/dOutput and `parents` are the inputs in order. Parents
// that do not require a gradient must be skipped by the closure.
inline Tensor make_result(Shape shape, std::vector<double> data,
                          std::span<const Tensor> inputs,
                          std::function<void(detail::TensorImpl&)> backward) {
  Tensor out = Tensor::from(std::move(shape), std::move(data));
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    out.impl_->requires_grad = true;
    out.impl_->parents.reserve(inputs.size());
    for (const auto& t : inputs) out.impl_->parents.push_back(t.impl());
    out.impl_->backward = std::move(backward);
  }
  return out;
}

inline Tensor make_result(Shape shape, std::vector<double> data,
                          std::initializer_list<Tensor> inputs,
                          std::function<void(detail::TensorImpl&)> backward) {
  return make_result(std::move(shape), std::move(data),
                     std::span<const Tensor>(inputs.begin(), inputs.size()),
                     std::move(backward));
}

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

inline void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(a.shape()));
  }
}

inline double stable_sigmoid(double x) {
  const double e = std::exp(-std::abs(x));
  const double s = x >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  // exp underflows below about -745; keep the result a positive probability.
  return std::max(s, std::numeric_limits<double>::min());
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto A = a.data();
  const auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b},
                     [m, k, n](detail::TensorImpl& o) {
                       auto& pa = *o.parents[0];
                       auto& pb = *o.parents[1];
                       const auto& g = o.grad;
                       if (pa.requires_grad) {
                         auto& ga = pa.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j)
                               acc += g[i * n + j] * pb.data[p * n + j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (pb.requires_grad) {
                         auto& gb = pb.ensure_grad();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = pa.data[i * k + p];
                             if (av == 0.0) continue;
                             for (std::size_t j = 0; j < n; ++j)
                               gb[p * n + j] += av * g[i * n + j];
                           }
                       }
                     });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](detail::TensorImpl& o) {
                       for (auto& p : o.parents) {
                         if (!p->requires_grad) continue;
                         auto& g = p->ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] += o.grad[i];
                       }
                     });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](detail::TensorImpl& o) {
                       auto& pa = *o.parents[0];
                       auto& pb = *o.parents[1];
                       if (pa.requires_grad) {
                         auto& g = pa.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] += o.grad[i] * pb.data[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] += o.grad[i] * pa.data[i];
                       }
                     });
}

// x[rows x n] + bias[n], broadcast over rows.
inline Tensor add_row_vector(const Tensor& x, const Tensor& bias) {
  if (bias.size() != x.cols()) {
    throw DimensionError("add_row_vector: bias " + shape_string(bias.shape()) +
                         " does not match " + shape_string(x.shape()));
  }
  const std::size_t rows = x.rows(), n = x.cols();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] + bias[c];
  return make_result(x.shape(), std::move(out), {x, bias},
                     [rows, n](detail::TensorImpl& o) {
                       auto& px = *o.parents[0];
                       auto& pb = *o.parents[1];
                       if (px.requires_grad) {
                         auto& g = px.ensure_grad();
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] += o.grad[i];
                       }
                       if (pb.requires_grad) {
                         auto& g = pb.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < n; ++c)
                             g[c] += o.grad[r * n + c];
                       }
                     });
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = detail::stable_sigmoid(x[i]);
  return make_result(x.shape(), std::move(out), {x},
                     [](detail::TensorImpl& o) {
                       auto& g = o.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double s = o.data[i];
                         g[i] += o.grad[i] * s * (1.0 - s);
                       }
                     });
}

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](detail::TensorImpl& o) {
    auto& g = o.parents[0]->ensure_grad();
    for (auto& v : g) v += o.grad[0];
  });
}

inline Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  return make_result(x.shape(), std::move(out), {x},
                     [factor](detail::TensorImpl& o) {
                       auto& g = o.parents[0]->ensure_grad();
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += o.grad[i] * factor;
                     });
}

inline Tensor slice_cols(const Tensor& x, Segment cols) {
  detail::require_rank2(x, "slice_cols");
  if (cols.begin >= cols.end || cols.end > x.cols()) {
    throw DimensionError("slice_cols: range [" + std::to_string(cols.begin) +
                         "," + std::to_string(cols.end) + ") outside " +
                         shape_string(x.shape()));
  }
  const std::size_t rows = x.rows(), n = x.cols(), w = cols.size();
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c)
      out[r * w + c] = x[r * n + cols.begin + c];
  return make_result({rows, w}, std::move(out), {x},
                     [rows, n, w, cols](detail::TensorImpl& o) {
                       auto& g = o.parents[0]->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < w; ++c)
                           g[r * n + cols.begin + c] += o.grad[r * w + c];
                     });
}

inline Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_cols");
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t w = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) out[r * total + off + c] = p[r * w + c];
    off += w;
  }
  return make_result({rows, total}, std::move(out), parts,
                     [rows, total, offsets](detail::TensorImpl& o) {
                       for (std::size_t k = 0; k < o.parents.size(); ++k) {
                         auto& p = *o.parents[k];
                         if (!p.requires_grad) continue;
                         auto& g = p.ensure_grad();
                         const std::size_t w = p.shape.back();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < w; ++c)
                             g[r * w + c] += o.grad[r * total + offsets[k] + c];
                       }
                     });
}

inline Tensor concat_cols(std::initializer_list<Tensor> parts) {
  return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

// Divides each row's entries inside every segment by that segment's L2 norm;
// columns outside all segments pass through. Segments must be disjoint.
// The backward pass applies the full Jacobian
//   d xhat_i / d x_j = (delta_ij - xhat_i xhat_j) / ||x||.
inline Tensor l2_normalize_segments(const Tensor& x,
                                    std::span<const Segment> segments) {
  const std::size_t rows = x.rows(), n = x.cols();
  for (const auto& s : segments) {
    if (s.begin >= s.end || s.end > n) {
      throw DimensionError("l2_normalize: segment [" + std::to_string(s.begin) +
                           "," + std::to_string(s.end) + ") outside " +
                           shape_string(x.shape()));
    }
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  std::vector<double> norms(rows * segments.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const auto& s = segments[k];
      double sq = 0.0;
      for (std::size_t c = s.begin; c < s.end; ++c) {
        const double v = x[r * n + c];
        sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (!(norm > kNormEpsilon)) {
        throw DegenerateInputError(
            "l2_normalize: segment [" + std::to_string(s.begin) + "," +
            std::to_string(s.end) + ") of row " + std::to_string(r) +
            " has zero norm");
      }
      norms[r * segments.size() + k] = norm;
      for (std::size_t c = s.begin; c < s.end; ++c) out[r * n + c] /= norm;
    }
  }
  std::vector<Segment> segs(segments.begin(), segments.end());
  return make_result(
      x.shape(), std::move(out), {x},
      [rows, n, segs = std::move(segs), norms = std::move(norms)](
          detail::TensorImpl& o) {
        auto& g = o.parents[0]->ensure_grad();
        std::vector<bool> covered(n, false);
        for (const auto& s : segs)
          for (std::size_t c = s.begin; c < s.end; ++c) covered[c] = true;
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < n; ++c)
            if (!covered[c]) g[r * n + c] += o.grad[r * n + c];
          for (std::size_t k = 0; k < segs.size(); ++k) {
            const auto& s = segs[k];
            const double norm = norms[r * segs.size() + k];
            double dot = 0.0;
            for (std::size_t c = s.begin; c < s.end; ++c)
              dot += o.data[r * n + c] * o.grad[r * n + c];
            for (std::size_t c = s.begin; c < s.end; ++c)
              g[r * n + c] += (o.grad[r * n + c] - o.data[r * n + c] * dot) / norm;
          }
        }
      });
}

inline Tensor l2_normalize_segment(const Tensor& x, Segment segment) {
  return l2_normalize_segments(x, std::span<const Segment>(&segment, 1));
}

// out[r, c] = x[r, c] * gamma[index[c]].
inline Tensor scale_columns(const Tensor& x, const Tensor& gamma,
                            std::vector<std::size_t> index) {
  const std::size_t rows = x.rows(), n = x.cols();
  if (index.size() != n) {
    throw DimensionError("scale_columns: index has " +
                         std::to_string(index.size()) + " entries for " +
                         shape_string(x.shape()));
  }
  for (auto i : index) {
    if (i >= gamma.size()) {
      throw DimensionError("scale_columns: gamma index " + std::to_string(i) +
                           " outside " + shape_string(gamma.shape()));
    }
  }
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out[r * n + c] = x[r * n + c] * gamma[index[c]];
  return make_result(x.shape(), std::move(out), {x, gamma},
                     [rows, n, index = std::move(index)](detail::TensorImpl& o) {
                       auto& px = *o.parents[0];
                       auto& pg = *o.parents[1];
                       if (px.requires_grad) {
                         auto& g = px.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < n; ++c)
                             g[r * n + c] += o.grad[r * n + c] * pg.data[index[c]];
                       }
                       if (pg.requires_grad) {
                         auto& g = pg.ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < n; ++c)
                             g[index[c]] += o.grad[r * n + c] * px.data[r * n + c];
                       }
                     });
}

// Accumulates dLoss/dLeaf into every requires_grad leaf reachable from
// `loss`. Intermediate gradients are released afterwards, so only leaves
// created with requires_grad hold a gradient once this returns.
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got " +
                        (loss.defined() ? shape_string(loss.shape())
                                        : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss does not depend on any tensor that "
                        "requires a gradient");
  }
  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.impl().get(), 0);
  seen.insert(loss.impl().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::TensorImpl* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (auto* node : order)
    if (node->backward) node->grad.assign(node->data.size(), 0.0);
  loss.impl()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  for (auto* node : order) {
    if (node->backward) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

}  // namespace kc
