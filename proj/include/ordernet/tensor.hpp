#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ordernet/errors.hpp"

// Minimal reverse-mode autodiff engine. Tensors are dense, row-major,
// contiguous buffers templated on the scalar type: the float instantiation is
// the production path, the double instantiation exists for finite-difference
// gradient verification. Every differentiable op records a closure on a tape
// (the node graph); backward() runs the closures in reverse topological order
// and then frees the tape, so graphs are rebuilt per step.

namespace ordernet {

namespace detail {

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

inline std::size_t numel_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) n *= static_cast<std::size_t>(e);
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

[[noreturn]] inline void fail(const std::string& msg) {
  throw ContractError(msg);
}

}  // namespace detail

// Disables tape recording for the current thread while alive. Wrap inference
// and evaluation in this so no graph is built.
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename S>
struct TensorNode {
  std::vector<int> shape;
  std::vector<S> data;
  std::vector<S> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(const TensorNode&)> backward_fn;
  bool consumed = false;  // set once backward() has run through this node

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), S(0));
  }
};

template <typename S>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    for (int e : shape)
      if (e < 0) detail::fail("tensor extent must be >= 0, got shape " + detail::shape_str(shape));
    auto node = std::make_shared<TensorNode<S>>();
    node->data.assign(detail::numel_of(shape), S(0));
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from_data(std::vector<int> shape, std::vector<S> values,
                          bool requires_grad = false) {
    if (values.size() != detail::numel_of(shape))
      detail::fail("from_data: " + std::to_string(values.size()) +
                   " values for shape " + detail::shape_str(shape));
    auto t = zeros(std::move(shape), requires_grad);
    t.node_->data = std::move(values);
    return t;
  }

  static Tensor scalar(S v) { return from_data({}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }
  std::size_t numel() const { return node_->data.size(); }

  std::vector<S>& data() { return node_->data; }
  const std::vector<S>& data() const { return node_->data; }

  // Gradient buffer; zeros if nothing has been accumulated yet.
  const std::vector<S>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->data.size(), S(0)); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) {
    if (v && node_->backward_fn)
      detail::fail("set_requires_grad: only leaf tensors can be marked");
    node_->requires_grad = v;
  }

  S item() const {
    if (numel() != 1) detail::fail("item: tensor has " + std::to_string(numel()) + " elements");
    return node_->data[0];
  }

  const std::shared_ptr<TensorNode<S>>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<TensorNode<S>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

template <typename S>
bool recording(std::initializer_list<const Tensor<S>*> parents) {
  if (!grad_mode()) return false;
  for (const Tensor<S>* p : parents)
    if (p->node()->requires_grad) return true;
  return false;
}

template <typename S>
void add_grad(const std::shared_ptr<TensorNode<S>>& node, std::size_t i, S v) {
  if (node->requires_grad) node->grad[i] += v;
}

// Marks `out` as recorded with the given parents and backward closure.
template <typename S, typename Fn>
void record(Tensor<S>& out, std::vector<std::shared_ptr<TensorNode<S>>> parents, Fn&& fn) {
  auto& n = *out.node();
  n.requires_grad = true;
  n.parents = std::move(parents);
  n.backward_fn = std::forward<Fn>(fn);
  for (auto& p : n.parents)
    if (p->requires_grad) p->ensure_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise and reduction ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
  auto out = Tensor<S>::zeros(x.shape());
  const auto& xd = x.data();
  auto& od = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] > S(0) ? xd[i] : S(0);
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp](const TensorNode<S>& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (xp->data[i] > S(0)) xp->grad[i] += self.grad[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    detail::fail("add: shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                 detail::shape_str(b.shape()));
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (detail::recording<S>({&a, &b})) {
    auto ap = a.node(), bp = b.node();
    detail::record(out, {ap, bp}, [ap, bp](const TensorNode<S>& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        detail::add_grad(ap, i, self.grad[i]);
        detail::add_grad(bp, i, self.grad[i]);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape())
    detail::fail("mul: shape mismatch " + detail::shape_str(a.shape()) + " vs " +
                 detail::shape_str(b.shape()));
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (detail::recording<S>({&a, &b})) {
    auto ap = a.node(), bp = b.node();
    detail::record(out, {ap, bp}, [ap, bp](const TensorNode<S>& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        detail::add_grad(ap, i, self.grad[i] * bp->data[i]);
        detail::add_grad(bp, i, self.grad[i] * ap->data[i]);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S c) {
  auto out = Tensor<S>::zeros(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = x.data()[i] * c;
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp, c](const TensorNode<S>& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i] * c;
    });
  }
  return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  double acc = 0;
  for (S v : x.data()) acc += static_cast<double>(v);
  auto out = Tensor<S>::scalar(static_cast<S>(acc));
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp](const TensorNode<S>& self) {
      for (std::size_t i = 0; i < xp->grad.size(); ++i) xp->grad[i] += self.grad[0];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> new_shape) {
  if (detail::numel_of(new_shape) != x.numel())
    detail::fail("reshape: cannot view " + detail::shape_str(x.shape()) + " as " +
                 detail::shape_str(new_shape));
  auto out = Tensor<S>::from_data(std::move(new_shape), x.data());
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp](const TensorNode<S>& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> permute_axes(const Tensor<S>& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r)
    detail::fail("permute_axes: permutation size " + std::to_string(perm.size()) +
                 " for rank " + std::to_string(r));
  std::vector<char> seen(static_cast<std::size_t>(r), 0);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[static_cast<std::size_t>(p)])
      detail::fail("permute_axes: invalid permutation");
    seen[static_cast<std::size_t>(p)] = 1;
  }
  std::vector<int> out_shape(static_cast<std::size_t>(r));
  for (int a = 0; a < r; ++a) out_shape[a] = x.dim(perm[a]);

  std::vector<std::size_t> in_strides(static_cast<std::size_t>(r), 1);
  for (int a = r - 2; a >= 0; --a)
    in_strides[a] = in_strides[a + 1] * static_cast<std::size_t>(x.dim(a + 1));
  // stride in the input for a unit step along output axis a
  std::vector<std::size_t> step(static_cast<std::size_t>(r));
  for (int a = 0; a < r; ++a) step[a] = in_strides[static_cast<std::size_t>(perm[a])];

  auto out = Tensor<S>::zeros(out_shape);
  const auto& xd = x.data();
  auto& od = out.data();
  std::vector<int> coord(static_cast<std::size_t>(r), 0);
  std::size_t in_flat = 0;
  for (std::size_t o = 0; o < od.size(); ++o) {
    od[o] = xd[in_flat];
    for (int a = r - 1; a >= 0; --a) {
      in_flat += step[a];
      if (++coord[a] < out_shape[a]) break;
      in_flat -= step[a] * static_cast<std::size_t>(out_shape[a]);
      coord[a] = 0;
    }
  }
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp, out_shape, step, r](const TensorNode<S>& self) {
      std::vector<int> c(static_cast<std::size_t>(r), 0);
      std::size_t in_flat = 0;
      for (std::size_t o = 0; o < self.grad.size(); ++o) {
        xp->grad[in_flat] += self.grad[o];
        for (int a = r - 1; a >= 0; --a) {
          in_flat += step[a];
          if (++c[a] < out_shape[a]) break;
          in_flat -= step[a] * static_cast<std::size_t>(out_shape[a]);
          c[a] = 0;
        }
      }
    });
  }
  return out;
}

// Inserts a new axis at `axis` and replicates the input `extent` times along
// it. The gradient sums over the replicated axis.
template <typename S>
Tensor<S> broadcast_over_axis(const Tensor<S>& x, int axis, int extent) {
  if (axis < 0 || axis > x.rank())
    detail::fail("broadcast_over_axis: axis " + std::to_string(axis) + " for rank " +
                 std::to_string(x.rank()));
  if (extent < 1) detail::fail("broadcast_over_axis: extent must be >= 1");
  std::vector<int> out_shape = x.shape();
  out_shape.insert(out_shape.begin() + axis, extent);
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= static_cast<std::size_t>(x.dim(a));
  for (int a = axis; a < x.rank(); ++a) inner *= static_cast<std::size_t>(x.dim(a));

  auto out = Tensor<S>::zeros(std::move(out_shape));
  const auto& xd = x.data();
  auto& od = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    const S* src = xd.data() + o * inner;
    for (int e = 0; e < extent; ++e)
      std::copy(src, src + inner, od.data() + (o * static_cast<std::size_t>(extent) + e) * inner);
  }
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp, outer, inner, extent](const TensorNode<S>& self) {
      for (std::size_t o = 0; o < outer; ++o) {
        S* dst = xp->grad.data() + o * inner;
        for (int e = 0; e < extent; ++e) {
          const S* g = self.grad.data() + (o * static_cast<std::size_t>(extent) + e) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> concat_axis(std::span<const Tensor<S>> parts, int axis) {
  if (parts.empty()) detail::fail("concat_axis: no inputs");
  const int r = parts[0].rank();
  if (axis < 0 || axis >= r) detail::fail("concat_axis: axis " + std::to_string(axis));
  std::vector<int> out_shape = parts[0].shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.rank() != r) detail::fail("concat_axis: rank mismatch");
    for (int a = 0; a < r; ++a)
      if (a != axis && p.dim(a) != out_shape[a])
        detail::fail("concat_axis: shape mismatch " + detail::shape_str(p.shape()) + " vs " +
                     detail::shape_str(parts[0].shape()) + " on axis " + std::to_string(a));
    total += p.dim(axis);
  }
  out_shape[axis] = total;

  std::size_t outer = 1, tail = 1;
  for (int a = 0; a < axis; ++a) outer *= static_cast<std::size_t>(out_shape[a]);
  for (int a = axis + 1; a < r; ++a) tail *= static_cast<std::size_t>(out_shape[a]);
  const std::size_t out_row = static_cast<std::size_t>(total) * tail;

  auto out = Tensor<S>::zeros(std::move(out_shape));
  auto& od = out.data();
  std::vector<std::size_t> offsets;  // per part, element offset within an outer row
  {
    std::size_t off = 0;
    for (const auto& p : parts) {
      offsets.push_back(off);
      const std::size_t blk = static_cast<std::size_t>(p.dim(axis)) * tail;
      const auto& pd = p.data();
      for (std::size_t o = 0; o < outer; ++o)
        std::copy(pd.data() + o * blk, pd.data() + (o + 1) * blk, od.data() + o * out_row + off);
      off += blk;
    }
  }
  bool rec = false;
  if (detail::grad_mode())
    for (const auto& p : parts)
      if (p.node()->requires_grad) rec = true;
  if (rec) {
    std::vector<std::shared_ptr<TensorNode<S>>> ps;
    std::vector<std::size_t> blocks;
    for (const auto& p : parts) {
      ps.push_back(p.node());
      blocks.push_back(static_cast<std::size_t>(p.dim(axis)) * tail);
    }
    detail::record(out, ps, [ps, offsets, blocks, outer, out_row](const TensorNode<S>& self) {
      for (std::size_t k = 0; k < ps.size(); ++k) {
        if (!ps[k]->requires_grad) continue;
        for (std::size_t o = 0; o < outer; ++o) {
          const S* g = self.grad.data() + o * out_row + offsets[k];
          S* dst = ps[k]->grad.data() + o * blocks[k];
          for (std::size_t i = 0; i < blocks[k]; ++i) dst[i] += g[i];
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> concat_last_axis(std::span<const Tensor<S>> parts) {
  if (parts.empty()) detail::fail("concat_last_axis: no inputs");
  return concat_axis(parts, parts[0].rank() - 1);
}

template <typename S>
Tensor<S> concat_last_axis(std::initializer_list<Tensor<S>> parts) {
  std::vector<Tensor<S>> v(parts);
  return concat_last_axis(std::span<const Tensor<S>>(v));
}

// ---------------------------------------------------------------------------
// gather / masking
// ---------------------------------------------------------------------------

// x: [R, C], indices into the rows. Gradient scatter-adds into the source.
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<int>& indices) {
  if (x.rank() != 2) detail::fail("gather_rows: expected rank 2, got " + detail::shape_str(x.shape()));
  const int R = x.dim(0), C = x.dim(1);
  for (int idx : indices)
    if (idx < 0 || idx >= R)
      detail::fail("gather_rows: index " + std::to_string(idx) + " out of range for extent " +
                   std::to_string(R));
  auto out = Tensor<S>::zeros({static_cast<int>(indices.size()), C});
  for (std::size_t k = 0; k < indices.size(); ++k)
    std::copy_n(x.data().data() + static_cast<std::size_t>(indices[k]) * C, C,
                out.data().data() + k * static_cast<std::size_t>(C));
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp, indices, C](const TensorNode<S>& self) {
      for (std::size_t k = 0; k < indices.size(); ++k) {
        const S* g = self.grad.data() + k * static_cast<std::size_t>(C);
        S* dst = xp->grad.data() + static_cast<std::size_t>(indices[k]) * C;
        for (int c = 0; c < C; ++c) dst[c] += g[c];
      }
    });
  }
  return out;
}

// x: [B, R, C] with one index list per batch row; all lists must share one
// length K. Result is [B, K, C].
template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<std::vector<int>>& indices) {
  if (x.rank() != 3) detail::fail("gather_rows: expected rank 3, got " + detail::shape_str(x.shape()));
  const int B = x.dim(0), R = x.dim(1), C = x.dim(2);
  if (static_cast<int>(indices.size()) != B)
    detail::fail("gather_rows: " + std::to_string(indices.size()) + " index lists for batch " +
                 std::to_string(B));
  const std::size_t K = indices.empty() ? 0 : indices[0].size();
  for (const auto& list : indices) {
    if (list.size() != K) detail::fail("gather_rows: ragged index lists");
    for (int idx : list)
      if (idx < 0 || idx >= R)
        detail::fail("gather_rows: index " + std::to_string(idx) + " out of range for extent " +
                     std::to_string(R));
  }
  auto out = Tensor<S>::zeros({B, static_cast<int>(K), C});
  for (int b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k)
      std::copy_n(x.data().data() + (static_cast<std::size_t>(b) * R + indices[b][k]) * C, C,
                  out.data().data() + (static_cast<std::size_t>(b) * K + k) * C);
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp, indices, R, C, K](const TensorNode<S>& self) {
      for (std::size_t b = 0; b < indices.size(); ++b)
        for (std::size_t k = 0; k < K; ++k) {
          const S* g = self.grad.data() + (b * K + k) * static_cast<std::size_t>(C);
          S* dst = xp->grad.data() + (b * static_cast<std::size_t>(R) + indices[b][k]) * C;
          for (int c = 0; c < C; ++c) dst[c] += g[c];
        }
    });
  }
  return out;
}

// Zeroes the cells where the two paired axes (rank-3 and rank-2 from the end)
// carry equal indices, i.e. [..., i, i, :] <- 0.
template <typename S>
Tensor<S> zero_diagonal(const Tensor<S>& x) {
  const int r = x.rank();
  if (r < 3) detail::fail("zero_diagonal: expected rank >= 3, got " + detail::shape_str(x.shape()));
  const int n = x.dim(r - 3), m = x.dim(r - 2), C = x.dim(r - 1);
  if (n != m)
    detail::fail("zero_diagonal: paired axes differ, " + detail::shape_str(x.shape()));
  std::size_t outer = 1;
  for (int a = 0; a < r - 3; ++a) outer *= static_cast<std::size_t>(x.dim(a));
  auto out = Tensor<S>::from_data(x.shape(), x.data());
  const std::size_t cell = static_cast<std::size_t>(C);
  const std::size_t row = static_cast<std::size_t>(n) * cell;
  const std::size_t plane = static_cast<std::size_t>(n) * row;
  for (std::size_t o = 0; o < outer; ++o)
    for (int i = 0; i < n; ++i)
      std::fill_n(out.data().data() + o * plane + i * row + i * cell, cell, S(0));
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    detail::record(out, {xp}, [xp, outer, plane, row, cell, n](const TensorNode<S>& self) {
      for (std::size_t f = 0; f < self.grad.size(); ++f) xp->grad[f] += self.grad[f];
      for (std::size_t o = 0; o < outer; ++o)
        for (int i = 0; i < n; ++i) {
          const std::size_t base = o * plane + i * row + i * cell;
          for (std::size_t c = 0; c < cell; ++c) xp->grad[base + c] -= self.grad[base + c];
        }
    });
  }
  return out;
}

// Elementwise zeroing: entries where keep == 0 become 0 and receive no
// gradient. `keep` must match the tensor shape exactly.
template <typename S>
Tensor<S> apply_mask(const Tensor<S>& x, const std::vector<std::uint8_t>& keep) {
  if (keep.size() != x.numel())
    detail::fail("apply_mask: mask size " + std::to_string(keep.size()) + " for tensor " +
                 detail::shape_str(x.shape()));
  auto out = Tensor<S>::zeros(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data()[i] = keep[i] ? x.data()[i] : S(0);
  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    auto keep_copy = std::make_shared<std::vector<std::uint8_t>>(keep);
    detail::record(out, {xp}, [xp, keep_copy](const TensorNode<S>& self) {
      const auto& k = *keep_copy;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (k[i]) xp->grad[i] += self.grad[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

enum class PoolKind { Max, Avg };

// Reduces one axis completely. exclude_mask (same shape as x, nonzero =
// excluded) removes entries from the reduction; max routes its gradient to the
// first (lowest-index) maximizer; avg divides by the participating count.
template <typename S>
Tensor<S> pool_over_axis(const Tensor<S>& x, int axis, PoolKind kind,
                         const std::vector<std::uint8_t>* exclude_mask = nullptr) {
  const int r = x.rank();
  if (axis < 0 || axis >= r) detail::fail("pool_over_axis: axis " + std::to_string(axis));
  if (exclude_mask && exclude_mask->size() != x.numel())
    detail::fail("pool_over_axis: mask size " + std::to_string(exclude_mask->size()) +
                 " for tensor " + detail::shape_str(x.shape()));
  const int extent = x.dim(axis);
  std::size_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= static_cast<std::size_t>(x.dim(a));
  for (int a = axis + 1; a < r; ++a) inner *= static_cast<std::size_t>(x.dim(a));
  std::vector<int> out_shape = x.shape();
  out_shape.erase(out_shape.begin() + axis);
  auto out = Tensor<S>::zeros(std::move(out_shape));
  auto& od = out.data();
  const auto& xd = x.data();

  std::vector<std::size_t> argmax;
  std::vector<int> counts;
  if (kind == PoolKind::Max) argmax.assign(od.size(), 0);
  else counts.assign(od.size(), 0);

  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t base = o * static_cast<std::size_t>(extent) * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t oi = o * inner + i;
      if (kind == PoolKind::Max) {
        bool found = false;
        S best = S(0);
        std::size_t best_at = 0;
        for (int a = 0; a < extent; ++a) {
          const std::size_t f = base + static_cast<std::size_t>(a) * inner + i;
          if (exclude_mask && (*exclude_mask)[f]) continue;
          if (!found || xd[f] > best) {
            found = true;
            best = xd[f];
            best_at = f;
          }
        }
        if (!found)
          detail::fail("pool_over_axis: fully excluded fiber at output element " +
                       std::to_string(oi));
        od[oi] = best;
        argmax[oi] = best_at;
      } else {
        double acc = 0;
        int cnt = 0;
        for (int a = 0; a < extent; ++a) {
          const std::size_t f = base + static_cast<std::size_t>(a) * inner + i;
          if (exclude_mask && (*exclude_mask)[f]) continue;
          acc += static_cast<double>(xd[f]);
          ++cnt;
        }
        if (cnt == 0)
          detail::fail("pool_over_axis: fully excluded fiber at output element " +
                       std::to_string(oi));
        od[oi] = static_cast<S>(acc / cnt);
        counts[oi] = cnt;
      }
    }
  }

  if (detail::recording<S>({&x})) {
    auto xp = x.node();
    if (kind == PoolKind::Max) {
      detail::record(out, {xp}, [xp, argmax = std::move(argmax)](const TensorNode<S>& self) {
        for (std::size_t oi = 0; oi < self.grad.size(); ++oi)
          xp->grad[argmax[oi]] += self.grad[oi];
      });
    } else {
      std::shared_ptr<std::vector<std::uint8_t>> mask_copy;
      if (exclude_mask) mask_copy = std::make_shared<std::vector<std::uint8_t>>(*exclude_mask);
      detail::record(out, {xp}, [xp, counts = std::move(counts), mask_copy, outer, inner,
                                 extent](const TensorNode<S>& self) {
        for (std::size_t o = 0; o < outer; ++o) {
          const std::size_t base = o * static_cast<std::size_t>(extent) * inner;
          for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t oi = o * inner + i;
            const S g = self.grad[oi] / static_cast<S>(counts[oi]);
            for (int a = 0; a < extent; ++a) {
              const std::size_t f = base + static_cast<std::size_t>(a) * inner + i;
              if (mask_copy && (*mask_copy)[f]) continue;
              xp->grad[f] += g;
            }
          }
        }
      });
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear / convolution
// ---------------------------------------------------------------------------

// 1x1 convolution over the channel (last) axis: out[..., c] =
// bias[c] + sum_k in[..., k] * weight[k, c], applied at every position.
template <typename S>
Tensor<S> pointwise_linear(const Tensor<S>& input, const Tensor<S>& weight,
                           const Tensor<S>& bias) {
  if (weight.rank() != 2) detail::fail("pointwise_linear: weight must be [in,out], got " +
                                       detail::shape_str(weight.shape()));
  const int Cin = weight.dim(0), Cout = weight.dim(1);
  if (input.rank() < 1 || input.dim(input.rank() - 1) != Cin)
    detail::fail("pointwise_linear: input " + detail::shape_str(input.shape()) +
                 " does not end in " + std::to_string(Cin) + " channels (weight " +
                 detail::shape_str(weight.shape()) + ")");
  if (bias.rank() != 1 || bias.dim(0) != Cout)
    detail::fail("pointwise_linear: bias " + detail::shape_str(bias.shape()) + " for weight " +
                 detail::shape_str(weight.shape()));
  const std::size_t R = input.numel() / static_cast<std::size_t>(Cin);
  std::vector<int> out_shape = input.shape();
  out_shape.back() = Cout;
  auto out = Tensor<S>::zeros(std::move(out_shape));
  const S* in = input.data().data();
  const S* w = weight.data().data();
  const S* bvec = bias.data().data();
  S* o = out.data().data();
  for (std::size_t rIdx = 0; rIdx < R; ++rIdx) {
    const S* xr = in + rIdx * Cin;
    S* orow = o + rIdx * Cout;
    std::copy(bvec, bvec + Cout, orow);
    for (int k = 0; k < Cin; ++k) {
      const S a = xr[k];
      if (a == S(0)) continue;
      const S* wk = w + static_cast<std::size_t>(k) * Cout;
      for (int c = 0; c < Cout; ++c) orow[c] += a * wk[c];
    }
  }
  if (detail::recording<S>({&input, &weight, &bias})) {
    auto xp = input.node(), wp = weight.node(), bp = bias.node();
    detail::record(out, {xp, wp, bp}, [xp, wp, bp, R, Cin, Cout](const TensorNode<S>& self) {
      const S* g = self.grad.data();
      const S* in = xp->data.data();
      const S* w = wp->data.data();
      for (std::size_t r = 0; r < R; ++r) {
        const S* gr = g + r * Cout;
        const S* xr = in + r * Cin;
        if (bp->requires_grad) {
          S* db = bp->grad.data();
          for (int c = 0; c < Cout; ++c) db[c] += gr[c];
        }
        if (wp->requires_grad) {
          S* dw = wp->grad.data();
          for (int k = 0; k < Cin; ++k) {
            const S a = xr[k];
            if (a == S(0)) continue;
            S* dwk = dw + static_cast<std::size_t>(k) * Cout;
            for (int c = 0; c < Cout; ++c) dwk[c] += a * gr[c];
          }
        }
        if (xp->requires_grad) {
          S* dx = xp->grad.data() + r * Cin;
          for (int k = 0; k < Cin; ++k) {
            const S* wk = w + static_cast<std::size_t>(k) * Cout;
            S acc = S(0);
            for (int c = 0; c < Cout; ++c) acc += gr[c] * wk[c];
            dx[k] += acc;
          }
        }
      }
    });
  }
  return out;
}

// Causal width-3 convolution along the second-to-last axis. kernel is
// [3, Cin, Cout]; tap 2 reads the current position, taps 1 and 0 read one and
// two steps back (missing history is zero padding), so position t never sees
// positions > t.
template <typename S>
Tensor<S> causal_conv_1x3(const Tensor<S>& input, const Tensor<S>& kernel,
                          const Tensor<S>& bias) {
  if (kernel.rank() != 3 || kernel.dim(0) != 3)
    detail::fail("causal_conv_1x3: kernel must be [3,in,out], got " +
                 detail::shape_str(kernel.shape()));
  const int Cin = kernel.dim(1), Cout = kernel.dim(2);
  if (input.rank() < 2 || input.dim(input.rank() - 1) != Cin)
    detail::fail("causal_conv_1x3: input " + detail::shape_str(input.shape()) +
                 " does not end in [T," + std::to_string(Cin) + "] (kernel " +
                 detail::shape_str(kernel.shape()) + ")");
  if (bias.rank() != 1 || bias.dim(0) != Cout)
    detail::fail("causal_conv_1x3: bias " + detail::shape_str(bias.shape()) + " for kernel " +
                 detail::shape_str(kernel.shape()));
  const int T = input.dim(input.rank() - 2);
  const std::size_t R = input.numel() / (static_cast<std::size_t>(T) * Cin);
  std::vector<int> out_shape = input.shape();
  out_shape.back() = Cout;
  auto out = Tensor<S>::zeros(std::move(out_shape));
  const S* in = input.data().data();
  const S* ker = kernel.data().data();
  const S* bvec = bias.data().data();
  S* o = out.data().data();
  for (std::size_t r = 0; r < R; ++r) {
    const S* rin = in + r * static_cast<std::size_t>(T) * Cin;
    S* rout = o + r * static_cast<std::size_t>(T) * Cout;
    for (int t = 0; t < T; ++t) {
      S* ot = rout + static_cast<std::size_t>(t) * Cout;
      std::copy(bvec, bvec + Cout, ot);
      for (int tap = 0; tap < 3; ++tap) {
        const int src = t - 2 + tap;
        if (src < 0) continue;
        const S* xs = rin + static_cast<std::size_t>(src) * Cin;
        const S* ktap = ker + static_cast<std::size_t>(tap) * Cin * Cout;
        for (int k = 0; k < Cin; ++k) {
          const S a = xs[k];
          if (a == S(0)) continue;
          const S* kk = ktap + static_cast<std::size_t>(k) * Cout;
          for (int c = 0; c < Cout; ++c) ot[c] += a * kk[c];
        }
      }
    }
  }
  if (detail::recording<S>({&input, &kernel, &bias})) {
    auto xp = input.node(), kp = kernel.node(), bp = bias.node();
    detail::record(out, {xp, kp, bp}, [xp, kp, bp, R, T, Cin, Cout](const TensorNode<S>& self) {
      const S* g = self.grad.data();
      const S* in = xp->data.data();
      const S* ker = kp->data.data();
      for (std::size_t r = 0; r < R; ++r) {
        const S* rin = in + r * static_cast<std::size_t>(T) * Cin;
        const S* rg = g + r * static_cast<std::size_t>(T) * Cout;
        S* rdx = xp->requires_grad ? xp->grad.data() + r * static_cast<std::size_t>(T) * Cin
                                   : nullptr;
        for (int t = 0; t < T; ++t) {
          const S* gt = rg + static_cast<std::size_t>(t) * Cout;
          if (bp->requires_grad) {
            S* db = bp->grad.data();
            for (int c = 0; c < Cout; ++c) db[c] += gt[c];
          }
          for (int tap = 0; tap < 3; ++tap) {
            const int src = t - 2 + tap;
            if (src < 0) continue;
            const S* xs = rin + static_cast<std::size_t>(src) * Cin;
            const S* ktap = ker + static_cast<std::size_t>(tap) * Cin * Cout;
            if (kp->requires_grad) {
              S* dk = kp->grad.data() + static_cast<std::size_t>(tap) * Cin * Cout;
              for (int k = 0; k < Cin; ++k) {
                const S a = xs[k];
                if (a == S(0)) continue;
                S* dkk = dk + static_cast<std::size_t>(k) * Cout;
                for (int c = 0; c < Cout; ++c) dkk[c] += a * gt[c];
              }
            }
            if (rdx) {
              S* dxs = rdx + static_cast<std::size_t>(src) * Cin;
              for (int k = 0; k < Cin; ++k) {
                const S* kk = ktap + static_cast<std::size_t>(k) * Cout;
                S acc = S(0);
                for (int c = 0; c < Cout; ++c) acc += gt[c] * kk[c];
                dxs[k] += acc;
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

// Normalizes over the leading `norm_axes` axes; every combination of the
// remaining (trailing) axes keeps its own statistics. The last axis is the
// channel axis: scale/shift and the running statistics are per channel.
// Train mode uses batch statistics (biased variance) and folds per-channel
// statistics into the running buffers with `running = momentum * running +
// (1 - momentum) * batch`; eval mode normalizes per channel with the running
// buffers only, so it is independent of batch composition.
template <typename S>
Tensor<S> batch_norm(const Tensor<S>& input, const Tensor<S>& scale, const Tensor<S>& shift,
                     std::vector<S>& running_mean, std::vector<S>& running_var, int norm_axes,
                     bool train, S momentum = S(0.9), S eps = S(1e-5)) {
  const int r = input.rank();
  if (norm_axes < 1 || norm_axes >= r)
    detail::fail("batch_norm: norm_axes " + std::to_string(norm_axes) + " for rank " +
                 std::to_string(r));
  const int C = input.dim(r - 1);
  if (scale.rank() != 1 || scale.dim(0) != C || shift.rank() != 1 || shift.dim(0) != C)
    detail::fail("batch_norm: scale/shift must be [" + std::to_string(C) + "]");
  if (static_cast<int>(running_mean.size()) != C || static_cast<int>(running_var.size()) != C)
    detail::fail("batch_norm: running stats must have " + std::to_string(C) + " channels");
  std::size_t rows = 1, G = 1;
  for (int a = 0; a < norm_axes; ++a) rows *= static_cast<std::size_t>(input.dim(a));
  for (int a = norm_axes; a < r; ++a) G *= static_cast<std::size_t>(input.dim(a));
  if (rows == 0 || G == 0) detail::fail("batch_norm: empty tensor");

  auto out = Tensor<S>::zeros(input.shape());
  const S* x = input.data().data();
  const S* gamma = scale.data().data();
  const S* beta = shift.data().data();
  S* y = out.data().data();

  if (train) {
    // double accumulators keep the statistics stable and make them invariant
    // to permutations of the population up to the final rounding
    std::vector<double> sum(G, 0.0), sumsq(G, 0.0);
    for (std::size_t row = 0; row < rows; ++row) {
      const S* xr = x + row * G;
      for (std::size_t g = 0; g < G; ++g) {
        const double v = static_cast<double>(xr[g]);
        sum[g] += v;
        sumsq[g] += v * v;
      }
    }
    std::vector<S> mean(G), inv_std(G);
    const double m = static_cast<double>(rows);
    for (std::size_t g = 0; g < G; ++g) {
      const double mu = sum[g] / m;
      double var = sumsq[g] / m - mu * mu;
      if (var < 0) var = 0;
      mean[g] = static_cast<S>(mu);
      inv_std[g] = static_cast<S>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    }
    // per-channel statistics for the running buffers
    {
      std::vector<double> csum(static_cast<std::size_t>(C), 0.0),
          csumsq(static_cast<std::size_t>(C), 0.0);
      for (std::size_t g = 0; g < G; ++g) {
        csum[g % C] += sum[g];
        csumsq[g % C] += sumsq[g];
      }
      const double mc = m * static_cast<double>(G / C);
      for (int c = 0; c < C; ++c) {
        const double mu = csum[static_cast<std::size_t>(c)] / mc;
        double var = csumsq[static_cast<std::size_t>(c)] / mc - mu * mu;
        if (var < 0) var = 0;
        running_mean[static_cast<std::size_t>(c)] =
            momentum * running_mean[static_cast<std::size_t>(c)] + (S(1) - momentum) * static_cast<S>(mu);
        running_var[static_cast<std::size_t>(c)] =
            momentum * running_var[static_cast<std::size_t>(c)] + (S(1) - momentum) * static_cast<S>(var);
      }
    }
    std::vector<S> xhat(input.numel());
    for (std::size_t row = 0; row < rows; ++row) {
      const S* xr = x + row * G;
      S* yr = y + row * G;
      S* hr = xhat.data() + row * G;
      for (std::size_t g = 0; g < G; ++g) {
        const S h = (xr[g] - mean[g]) * inv_std[g];
        hr[g] = h;
        yr[g] = gamma[g % C] * h + beta[g % C];
      }
    }
    if (detail::recording<S>({&input, &scale, &shift})) {
      auto xp = input.node(), sp = scale.node(), hp = shift.node();
      detail::record(out, {xp, sp, hp},
                     [xp, sp, hp, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, G,
                      C](const TensorNode<S>& self) {
        const S* g = self.grad.data();
        const double m = static_cast<double>(rows);
        std::vector<double> sdy(G, 0.0), sdyh(G, 0.0);
        for (std::size_t row = 0; row < rows; ++row) {
          const S* gr = g + row * G;
          const S* hr = xhat.data() + row * G;
          for (std::size_t q = 0; q < G; ++q) {
            sdy[q] += static_cast<double>(gr[q]);
            sdyh[q] += static_cast<double>(gr[q]) * static_cast<double>(hr[q]);
          }
        }
        if (sp->requires_grad || hp->requires_grad) {
          for (std::size_t q = 0; q < G; ++q) {
            if (sp->requires_grad) sp->grad[q % C] += static_cast<S>(sdyh[q]);
            if (hp->requires_grad) hp->grad[q % C] += static_cast<S>(sdy[q]);
          }
        }
        if (xp->requires_grad) {
          const S* gamma = sp->data.data();
          for (std::size_t row = 0; row < rows; ++row) {
            const S* gr = g + row * G;
            const S* hr = xhat.data() + row * G;
            S* dx = xp->grad.data() + row * G;
            for (std::size_t q = 0; q < G; ++q) {
              const double centered = static_cast<double>(gr[q]) - sdy[q] / m -
                                      static_cast<double>(hr[q]) * (sdyh[q] / m);
              dx[q] += gamma[q % C] * inv_std[q] * static_cast<S>(centered);
            }
          }
        }
      });
    }
    return out;
  }

  // eval: per-channel affine transform from the running buffers
  std::vector<S> rm = running_mean, rinv(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c)
    rinv[static_cast<std::size_t>(c)] =
        S(1) / static_cast<S>(std::sqrt(static_cast<double>(running_var[static_cast<std::size_t>(c)]) +
                                        static_cast<double>(eps)));
  const std::size_t N = input.numel();
  for (std::size_t i = 0; i < N; ++i) {
    const int c = static_cast<int>(i % C);
    y[i] = gamma[c] * (x[i] - rm[static_cast<std::size_t>(c)]) * rinv[static_cast<std::size_t>(c)] +
           beta[c];
  }
  if (detail::recording<S>({&input, &scale, &shift})) {
    auto xp = input.node(), sp = scale.node(), hp = shift.node();
    detail::record(out, {xp, sp, hp},
                   [xp, sp, hp, rm = std::move(rm), rinv = std::move(rinv), C](const TensorNode<S>& self) {
      const S* g = self.grad.data();
      const S* gamma = sp->data.data();
      const S* x = xp->data.data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const int c = static_cast<int>(i % C);
        if (xp->requires_grad) xp->grad[i] += g[i] * gamma[c] * rinv[static_cast<std::size_t>(c)];
        if (sp->requires_grad)
          sp->grad[c] += g[i] * (x[i] - rm[static_cast<std::size_t>(c)]) * rinv[static_cast<std::size_t>(c)];
        if (hp->requires_grad) hp->grad[c] += g[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

// Mean cross entropy between softmax(logits) and integer targets over all
// leading positions. logits: [..., I]; targets: one class index per row.
// exclude_mask (same shape as logits, nonzero = excluded) removes classes
// from the softmax support; a target pointing at an excluded class is a
// contract violation. Stabilized by max subtraction.
template <typename S>
Tensor<S> masked_softmax_cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                                       const std::vector<std::uint8_t>* exclude_mask = nullptr) {
  if (logits.rank() < 1) detail::fail("masked_softmax_cross_entropy: scalar logits");
  const int I = logits.dim(logits.rank() - 1);
  const std::size_t R = logits.numel() / static_cast<std::size_t>(I);
  if (R == 0 || I == 0) detail::fail("masked_softmax_cross_entropy: empty logits");
  if (targets.size() != R)
    detail::fail("masked_softmax_cross_entropy: " + std::to_string(targets.size()) +
                 " targets for " + std::to_string(R) + " rows");
  if (exclude_mask && exclude_mask->size() != logits.numel())
    detail::fail("masked_softmax_cross_entropy: mask size " + std::to_string(exclude_mask->size()) +
                 " for logits " + detail::shape_str(logits.shape()));
  const S* l = logits.data().data();
  std::vector<S> probs(logits.numel(), S(0));  // masked entries stay 0
  double total = 0;
  for (std::size_t row = 0; row < R; ++row) {
    const S* lr = l + row * I;
    const std::uint8_t* mr = exclude_mask ? exclude_mask->data() + row * I : nullptr;
    const int tgt = targets[row];
    if (tgt < 0 || tgt >= I)
      detail::fail("masked_softmax_cross_entropy: target " + std::to_string(tgt) +
                   " out of range for " + std::to_string(I) + " classes (row " +
                   std::to_string(row) + ")");
    if (mr && mr[tgt])
      detail::fail("masked_softmax_cross_entropy: target " + std::to_string(tgt) +
                   " is excluded by the mask (row " + std::to_string(row) + ")");
    S mx = lr[tgt];
    for (int j = 0; j < I; ++j) {
      if (mr && mr[j]) continue;
      if (lr[j] > mx) mx = lr[j];
    }
    double z = 0;
    for (int j = 0; j < I; ++j) {
      if (mr && mr[j]) continue;
      z += std::exp(static_cast<double>(lr[j] - mx));
    }
    const double lse = static_cast<double>(mx) + std::log(z);
    total += lse - static_cast<double>(lr[tgt]);
    S* pr = probs.data() + row * I;
    for (int j = 0; j < I; ++j) {
      if (mr && mr[j]) continue;
      pr[j] = static_cast<S>(std::exp(static_cast<double>(lr[j] - mx)) / z);
    }
  }
  auto out = Tensor<S>::scalar(static_cast<S>(total / static_cast<double>(R)));
  if (detail::recording<S>({&logits})) {
    auto lp = logits.node();
    detail::record(out, {lp},
                   [lp, probs = std::move(probs), targets, R, I](const TensorNode<S>& self) {
      const S g = self.grad[0] / static_cast<S>(R);
      for (std::size_t row = 0; row < R; ++row) {
        S* dl = lp->grad.data() + row * I;
        const S* pr = probs.data() + row * I;
        for (int j = 0; j < I; ++j) dl[j] += g * pr[j];
        dl[targets[row]] -= g;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

// Reverse-mode sweep from a scalar loss. Seeds d loss/d loss = 1, runs every
// recorded closure in reverse topological order, then frees the tape (parent
// links and closures), so a second call on the same graph is an error.
// Gradients accumulate into leaves; callers zero them between steps.
template <typename S>
void backward(const Tensor<S>& loss) {
  if (loss.numel() != 1)
    detail::fail("backward: loss must be scalar, got " + detail::shape_str(loss.shape()));
  auto root = loss.node();
  if (root->consumed)
    detail::fail("backward: this graph has already been consumed");
  if (!root->backward_fn) {
    // constant or leaf: nothing upstream, just seed its own grad
    root->ensure_grad();
    root->grad[0] += S(1);
    return;
  }
  std::vector<std::pair<TensorNode<S>*, bool>> order;  // (node, interior)
  std::unordered_set<TensorNode<S>*> seen{root.get()};
  std::vector<std::pair<TensorNode<S>*, std::size_t>> stack{{root.get(), 0}};
  while (!stack.empty()) {
    TensorNode<S>* node = stack.back().first;
    const std::size_t next = stack.back().second;
    if (next < node->parents.size()) {
      ++stack.back().second;
      TensorNode<S>* p = node->parents[next].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back({node, node->backward_fn != nullptr});
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (it->second) it->first->backward_fn(*it->first);
  // free the tape; interior nodes cannot be swept through again
  for (auto& [node, interior] : order) {
    if (!interior) continue;
    node->backward_fn = nullptr;
    node->parents.clear();
    node->consumed = true;
  }
}

}  // namespace ordernet
