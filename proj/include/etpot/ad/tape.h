#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "etpot/ad/tensor.h"

namespace etpot::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Affine,
  MatMul,
  Transpose,
  Reshape,
  Sum,
  Expand,
  Concat,
  Slice,
  Pad,
  Gather,
  ScatterAdd,
  SiLU,
  Sigmoid,
  Cos,
  Sin,
  Exp,
  Square,
  Sqrt,
  SafeRecip,
  Norm,
};

std::string_view op_name(OpKind kind);

/// Shared, immutable row index list for gather/scatter.
using Index = std::shared_ptr<const std::vector<std::size_t>>;
Index make_index(std::vector<std::size_t> rows);

class Tape;

/// Handle to one node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }

  // Returned by value: recording more ops may reallocate tape storage.
  Tensor value() const;
  Shape shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

struct NodeAttrs {
  std::size_t axis = 0;
  std::size_t a = 0;
  std::size_t b = 0;
  double c0 = 0.0;
  double c1 = 0.0;
  Index index;
};

/// Gradients of one root with respect to every differentiable leaf.
class GradientMap {
 public:
  bool contains(Var leaf) const { return grads_.count(leaf.id()) > 0; }
  const Tensor& at(Var leaf) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<int, Tensor> grads_;
};

/// Reverse-mode autodiff record.
///
/// Every op evaluates eagerly and appends a node, so inputs always precede
/// their consumers. Backward passes are themselves recorded as ops on the same
/// tape, which makes gradients differentiable: a force computed with grad()
/// can be used inside a loss and differentiated again with respect to the
/// parameters. A tape is single-threaded; use one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  OpKind kind(int id) const { return nodes_.at(id).kind; }
  const Tensor& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  std::span<const int> inputs(int id) const { return nodes_.at(id).inputs; }

  /// d(root)/d(w) for each w, as differentiable Vars on this tape. Nodes with
  /// no path to root get zero constants. Root must hold a single element.
  std::vector<Var> grad(Var root, std::span<const Var> wrt);

  /// Numeric gradients for every leaf created with requires_grad.
  GradientMap backward(Var root);

  /// Appends a node. Used by the op functions; checks finiteness.
  Var record(OpKind kind, std::vector<int> inputs, Tensor value, NodeAttrs attrs = {});

 private:
  struct Node {
    OpKind kind;
    bool requires_grad;
    std::vector<int> inputs;
    Tensor value;
    NodeAttrs attrs;
  };

  void propagate(int id, Var upstream, std::vector<Var>& grads,
                 const std::vector<char>& reach);

  std::vector<Node> nodes_;
};

// Elementwise binary ops. `b` may be lower-rank than `a` when its shape equals
// the trailing dimensions of `a` (leading-axis expansion); nothing else
// broadcasts implicitly.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

/// scale * x + shift
Var affine(Var x, double scale, double shift);
inline Var scale(Var x, double factor) { return affine(x, factor, 0.0); }
inline Var neg(Var x) { return affine(x, -1.0, 0.0); }

/// 2-D only.
Var matmul(Var a, Var b);
Var transpose(Var x);
Var reshape(Var x, Shape shape);

/// Reduces (removes) `axis`.
Var sum(Var x, std::size_t axis);
Var sum_all(Var x);
Var mean(Var x, std::size_t axis);
/// Inserts a new axis of length n at `axis` by repetition (explicit broadcast).
Var expand(Var x, std::size_t axis, std::size_t n);

Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
/// Zero-pads `x` along `axis` into a length-`total` axis starting at `before`.
Var pad(Var x, std::size_t axis, std::size_t before, std::size_t total);

/// out[k] = x[index[k]] along the first axis.
Var gather_rows(Var x, Index index);
/// out[index[k]] += x[k]; out has `rows` rows.
Var scatter_add_rows(Var x, Index index, std::size_t rows);

Var silu(Var x);
Var sigmoid(Var x);
Var cos(Var x);
Var sin(Var x);
Var exp(Var x);
Var square(Var x);
Var sqrt(Var x);
/// 1/x, defined as 0 at x == 0 (derivative likewise 0 there).
Var safe_recip(Var x);
/// Euclidean norm over `axis` (removed). Gradient at a zero vector is 0.
Var l2_norm(Var x, std::size_t axis);

/// Normalizes over the last axis: (x - mean) / sqrt(var + eps), population
/// variance. Constant rows map to zero.
Var layer_norm(Var x, double eps = 1e-5);

}  // namespace etpot::ad
