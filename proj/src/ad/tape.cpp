#include "etpot/ad/tape.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace etpot::ad {

namespace {

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
  return *a.tape();
}

Tape& same_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw std::invalid_argument("Vars belong to different tapes");
  return t;
}

void check_axis(const Shape& shape, std::size_t axis, std::string_view op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for " + shape_string(shape));
  }
}

// b must equal the trailing dims of a.
void check_suffix(const Shape& a, const Shape& b, std::string_view op) {
  bool ok = b.size() <= a.size() &&
            std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size()));
  if (!ok) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a) + " and " +
                     shape_string(b) + " do not conform");
  }
}

template <typename F>
Var binary(OpKind kind, Var a, Var b, F f) {
  Tape& t = same_tape(a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  check_suffix(x.shape(), y.shape(), op_name(kind));
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  std::vector<double> out(n);
  auto xv = x.values();
  auto yv = y.values();
  if (n == m) {
    for (std::size_t k = 0; k < n; ++k) out[k] = f(xv[k], yv[k]);
  } else {
    for (std::size_t base = 0; base < n; base += m) {
      for (std::size_t k = 0; k < m; ++k) out[base + k] = f(xv[base + k], yv[k]);
    }
  }
  return t.record(kind, {a.id(), b.id()}, Tensor(x.shape(), std::move(out)));
}

template <typename F>
Var unary(OpKind kind, Var a, F f, NodeAttrs attrs = {}) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(xv[k]);
  return t.record(kind, {a.id()}, Tensor(x.shape(), std::move(out)), std::move(attrs));
}

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Sums `g` over leading axes down to `target` (adjoint of suffix broadcast).
Var reduce_to(Var g, Shape target) {
  if (g.shape() == target) return g;
  const std::size_t inner = shape_size(target);
  const std::size_t outer = g.value().size() / inner;
  return reshape(sum(reshape(g, {outer, inner}), 0), target);
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "subtract";
    case OpKind::Mul: return "multiply";
    case OpKind::Div: return "divide";
    case OpKind::Affine: return "affine";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Reshape: return "reshape";
    case OpKind::Sum: return "sum";
    case OpKind::Expand: return "expand";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Pad: return "pad";
    case OpKind::Gather: return "gather_rows";
    case OpKind::ScatterAdd: return "scatter_add_rows";
    case OpKind::SiLU: return "silu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Cos: return "cos";
    case OpKind::Sin: return "sin";
    case OpKind::Exp: return "exp";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::SafeRecip: return "safe_recip";
    case OpKind::Norm: return "l2_norm";
  }
  return "unknown";
}

Index make_index(std::vector<std::size_t> rows) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(rows));
}

Tensor Var::value() const {
  if (!tape_) throw std::invalid_argument("value() on an empty Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const {
  return tape_ != nullptr && tape_->requires_grad(id_);
}

const Tensor& GradientMap::at(Var leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) throw std::out_of_range("no gradient recorded for leaf");
  return it->second;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("leaf tensor contains NaN or Inf");
  nodes_.push_back({OpKind::Leaf, requires_grad, {}, std::move(value), {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(OpKind kind, std::vector<int> inputs, Tensor value, NodeAttrs attrs) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string(op_name(kind)) + " produced a non-finite value");
  }
  bool rg = false;
  for (int id : inputs) rg = rg || nodes_[id].requires_grad;
  nodes_.push_back({kind, rg, std::move(inputs), std::move(value), std::move(attrs)});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::vector<Var> Tape::grad(Var root, std::span<const Var> wrt) {
  if (nodes_.empty()) throw std::invalid_argument("backward on an empty tape");
  if (root.tape() != this) throw std::invalid_argument("root is not on this tape");
  if (root.value().size() != 1) {
    throw ShapeError("backward root must be scalar, got shape " +
                     shape_string(root.shape()));
  }
  const int n = root.id() + 1;

  // reach[i]: node i depends on one of the requested nodes.
  std::vector<char> reach(n, 0);
  for (const Var& w : wrt) {
    if (w.tape() != this) throw std::invalid_argument("wrt Var is not on this tape");
    if (w.id() < n) reach[w.id()] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (reach[i] || !nodes_[i].requires_grad) continue;
    for (int in : nodes_[i].inputs) {
      if (reach[in]) {
        reach[i] = 1;
        break;
      }
    }
  }

  std::vector<Var> grads(n);
  if (reach[root.id()]) {
    grads[root.id()] = constant(Tensor::filled(root.shape(), 1.0));
  }
  for (int i = n - 1; i >= 0; --i) {
    if (!reach[i] || !grads[i].valid()) continue;
    if (nodes_[i].kind == OpKind::Leaf) continue;
    propagate(i, grads[i], grads, reach);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() < n && grads[w.id()].valid()) {
      out.push_back(grads[w.id()]);
    } else {
      out.push_back(constant(Tensor::zeros(w.shape())));
    }
  }
  return out;
}

GradientMap Tape::backward(Var root) {
  if (nodes_.empty()) throw std::invalid_argument("backward on an empty tape");
  std::vector<Var> leaves;
  for (int i = 0; i <= root.id() && i < static_cast<int>(nodes_.size()); ++i) {
    if (nodes_[i].kind == OpKind::Leaf && nodes_[i].requires_grad) {
      leaves.push_back(Var(this, i));
    }
  }
  auto grads = grad(root, leaves);
  GradientMap map;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    map.grads_.emplace(leaves[k].id(), grads[k].value());
  }
  return map;
}

void Tape::propagate(int id, Var g, std::vector<Var>& grads,
                     const std::vector<char>& reach) {
  // Copy what we need: recording new nodes may reallocate nodes_.
  const OpKind kind = nodes_[id].kind;
  const std::vector<int> in = nodes_[id].inputs;
  const NodeAttrs attrs = nodes_[id].attrs;
  const Var out(this, id);

  auto accumulate = [&](int target, Var contribution) {
    if (!reach[target]) return;
    grads[target] = grads[target].valid() ? add(grads[target], contribution) : contribution;
  };
  auto wants = [&](std::size_t k) { return reach[in[k]] != 0; };
  auto input = [&](std::size_t k) { return Var(this, in[k]); };

  switch (kind) {
    case OpKind::Leaf:
      break;
    case OpKind::Add:
      if (wants(0)) accumulate(in[0], g);
      if (wants(1)) accumulate(in[1], reduce_to(g, input(1).shape()));
      break;
    case OpKind::Sub:
      if (wants(0)) accumulate(in[0], g);
      if (wants(1)) accumulate(in[1], reduce_to(neg(g), input(1).shape()));
      break;
    case OpKind::Mul:
      if (wants(0)) accumulate(in[0], mul(g, input(1)));
      if (wants(1)) accumulate(in[1], reduce_to(mul(g, input(0)), input(1).shape()));
      break;
    case OpKind::Div:
      if (wants(0)) accumulate(in[0], div(g, input(1)));
      if (wants(1)) {
        accumulate(in[1], reduce_to(neg(mul(g, div(out, input(1)))), input(1).shape()));
      }
      break;
    case OpKind::Affine:
      accumulate(in[0], scale(g, attrs.c0));
      break;
    case OpKind::MatMul:
      if (wants(0)) accumulate(in[0], matmul(g, transpose(input(1))));
      if (wants(1)) accumulate(in[1], matmul(transpose(input(0)), g));
      break;
    case OpKind::Transpose:
      accumulate(in[0], transpose(g));
      break;
    case OpKind::Reshape:
      accumulate(in[0], reshape(g, input(0).shape()));
      break;
    case OpKind::Sum:
      accumulate(in[0], expand(g, attrs.axis, input(0).dim(attrs.axis)));
      break;
    case OpKind::Expand:
      accumulate(in[0], sum(g, attrs.axis));
      break;
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        std::size_t len = input(k).dim(attrs.axis);
        if (wants(k)) accumulate(in[k], slice(g, attrs.axis, offset, len));
        offset += len;
      }
      break;
    }
    case OpKind::Slice:
      accumulate(in[0], pad(g, attrs.axis, attrs.a, input(0).dim(attrs.axis)));
      break;
    case OpKind::Pad:
      accumulate(in[0], slice(g, attrs.axis, attrs.a, input(0).dim(attrs.axis)));
      break;
    case OpKind::Gather:
      accumulate(in[0], scatter_add_rows(g, attrs.index, input(0).dim(0)));
      break;
    case OpKind::ScatterAdd:
      accumulate(in[0], gather_rows(g, attrs.index));
      break;
    case OpKind::SiLU: {
      // d/dx x*s(x) = s + x*s*(1-s)
      Var x = input(0);
      Var s = sigmoid(x);
      Var d = add(s, mul(x, mul(s, affine(s, -1.0, 1.0))));
      accumulate(in[0], mul(g, d));
      break;
    }
    case OpKind::Sigmoid:
      accumulate(in[0], mul(g, mul(out, affine(out, -1.0, 1.0))));
      break;
    case OpKind::Cos:
      accumulate(in[0], neg(mul(g, sin(input(0)))));
      break;
    case OpKind::Sin:
      accumulate(in[0], mul(g, cos(input(0))));
      break;
    case OpKind::Exp:
      accumulate(in[0], mul(g, out));
      break;
    case OpKind::Square:
      accumulate(in[0], mul(g, scale(input(0), 2.0)));
      break;
    case OpKind::Sqrt:
      accumulate(in[0], mul(g, scale(safe_recip(out), 0.5)));
      break;
    case OpKind::SafeRecip:
      accumulate(in[0], neg(mul(g, square(out))));
      break;
    case OpKind::Norm: {
      Var x = input(0);
      Var coef = expand(mul(g, safe_recip(out)), attrs.axis, x.dim(attrs.axis));
      accumulate(in[0], mul(x, coef));
      break;
    }
  }
}

Var add(Var a, Var b) {
  return binary(OpKind::Add, a, b, [](double x, double y) { return x + y; });
}

Var sub(Var a, Var b) {
  return binary(OpKind::Sub, a, b, [](double x, double y) { return x - y; });
}

Var mul(Var a, Var b) {
  return binary(OpKind::Mul, a, b, [](double x, double y) { return x * y; });
}

Var div(Var a, Var b) {
  return binary(OpKind::Div, a, b, [](double x, double y) { return x / y; });
}

Var affine(Var x, double factor, double shift) {
  NodeAttrs attrs;
  attrs.c0 = factor;
  attrs.c1 = shift;
  return unary(OpKind::Affine, x, [=](double v) { return factor * v + shift; }, attrs);
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor x = a.value();
  const Tensor y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_string(x.shape()) + " by " +
                     shape_string(y.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = xv[i * k + p];
      if (s == 0.0) continue;
      const double* yrow = yv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * yrow[j];
    }
  }
  return t.record(OpKind::MatMul, {a.id(), b.id()}, Tensor({m, n}, std::move(out)));
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_string(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  }
  return t.record(OpKind::Transpose, {a.id()}, Tensor({n, m}, std::move(out)));
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  return t.record(OpKind::Reshape, {a.id()}, a.value().reshaped(std::move(shape)));
}

Var sum(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  check_axis(x.shape(), axis, "sum");
  const auto s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.length; ++k) {
      const double* src = xv.data() + (o * s.length + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<long>(axis));
  NodeAttrs attrs;
  attrs.axis = axis;
  return t.record(OpKind::Sum, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var sum_all(Var x) { return sum(reshape(x, {x.value().size()}), 0); }

Var mean(Var x, std::size_t axis) {
  check_axis(x.shape(), axis, "mean");
  return scale(sum(x, axis), 1.0 / static_cast<double>(x.dim(axis)));
}

Var expand(Var a, std::size_t axis, std::size_t n) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  if (axis > x.rank()) {
    throw ShapeError("expand: axis " + std::to_string(axis) + " out of range for " +
                     shape_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (std::size_t i = axis; i < x.rank(); ++i) inner *= x.shape()[i];
  std::vector<double> out(outer * n * inner);
  auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + o * inner;
    for (std::size_t k = 0; k < n; ++k) {
      std::copy(src, src + inner, out.data() + (o * n + k) * inner);
    }
  }
  Shape shape = x.shape();
  shape.insert(shape.begin() + static_cast<long>(axis), n);
  NodeAttrs attrs;
  attrs.axis = axis;
  attrs.a = n;
  return t.record(OpKind::Expand, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = tape_of(parts[0]);
  const Shape ref = parts[0].shape();
  check_axis(ref, axis, "concat");
  std::size_t total = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("Vars belong to different tapes");
    const Shape s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == ref[i];
    if (!ok) {
      throw ShapeError("concat: " + shape_string(s) + " does not conform to " +
                       shape_string(ref));
    }
    total += s[axis];
    ids.push_back(p.id());
  }
  Shape shape = ref;
  shape[axis] = total;
  const auto s = split_at(shape, axis);
  std::vector<double> out(shape_size(shape));
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t len = p.dim(axis);
    auto pv = p.value().values();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy(pv.data() + o * len * s.inner, pv.data() + (o + 1) * len * s.inner,
                out.data() + (o * total + offset) * s.inner);
    }
    offset += len;
  }
  NodeAttrs attrs;
  attrs.axis = axis;
  return t.record(OpKind::Concat, std::move(ids), Tensor(std::move(shape), std::move(out)), attrs);
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  check_axis(x.shape(), axis, "slice");
  if (start + length > x.dim(axis)) {
    throw ShapeError("slice: [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") exceeds axis length " +
                     std::to_string(x.dim(axis)));
  }
  const auto s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * length * s.inner);
  auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = xv.data() + (o * s.length + start) * s.inner;
    std::copy(src, src + length * s.inner, out.data() + o * length * s.inner);
  }
  Shape shape = x.shape();
  shape[axis] = length;
  NodeAttrs attrs;
  attrs.axis = axis;
  attrs.a = start;
  attrs.b = length;
  return t.record(OpKind::Slice, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var pad(Var a, std::size_t axis, std::size_t before, std::size_t total) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  check_axis(x.shape(), axis, "pad");
  const auto s = split_at(x.shape(), axis);
  if (before + s.length > total) throw ShapeError("pad: target axis too short");
  std::vector<double> out(s.outer * total * s.inner, 0.0);
  auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = xv.data() + o * s.length * s.inner;
    std::copy(src, src + s.length * s.inner, out.data() + (o * total + before) * s.inner);
  }
  Shape shape = x.shape();
  shape[axis] = total;
  NodeAttrs attrs;
  attrs.axis = axis;
  attrs.a = before;
  attrs.b = total;
  return t.record(OpKind::Pad, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var gather_rows(Var a, Index index) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  if (x.rank() == 0) throw ShapeError("gather_rows: rank-0 input");
  const std::size_t rows = x.dim(0);
  const std::size_t inner = x.size() / std::max<std::size_t>(rows, 1);
  std::vector<double> out(index->size() * inner);
  auto xv = x.values();
  for (std::size_t k = 0; k < index->size(); ++k) {
    const std::size_t r = (*index)[k];
    if (r >= rows) throw ShapeError("gather_rows: index " + std::to_string(r) + " >= " + std::to_string(rows));
    std::copy(xv.data() + r * inner, xv.data() + (r + 1) * inner, out.data() + k * inner);
  }
  Shape shape = x.shape();
  shape[0] = index->size();
  NodeAttrs attrs;
  attrs.index = std::move(index);
  return t.record(OpKind::Gather, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var scatter_add_rows(Var a, Index index, std::size_t rows) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  if (x.rank() == 0 || x.dim(0) != index->size()) {
    throw ShapeError("scatter_add_rows: " + shape_string(x.shape()) + " vs " +
                     std::to_string(index->size()) + " indices");
  }
  const std::size_t inner = index->empty() ? shape_size(Shape(x.shape().begin() + 1, x.shape().end()))
                                           : x.size() / index->size();
  std::vector<double> out(rows * inner, 0.0);
  auto xv = x.values();
  for (std::size_t k = 0; k < index->size(); ++k) {
    const std::size_t r = (*index)[k];
    if (r >= rows) throw ShapeError("scatter_add_rows: index " + std::to_string(r) + " >= " + std::to_string(rows));
    const double* src = xv.data() + k * inner;
    double* dst = out.data() + r * inner;
    for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
  }
  Shape shape = x.shape();
  shape[0] = rows;
  NodeAttrs attrs;
  attrs.index = std::move(index);
  attrs.a = rows;
  return t.record(OpKind::ScatterAdd, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var silu(Var x) {
  return unary(OpKind::SiLU, x, [](double v) { return v * sigmoid_value(v); });
}

Var sigmoid(Var x) { return unary(OpKind::Sigmoid, x, sigmoid_value); }

Var cos(Var x) {
  return unary(OpKind::Cos, x, [](double v) { return std::cos(v); });
}

Var sin(Var x) {
  return unary(OpKind::Sin, x, [](double v) { return std::sin(v); });
}

Var exp(Var x) {
  return unary(OpKind::Exp, x, [](double v) { return std::exp(v); });
}

Var square(Var x) {
  return unary(OpKind::Square, x, [](double v) { return v * v; });
}

Var sqrt(Var x) {
  return unary(OpKind::Sqrt, x, [](double v) { return std::sqrt(v); });
}

Var safe_recip(Var x) {
  return unary(OpKind::SafeRecip, x, [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; });
}

Var l2_norm(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Tensor x = a.value();
  check_axis(x.shape(), axis, "l2_norm");
  const auto s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t k = 0; k < s.length; ++k) {
      const double* src = xv.data() + (o * s.length + k) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * src[i];
    }
  }
  for (double& v : out) v = std::sqrt(v);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<long>(axis));
  NodeAttrs attrs;
  attrs.axis = axis;
  return t.record(OpKind::Norm, {a.id()}, Tensor(std::move(shape), std::move(out)), attrs);
}

Var layer_norm(Var x, double eps) {
  if (x.value().rank() == 0) throw ShapeError("layer_norm: rank-0 input");
  const std::size_t last = x.value().rank() - 1;
  const std::size_t width = x.dim(last);
  Var centered = sub(x, expand(mean(x, last), last, width));
  Var variance = mean(square(centered), last);
  Var inv_std = safe_recip(sqrt(affine(variance, 1.0, eps)));
  return mul(centered, expand(inv_std, last, width));
}

}  // namespace etpot::ad
