#include <cmath>
#include <functional>
#include <string>

#include "doctest.h"
#include "etpot/ad/grad_check.h"
#include "etpot/ad/tape.h"
#include "etpot/core/rng.h"

using namespace etpot;
using namespace etpot::ad;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.5, double hi = 1.5) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Contracts the op output with fixed random weights so every output
// component contributes to the scalar being differentiated.
Var contract(Var y, const Tensor& weights) {
  Tape& t = *y.tape();
  return sum_all(mul(y, t.constant(weights)));
}

struct OpCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Var(std::span<const Var>)> op;
  Shape output_shape;
};

std::vector<OpCase> op_cases() {
  auto index = make_index({2, 0, 2, 1, 3});
  return {
      {"add", [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {3, 4})}; },
       [](auto x) { return add(x[0], x[1]); }, {3, 4}},
      {"add-broadcast", [](Rng& r) { return std::vector{random_tensor(r, {2, 3, 4}), random_tensor(r, {4})}; },
       [](auto x) { return add(x[0], x[1]); }, {2, 3, 4}},
      {"subtract", [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {4})}; },
       [](auto x) { return sub(x[0], x[1]); }, {3, 4}},
      {"multiply", [](Rng& r) { return std::vector{random_tensor(r, {2, 5}), random_tensor(r, {2, 5})}; },
       [](auto x) { return mul(x[0], x[1]); }, {2, 5}},
      {"multiply-broadcast", [](Rng& r) { return std::vector{random_tensor(r, {4, 3}), random_tensor(r, {3})}; },
       [](auto x) { return mul(x[0], x[1]); }, {4, 3}},
      {"divide", [](Rng& r) { return std::vector{random_tensor(r, {3, 3}), random_tensor(r, {3}, 0.5, 2.0)}; },
       [](auto x) { return div(x[0], x[1]); }, {3, 3}},
      {"affine", [](Rng& r) { return std::vector{random_tensor(r, {6})}; },
       [](auto x) { return affine(x[0], -1.7, 0.3); }, {6}},
      {"matmul", [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {4, 2})}; },
       [](auto x) { return matmul(x[0], x[1]); }, {3, 2}},
      {"transpose", [](Rng& r) { return std::vector{random_tensor(r, {3, 5})}; },
       [](auto x) { return transpose(x[0]); }, {5, 3}},
      {"reshape", [](Rng& r) { return std::vector{random_tensor(r, {3, 4})}; },
       [](auto x) { return reshape(x[0], {2, 6}); }, {2, 6}},
      {"sum-axis0", [](Rng& r) { return std::vector{random_tensor(r, {3, 4})}; },
       [](auto x) { return sum(x[0], 0); }, {4}},
      {"sum-axis1", [](Rng& r) { return std::vector{random_tensor(r, {2, 3, 4})}; },
       [](auto x) { return sum(x[0], 1); }, {2, 4}},
      {"sum-axis2", [](Rng& r) { return std::vector{random_tensor(r, {2, 3, 4})}; },
       [](auto x) { return sum(x[0], 2); }, {2, 3}},
      {"expand", [](Rng& r) { return std::vector{random_tensor(r, {3, 2})}; },
       [](auto x) { return expand(x[0], 1, 4); }, {3, 4, 2}},
      {"concat", [](Rng& r) { return std::vector{random_tensor(r, {2, 3}), random_tensor(r, {2, 2})}; },
       [](auto x) { return concat(x, 1); }, {2, 5}},
      {"slice", [](Rng& r) { return std::vector{random_tensor(r, {2, 6, 2})}; },
       [](auto x) { return slice(x[0], 1, 2, 3); }, {2, 3, 2}},
      {"pad", [](Rng& r) { return std::vector{random_tensor(r, {2, 3})}; },
       [](auto x) { return pad(x[0], 1, 1, 5); }, {2, 5}},
      {"gather", [](Rng& r) { return std::vector{random_tensor(r, {4, 3})}; },
       [index](auto x) { return gather_rows(x[0], index); }, {5, 3}},
      {"scatter-add", [](Rng& r) { return std::vector{random_tensor(r, {5, 2})}; },
       [index](auto x) { return scatter_add_rows(x[0], index, 4); }, {4, 2}},
      {"silu", [](Rng& r) { return std::vector{random_tensor(r, {8}, -4, 4)}; },
       [](auto x) { return silu(x[0]); }, {8}},
      {"sigmoid", [](Rng& r) { return std::vector{random_tensor(r, {8}, -4, 4)}; },
       [](auto x) { return sigmoid(x[0]); }, {8}},
      {"cos", [](Rng& r) { return std::vector{random_tensor(r, {8}, -4, 4)}; },
       [](auto x) { return cos(x[0]); }, {8}},
      {"sin", [](Rng& r) { return std::vector{random_tensor(r, {8}, -4, 4)}; },
       [](auto x) { return sin(x[0]); }, {8}},
      {"exp", [](Rng& r) { return std::vector{random_tensor(r, {8})}; },
       [](auto x) { return exp(x[0]); }, {8}},
      {"square", [](Rng& r) { return std::vector{random_tensor(r, {8})}; },
       [](auto x) { return square(x[0]); }, {8}},
      {"sqrt", [](Rng& r) { return std::vector{random_tensor(r, {8}, 0.3, 3.0)}; },
       [](auto x) { return sqrt(x[0]); }, {8}},
      {"safe-recip", [](Rng& r) { return std::vector{random_tensor(r, {8}, 0.5, 3.0)}; },
       [](auto x) { return safe_recip(x[0]); }, {8}},
      {"l2-norm", [](Rng& r) { return std::vector{random_tensor(r, {4, 3, 2})}; },
       [](auto x) { return l2_norm(x[0], 1); }, {4, 2}},
      {"layer-norm", [](Rng& r) { return std::vector{random_tensor(r, {3, 6})}; },
       [](auto x) { return layer_norm(x[0]); }, {3, 6}},
      {"mean", [](Rng& r) { return std::vector{random_tensor(r, {3, 5})}; },
       [](auto x) { return mean(x[0], 1); }, {3}},
  };
}

}  // namespace

TEST_CASE("SiLU(0) is 0 and its derivative there is 0.5") {
  Tape t;
  Var x = t.leaf(Tensor::scalar(0.0));
  Var y = silu(x);
  CHECK(y.value().item() == 0.0);
  auto g = t.backward(y);
  CHECK(g.at(x).item() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("matmul with the identity returns the input") {
  Rng rng(3);
  Tape t;
  Tensor a = random_tensor(rng, {3, 4});
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  Var out = matmul(t.leaf(a), t.constant(Tensor::matrix(4, 4, eye)));
  CHECK(out.value().identical(a));
}

TEST_CASE("layer norm of a constant row is zero") {
  Tape t;
  Var x = t.leaf(Tensor::matrix(2, 4, {3, 3, 3, 3, 1, 2, 3, 4}));
  Var y = layer_norm(x);
  for (int k = 0; k < 4; ++k) CHECK(y.value()[k] == 0.0);
  // Second row: population variance 1.25, eps 1e-5.
  CHECK(y.value()[4] == doctest::Approx(-1.5 / std::sqrt(1.25 + 1e-5)).epsilon(1e-14));
  // Gradient through a zero-variance row stays finite.
  auto g = t.backward(sum_all(square(y)));
  CHECK(g.at(x).all_finite());
}

TEST_CASE("backward of sum is all ones") {
  Rng rng(5);
  Tape t;
  Var x = t.leaf(random_tensor(rng, {2, 3}));
  auto g = t.backward(sum_all(x));
  REQUIRE(g.at(x).shape() == Shape{2, 3});
  for (double v : g.at(x).values()) CHECK(v == 1.0);
}

TEST_CASE("grad_check examples") {
  SUBCASE("quadratic is exact up to rounding") {
    auto f = [](Tape&, std::span<const Var> x) { return sum_all(square(x[0])); };
    std::vector<Tensor> point{Tensor::scalar(3.0)};
    auto r = grad_check(f, point, 1e-4);
    CHECK(r.max_relative_error <= 1e-8);
    CHECK(r.analytic[0].item() == doctest::Approx(6.0));
  }
  SUBCASE("constant function has zero error") {
    auto f = [](Tape& t, std::span<const Var>) { return t.constant(Tensor::scalar(2.5)); };
    std::vector<Tensor> point{Tensor::vector({1.0, 2.0})};
    auto r = grad_check(f, point, 1e-4);
    CHECK(r.max_relative_error == 0.0);
    for (double v : r.analytic[0].values()) CHECK(v == 0.0);
  }
  SUBCASE("non-finite perturbed value raises") {
    auto f = [](Tape&, std::span<const Var> x) { return sum_all(sqrt(x[0])); };
    std::vector<Tensor> point{Tensor::vector({0.0})};
    CHECK_THROWS_AS(grad_check(f, point, 1e-4), NonFiniteError);
  }
}

TEST_CASE("every op kind matches central differences over 100 seeds") {
  for (const auto& c : op_cases()) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed * 7919 + 11);
      auto point = c.inputs(rng);
      Tensor weights = random_tensor(rng, c.output_shape);
      auto f = [&](Tape&, std::span<const Var> x) { return contract(c.op(x), weights); };
      auto r = grad_check(f, point, 1e-4);
      worst = std::max(worst, r.max_relative_error);
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("gradients are differentiable (second order matches differences)") {
  // h(x) = <c, d g(x)/dx> for a composite g; dh/dx is a Hessian-vector product.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 101);
    Tensor w = random_tensor(rng, {3, 4});
    Tensor c = random_tensor(rng, {2, 3});
    std::vector<Tensor> point{random_tensor(rng, {2, 3})};
    auto h = [&](Tape& t, std::span<const Var> x) {
      Var hidden = silu(matmul(x[0], t.constant(w)));
      Var norms = l2_norm(reshape(hidden, {2, 2, 2}), 1);
      Var g = sum_all(add(layer_norm(hidden), reshape(expand(cos(norms), 1, 2), {2, 4})));
      Var dg = t.grad(g, std::vector<Var>{x[0]})[0];
      return sum_all(mul(dg, t.constant(c)));
    };
    auto r = grad_check(h, point, 1e-4);
    CHECK(r.max_relative_error <= 1e-4);
  }
}

TEST_CASE("gather backward is exactly scatter-add of the incoming gradient") {
  Rng rng(17);
  Tape t;
  auto index = make_index({1, 1, 0, 2, 1});
  Var x = t.leaf(random_tensor(rng, {3, 2}));
  Var upstream = t.constant(random_tensor(rng, {5, 2}));
  Var y = sum_all(mul(gather_rows(x, index), upstream));
  Var g = t.grad(y, std::vector<Var>{x})[0];
  Var direct = scatter_add_rows(upstream, index, 3);
  CHECK(g.value().identical(direct.value()));
}

TEST_CASE("gradient of a zero vector norm is zero, not NaN") {
  Tape t;
  Var x = t.leaf(Tensor::zeros({2, 3}));
  auto g = t.backward(sum_all(l2_norm(x, 1)));
  for (double v : g.at(x).values()) CHECK(v == 0.0);
}

TEST_CASE("errors") {
  Tape t;
  Var a = t.leaf(Tensor::zeros({2, 3}));
  Var b = t.leaf(Tensor::zeros({3, 2}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);
  CHECK_THROWS_AS(exp(t.leaf(Tensor::scalar(1000.0))), NonFiniteError);
  CHECK_THROWS_AS(div(t.leaf(Tensor::scalar(1.0)), t.leaf(Tensor::scalar(0.0))), NonFiniteError);

  Tape empty;
  Tape other;
  Var foreign = other.leaf(Tensor::scalar(1.0));
  CHECK_THROWS(empty.backward(foreign));
}

TEST_CASE("inputs precede consumers and evaluation is deterministic") {
  auto run = [] {
    Rng rng(99);
    Tape t;
    Var x = t.leaf(random_tensor(rng, {4, 3}));
    Var w = t.leaf(random_tensor(rng, {3, 3}));
    Var y = sum_all(silu(layer_norm(matmul(x, w))));
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (int in : t.inputs(static_cast<int>(i))) CHECK(in < static_cast<int>(i));
    }
    auto g = t.backward(y);
    return std::pair{y.value(), g.at(w)};
  };
  auto [y1, g1] = run();
  auto [y2, g2] = run();
  CHECK(y1.identical(y2));
  CHECK(g1.identical(g2));
}
