#include "etpot/ad/grad_check.h"

#include <algorithm>
#include <cmath>

namespace etpot::ad {

namespace {

double evaluate(const ScalarFunction& f, std::span<const Tensor> point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const auto& t : point) leaves.push_back(tape.leaf(t));
  Var out = f(tape, leaves);
  double value = out.value().item();
  if (!std::isfinite(value)) throw NonFiniteError("function value is not finite");
  return value;
}

}  // namespace

std::vector<Tensor> numeric_gradient(const ScalarFunction& f,
                                     std::span<const Tensor> point, double step) {
  std::vector<Tensor> grads;
  std::vector<Tensor> shifted(point.begin(), point.end());
  for (std::size_t t = 0; t < point.size(); ++t) {
    const Tensor& base = point[t];
    std::vector<double> g(base.size());
    std::vector<double> values(base.values().begin(), base.values().end());
    for (std::size_t k = 0; k < base.size(); ++k) {
      const double original = values[k];
      values[k] = original + step;
      shifted[t] = Tensor(base.shape(), values);
      const double plus = evaluate(f, shifted);
      values[k] = original - step;
      shifted[t] = Tensor(base.shape(), values);
      const double minus = evaluate(f, shifted);
      values[k] = original;
      g[k] = (plus - minus) / (2.0 * step);
    }
    shifted[t] = base;
    grads.emplace_back(base.shape(), std::move(g));
  }
  return grads;
}

GradCheckResult grad_check(const ScalarFunction& f, std::span<const Tensor> point,
                           double step) {
  GradCheckResult result;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : point) leaves.push_back(tape.leaf(t));
    Var out = f(tape, leaves);
    auto grads = tape.grad(out, leaves);
    for (const Var& g : grads) result.analytic.push_back(g.value());
  }
  result.numeric = numeric_gradient(f, point, step);
  for (std::size_t t = 0; t < point.size(); ++t) {
    auto a = result.analytic[t].values();
    auto n = result.numeric[t].values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double denom = std::max({std::abs(a[k]), std::abs(n[k]), 1e-8});
      result.max_relative_error =
          std::max(result.max_relative_error, std::abs(a[k] - n[k]) / denom);
    }
  }
  return result;
}

}  // namespace etpot::ad
