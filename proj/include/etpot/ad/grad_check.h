#pragma once

#include <functional>
#include <span>
#include <vector>

#include "etpot/ad/tape.h"

namespace etpot::ad {

/// Builds a scalar on `tape` from leaves holding the evaluation point.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> inputs)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;
};

/// Compares reverse-mode gradients against central differences.
///
/// Per component: |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// Throws NonFiniteError if f is not finite at a perturbed point.
GradCheckResult grad_check(const ScalarFunction& f, std::span<const Tensor> point,
                           double step);

/// Central-difference gradient alone (the oracle half of grad_check).
std::vector<Tensor> numeric_gradient(const ScalarFunction& f,
                                     std::span<const Tensor> point, double step);

}  // namespace etpot::ad
