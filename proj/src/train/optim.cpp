#include "etpot/train/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace etpot::train {

double combined_loss(std::span<const double> ep, std::span<const double> fp,
                     std::span<const double> er, std::span<const double> fr, double we,
                     double wf) {
  if (ep.size() != er.size() || fp.size() != fr.size()) {
    throw std::invalid_argument("combined_loss: prediction and reference sizes differ");
  }
  if (fp.size() % 3 != 0) throw std::invalid_argument("combined_loss: forces must be N x 3");
  auto mse = [](std::span<const double> a, std::span<const double> b) {
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s / static_cast<double>(a.size());
  };
  return we * mse(ep, er) + wf * mse(fp, fr);
}

void adam_step(ParameterSet& params, const TensorMap& grads, AdamState& st, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient count does not match parameters");
  }
  if (st.m.empty()) {
    for (std::size_t k = 0; k < params.size(); ++k) {
      st.m.add(params.name(k), model::Tensor::zeros(params.at(k).shape()));
      st.v.add(params.name(k), model::Tensor::zeros(params.at(k).shape()));
    }
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!grads.at(k).all_finite()) {
      throw std::invalid_argument("adam_step: non-finite gradient for '" + params.name(k) + "'");
    }
  }
  st.step += 1;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto g = grads.at(k).values();
    const auto p = params.at(k).values();
    const auto m = st.m.at(k).values();
    const auto v = st.v.at(k).values();
    std::vector<double> pn(p.size()), mn(p.size()), vn(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      mn[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      vn[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      pn[i] = p[i] - lr * (mn[i] / c1) / (std::sqrt(vn[i] / c2) + st.eps);
    }
    const auto& shape = params.at(k).shape();
    params.set(k, model::Tensor(shape, std::move(pn)));
    st.m.set(k, model::Tensor(shape, std::move(mn)));
    st.v.set(k, model::Tensor(shape, std::move(vn)));
  }
}

ScheduleState make_schedule(double base_lr, std::size_t warmup_steps, double decay_factor,
                            std::size_t patience, double min_lr) {
  if (!(base_lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw std::invalid_argument("decay factor must lie in (0, 1)");
  }
  if (!(min_lr > 0.0)) throw std::invalid_argument("minimum learning rate must be positive");
  ScheduleState s;
  s.base_lr = base_lr;
  s.warmup_steps = warmup_steps;
  s.decay_factor = decay_factor;
  s.patience = patience;
  s.min_lr = min_lr;
  s.lr = std::max(base_lr, min_lr);
  return s;
}

double schedule_lr(ScheduleState& s, std::size_t step, std::optional<double> val) {
  if (step <= s.warmup_steps && s.warmup_steps > 0) {
    return s.base_lr * (static_cast<double>(step) / static_cast<double>(s.warmup_steps));
  }
  if (val) {
    if (!s.best_val || *val < *s.best_val) {
      s.best_val = *val;
      s.bad_epochs = 0;
    } else if (++s.bad_epochs > s.patience) {
      s.lr = std::max(s.lr * s.decay_factor, s.min_lr);
      s.bad_epochs = 0;
    }
  }
  return s.lr;
}

SmoothedLoss smooth(SmoothedLoss s, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("smooth: loss is not finite");
  s.value = s.value ? (1.0 - s.alpha) * *s.value + s.alpha * x : x;
  return s;
}

}  // namespace etpot::train
