#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "kkv/faults.hpp"

namespace kkv {

// Reusable stage buffers so hot loops do not touch the heap per step.
struct Rk4Scratch {
  Eigen::VectorXd k1, k2, k3, k4, xt;

  void resize(Eigen::Index n) {
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    xt.resize(n);
  }
};

namespace detail {
inline void require_finite_stage(const Eigen::VectorXd& k, double t) {
  if (k.allFinite()) return;
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    if (!std::isfinite(k[i])) {
      throw IntegrationFault("rk4: non-finite derivative", static_cast<int>(i), t);
    }
  }
}
}  // namespace detail

// Classical fourth-order Runge-Kutta step. `f(t, x, dxdt)` must be pure for
// the duration of the step. No renormalization is applied; callers owning
// quaternion sub-states renormalize afterwards.
template <class F>
void rk4_step_inplace(Eigen::VectorXd& x, double t, double dt, F&& f, Rk4Scratch& s) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be > 0");
  const Eigen::Index n = x.size();
  if (s.k1.size() != n) s.resize(n);

  f(t, x, s.k1);
  detail::require_finite_stage(s.k1, t);

  s.xt = x + (0.5 * dt) * s.k1;
  f(t + 0.5 * dt, s.xt, s.k2);
  detail::require_finite_stage(s.k2, t);

  s.xt = x + (0.5 * dt) * s.k2;
  f(t + 0.5 * dt, s.xt, s.k3);
  detail::require_finite_stage(s.k3, t);

  s.xt = x + dt * s.k3;
  f(t + dt, s.xt, s.k4);
  detail::require_finite_stage(s.k4, t);

  x += (dt / 6.0) * (s.k1 + 2.0 * s.k2 + 2.0 * s.k3 + s.k4);
}

template <class F>
Eigen::VectorXd rk4_step(const Eigen::VectorXd& x0, double dt, F&& f, double t = 0.0) {
  Rk4Scratch scratch;
  Eigen::VectorXd x = x0;
  rk4_step_inplace(x, t, dt, std::forward<F>(f), scratch);
  return x;
}

}  // namespace kkv
