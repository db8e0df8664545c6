// Embedded adaptive Dormand-Prince 5(4) integrator with dense output.
//
// The state can be any Eigen vector or matrix over complex (or real)
// scalars. Step size is controlled by the standard embedded 4th/5th order
// error estimate; trajectories are sampled on arbitrary, strictly
// increasing time lists through the 4th-order dense-output interpolant, so
// the sample times never constrain the step sequence. A fixed-step mode
// (no error control) exists for convergence-order measurements.
//
// Coefficients are the published DOPRI5 tableau, including the dense-output
// d-coefficients from Hairer's reference implementation.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "cartsim/types.hpp"

namespace cartsim {

struct IntegratorOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  // When > 0, take fixed steps of exactly this size (clipped to the final
  // time) and skip error control entirely.
  double fixed_step = 0.0;
  long max_steps = 100000000;
};

// Thrown when the controller can no longer make progress (step-size
// underflow, typically a stiff or diverging problem); carries the time at
// which integration failed.
class IntegratorFailure : public std::runtime_error {
 public:
  IntegratorFailure(const std::string& what, double t_fail)
      : std::runtime_error(what), t(t_fail) {}
  double t;
};

namespace detail {

// DOPRI5 Butcher tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                        a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Error coefficients e_i = b_i - bhat_i.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output coefficients.
inline constexpr double d1 = -12715105075.0 / 11282082432.0;
inline constexpr double d3 = 87487479700.0 / 32700410799.0;
inline constexpr double d4 = -10690763975.0 / 1880347072.0;
inline constexpr double d5 = 701980252875.0 / 199316789632.0;
inline constexpr double d6 = -1453857185.0 / 822651844.0;
inline constexpr double d7 = 69997945.0 / 29380423.0;

template <class State>
double max_abs(const State& s) {
  return s.cwiseAbs().maxCoeff();
}

}  // namespace detail

// Integrates dy/dt = rhs(t, y) from t = sample_times.front() and invokes
// on_sample(k, t_k, y(t_k)) for every requested time, in order. rhs has the
// signature rhs(double t, const State& y, State& dydt); on_sample receives
// densely interpolated states, except at accepted step endpoints where the
// step value itself is used.
template <class State, class Rhs, class OnSample>
void integrate_dopri5(Rhs&& rhs, const State& y0,
                      const std::vector<double>& sample_times,
                      const IntegratorOptions& opt, OnSample&& on_sample) {
  using namespace detail;
  if (sample_times.empty()) return;
  for (size_t i = 1; i < sample_times.size(); ++i) {
    if (!(sample_times[i] > sample_times[i - 1]))
      throw std::invalid_argument("integrate_dopri5: sample times must be strictly increasing");
  }

  const double t_begin = sample_times.front();
  const double t_end = sample_times.back();
  size_t next_sample = 0;

  State y = y0;
  State k1 = y0, k2 = y0, k3 = y0, k4 = y0, k5 = y0, k6 = y0, k7 = y0;
  State ytmp = y0, ynew = y0, yerr = y0;

  double t = t_begin;
  rhs(t, y, k1);

  // First requested time may coincide with t_begin.
  if (sample_times[0] <= t_begin) {
    on_sample(0, t_begin, y);
    next_sample = 1;
    if (next_sample == sample_times.size()) return;
  }

  const bool fixed = opt.fixed_step > 0.0;
  double h;
  if (fixed) {
    h = opt.fixed_step;
  } else {
    // Initial step heuristic: relate the state scale to the derivative
    // scale, then cap conservatively. The controller corrects quickly, so
    // this only needs the right order of magnitude.
    const double scale = opt.abs_tol + opt.rel_tol * max_abs(y);
    const double d0 = max_abs(y), dd0 = max_abs(k1);
    h = (dd0 > 1e-300) ? 0.01 * (d0 + scale) / dd0 : 1e-6 * (t_end - t_begin);
    h = std::min({h, t_end - t_begin, opt.max_step});
    h = std::max(h, 1e-14 * (t_end - t_begin));
  }

  const double safety = 0.9, min_shrink = 0.2, max_grow = 5.0;
  long steps = 0;

  while (t < t_end) {
    if (++steps > opt.max_steps)
      throw IntegratorFailure("integrate_dopri5: step budget exhausted", t);
    if (!fixed && h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0))
      throw IntegratorFailure("integrate_dopri5: step size underflow (stiff or diverging problem) at t = " +
                              std::to_string(t), t);
    h = std::min(h, t_end - t);

    ytmp = y + h * (a21 * k1);
    rhs(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);  // FSAL: becomes k1 of the next step

    double err = 0.0;
    if (!fixed) {
      yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double sc = opt.abs_tol + opt.rel_tol * std::max(max_abs(y), max_abs(ynew));
      err = max_abs(yerr) / sc;
      if (!std::isfinite(err)) err = 2.0;  // force rejection on overflow/NaN
    }

    if (fixed || err <= 1.0) {
      // Serve all samples inside (t, t+h] from the dense interpolant.
      while (next_sample < sample_times.size() && sample_times[next_sample] <= t + h + 1e-14 * std::abs(t + h)) {
        const double ts = std::min(sample_times[next_sample], t + h);
        const double theta = (ts - t) / h;
        if (theta >= 1.0 - 1e-12) {
          on_sample(next_sample, ts, ynew);
        } else {
          // Hairer's contd5 evaluation.
          State rcont2 = ynew - y;
          State rcont3 = h * k1 - rcont2;
          State rcont4 = rcont2 - h * k7 - rcont3;
          State rcont5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
          State ys = y + theta * (rcont2 + (1.0 - theta) * (rcont3 + theta * (rcont4 + (1.0 - theta) * rcont5)));
          on_sample(next_sample, ts, ys);
        }
        ++next_sample;
      }
      t += h;
      k1 = k7;
      y = ynew;
      if (next_sample == sample_times.size()) return;
      if (!fixed) {
        const double grow = (err > 1e-30) ? safety * std::pow(err, -0.2) : max_grow;
        h = std::min(h * std::clamp(grow, min_shrink, max_grow), opt.max_step);
      }
    } else {
      h *= std::clamp(safety * std::pow(err, -0.2), min_shrink, 1.0);
    }
  }
}

// Convenience wrapper: sample on a TimeGrid and collect the trajectory.
template <class State, class Rhs>
std::vector<State> integrate_dopri5_grid(Rhs&& rhs, const State& y0,
                                         const TimeGrid& grid,
                                         const IntegratorOptions& opt) {
  grid.validate();
  std::vector<State> out(grid.n, y0);
  integrate_dopri5(rhs, y0, grid.times(), opt,
                   [&](size_t k, double, const State& y) { out[k] = y; });
  return out;
}

}  // namespace cartsim
