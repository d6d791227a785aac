#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sqzt/tape.hpp"

namespace sqzt {

struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t worst_tensor = 0;
  int64_t worst_coord = 0;
  bool nonfinite = false;
  std::string message;

  bool ok(double tol) const { return !nonfinite && max_rel_err < tol; }
};

/// Builds a scalar loss over leaf vars for the given point tensors.
using GradCheckFn =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

namespace detail {

inline double eval_loss(const GradCheckFn& fn, const std::vector<TensorD>& points) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  vars.reserve(points.size());
  for (const TensorD& p : points) vars.push_back(tape.leaf(&p));
  Var<double> loss = fn(tape, vars);
  return tape.value(loss)[0];
}

}  // namespace detail

/// Central-difference gradient check in f64: compares the tape's analytic
/// gradient against (f(x+h)-f(x-h))/2h at every coordinate of every point
/// tensor. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline GradCheckResult grad_check(const GradCheckFn& fn, std::vector<TensorD> points,
                                  double step = 1e-5) {
  GradCheckResult res;

  std::vector<TensorD> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const TensorD& p : points) vars.push_back(tape.leaf(&p));
    Var<double> loss = fn(tape, vars);
    const double lv = tape.value(loss)[0];
    if (!std::isfinite(lv)) {
      res.nonfinite = true;
      res.message = "loss is non-finite at the evaluation point";
      return res;
    }
    tape.backward(loss);
    for (Var<double> v : vars) analytic.push_back(tape.grad(v));
  }

  for (size_t t = 0; t < points.size(); ++t) {
    for (int64_t i = 0; i < points[t].numel(); ++i) {
      const double orig = points[t][i];
      points[t][i] = orig + step;
      const double fp = detail::eval_loss(fn, points);
      points[t][i] = orig - step;
      const double fm = detail::eval_loss(fn, points);
      points[t][i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        res.nonfinite = true;
        res.worst_tensor = t;
        res.worst_coord = i;
        res.message = "non-finite value at tensor " + std::to_string(t) + " coordinate " +
                      std::to_string(i);
        return res;
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[t][i];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_tensor = t;
        res.worst_coord = i;
      }
    }
  }
  return res;
}

/// Pushes values away from zero so relu kinks / ties are not straddled by the
/// finite-difference step.
template <typename T>
void nudge_from_zero(Tensor<T>& t, T margin = T(0.05)) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (t[i] >= T(0) && t[i] < margin) t[i] += margin;
    if (t[i] < T(0) && t[i] > -margin) t[i] -= margin;
  }
}

}  // namespace sqzt
