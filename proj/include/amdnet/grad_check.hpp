#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace amdnet {

struct GradCheckResult {
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  size_t n_checked = 0;
  size_t n_excluded = 0;
};

// Central-difference check of an analytic gradient. `f` must be a pure
// function of the flat parameter vector. `exclude` lets callers skip
// coordinates sitting on a nondifferentiable kink (relu inputs near zero).
inline GradCheckResult grad_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& analytic_grad, std::vector<double> x,
    double h = 1e-6, const std::function<bool(size_t)>& exclude = {}) {
  GradCheckResult res;
  for (size_t i = 0; i < x.size(); ++i) {
    if (exclude && exclude(i)) {
      ++res.n_excluded;
      continue;
    }
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic_grad[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
    }
    ++res.n_checked;
  }
  return res;
}

}  // namespace amdnet
