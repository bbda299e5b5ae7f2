#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lnet/autodiff.hpp"

namespace lnet {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  double tol = 0.0;
  bool passed() const { return worst < tol; }
};

// Compares backprop gradients of a scalar loss against central differences
// (f(p+h) - f(p-h)) / 2h for every entry of every named parameter. The
// builder must rebuild the loss from the same parameter leaves on each call.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
GradCheckReport finite_diff_check(
    const std::function<Value()>& build_loss,
    const std::vector<std::pair<std::string, Value>>& params, double h,
    double tol);

}  // namespace lnet
