#include "lnet/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace lnet {

GradCheckReport finite_diff_check(
    const std::function<Value()>& build_loss,
    const std::vector<std::pair<std::string, Value>>& params, double h,
    double tol) {
  if (h <= 0.0)
    throw std::invalid_argument("finite_diff_check: step must be positive");

  // Stale gradients from earlier backprops on unrelated losses must not be
  // mistaken for analytic gradients of parameters this loss never touches.
  for (const auto& [name, p] : params) p.node()->grad.clear();

  Value loss = build_loss();
  if (!std::isfinite(loss.item()))
    throw std::runtime_error("finite_diff_check: non-finite loss at base point");
  backprop(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(p.size(), 0.0);
  }

  GradCheckReport report;
  report.tol = tol;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& name = params[pi].first;
    Value p = params[pi].second;
    GradCheckEntry entry{name, 0.0};
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.mutable_data()[i];
      p.mutable_data()[i] = saved + h;
      const double fp = build_loss().item();
      p.mutable_data()[i] = saved - h;
      const double fm = build_loss().item();
      p.mutable_data()[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("finite_diff_check: non-finite loss probing " +
                                 name + "[" + std::to_string(i) + "]");
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      entry.max_rel_err =
          std::max(entry.max_rel_err, std::fabs(a - numeric) / denom);
    }
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace lnet
