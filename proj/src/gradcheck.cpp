#include "mgtad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mgtad {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradTarget> targets, double h) {
  GradCheckReport report;
  if (!std::isfinite(loss())) {
    report.finite = false;
    report.max_relative_error = std::numeric_limits<double>::infinity();
    report.worst = "loss";
    return report;
  }
  for (const auto& target : targets) {
    if (target.value->shape() != target.analytic->shape()) {
      throw std::invalid_argument("grad_check: analytic gradient for '" + target.name +
                                  "' has shape " + target.analytic->shape_string() +
                                  ", value has " + target.value->shape_string());
    }
    for (std::size_t i = 0; i < target.value->size(); ++i) {
      double& slot = (*target.value)[i];
      const double saved = slot;
      slot = saved + h;
      const double up = loss();
      slot = saved - h;
      const double down = loss();
      slot = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.finite = false;
        report.max_relative_error = std::numeric_limits<double>::infinity();
        report.worst = target.name + "[" + std::to_string(i) + "]";
        return report;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(numeric, (*target.analytic)[i]);
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst = target.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace mgtad
