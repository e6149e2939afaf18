#pragma once

#include <functional>
#include <span>
#include <string>

#include "mgtad/grid.hpp"

namespace mgtad {

/// A tensor to perturb together with the analytic gradient computed for it.
struct GradTarget {
  std::string name;
  Grid* value;
  const Grid* analytic;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool finite = true;
  std::string worst;  // "<name>[<index>]" of the worst entry

  bool passed(double tolerance) const { return finite && max_relative_error < tolerance; }
};

/// |a - b| / max(1, |a|, |b|)
double relative_error(double a, double b);

/// Compares analytic gradients against central differences of `loss`.
/// Every entry of every target is perturbed by +-h and restored afterwards.
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<const GradTarget> targets, double h = 1e-5);

}  // namespace mgtad
