#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

namespace qsnn::testing {

// Central difference of f with respect to x[i], h = 1e-6.
inline double central_diff(std::span<double> x, std::size_t i, const std::function<double()>& f, double h = 1e-6) {
  const double keep = x[i];
  x[i] = keep + h;
  const double up = f();
  x[i] = keep - h;
  const double down = f();
  x[i] = keep;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-2});
}

}  // namespace qsnn::testing
