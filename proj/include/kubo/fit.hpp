#pragma once

#include <span>

namespace kubo {

struct LinearFit {
  double slope;
  double intercept;
  double slope_stderr;  // zero with two points
};

/// Ordinary least squares y ≈ slope·x + intercept.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace kubo
