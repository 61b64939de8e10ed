#include "kubo/fit.hpp"

#include <cmath>

#include "kubo/errors.hpp"

namespace kubo {

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorCode::InvalidArgument, "least squares needs >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f{};
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.slope * x[i] - f.intercept;
      ssr += r * r;
    }
    f.slope_stderr = std::sqrt(ssr / double(n - 2) / sxx);
  }
  return f;
}

}  // namespace kubo
