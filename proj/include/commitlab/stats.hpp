#pragma once
#include <cstddef>
#include <vector>

namespace commitlab {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;  // 0 when y is constant
};

// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Least squares with the slope held fixed; only the intercept is fitted.
LineFit fit_fixed_slope(const std::vector<double>& x, const std::vector<double>& y, double slope);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// 95% Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054);

} // namespace commitlab
