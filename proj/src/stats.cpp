#include "commitlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "commitlab/errors.hpp"

namespace commitlab {

namespace {

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y, double slope, double intercept) {
    const double my = mean(y);
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double e = y[i] - (intercept + slope * x[i]);
        ss_res += e * e;
        ss_tot += (y[i] - my) * (y[i] - my);
    }
    if (ss_tot == 0.0) return 0.0;
    return 1.0 - ss_res / ss_tot;
}

void check_sizes(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionMismatch("x and y sizes differ");
    if (x.size() < 2) throw InvalidParameter("need at least two points to fit");
}

} // namespace

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    check_sizes(x, y);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw InvalidParameter("x is constant");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = r_squared(x, y, f.slope, f.intercept);
    return f;
}

LineFit fit_fixed_slope(const std::vector<double>& x, const std::vector<double>& y, double slope) {
    check_sizes(x, y);
    LineFit f;
    f.slope = slope;
    f.intercept = mean(y) - slope * mean(x);
    f.r2 = r_squared(x, y, f.slope, f.intercept);
    return f;
}

Interval wilson_interval(std::size_t successes, std::size_t n, double z) {
    if (n == 0) throw InvalidParameter("wilson interval needs n > 0");
    if (successes > n) throw InvalidParameter("more successes than trials");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double centre = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

} // namespace commitlab
