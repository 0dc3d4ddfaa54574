#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "commitlab/errors.hpp"
#include "commitlab/rng.hpp"
#include "commitlab/stats.hpp"
#include "support.hpp"

using namespace commitlab;
using doctest::Approx;

TEST_CASE("line fit agrees with a QR least-squares oracle") {
    testgen::Gen g(31);
    for (int i = 0; i < 200; ++i) {
        std::size_t n = g.integer(3, 60);
        std::vector<double> x(n), y(n);
        Eigen::MatrixXd a(n, 2);
        Eigen::VectorXd b(n);
        for (std::size_t j = 0; j < n; ++j) {
            x[j] = g.uniform(-5.0, 5.0);
            y[j] = 0.7 * x[j] - 1.3 + g.uniform(-0.5, 0.5);
            a(j, 0) = 1.0;
            a(j, 1) = x[j];
            b(j) = y[j];
        }
        Eigen::Vector2d sol = a.colPivHouseholderQr().solve(b);
        LineFit f = fit_line(x, y);
        CHECK(f.intercept == Approx(sol(0)).epsilon(1e-10));
        CHECK(f.slope == Approx(sol(1)).epsilon(1e-10));
        CHECK(f.r2 <= 1.0);
    }
    LineFit exact = fit_line({1, 2, 3}, {2, 4, 6});
    CHECK(exact.slope == Approx(2.0));
    CHECK(exact.r2 == Approx(1.0));
    CHECK_THROWS_AS(fit_line({1, 1}, {2, 3}), InvalidParameter);
    LineFit fixed = fit_fixed_slope({0, 1, 2}, {1, 0, -1}, -1.0);
    CHECK(fixed.intercept == Approx(1.0));
    CHECK(fixed.r2 == Approx(1.0));
}

TEST_CASE("Wilson interval") {
    Interval half = wilson_interval(5, 10);
    CHECK(half.lo == Approx(0.2366).epsilon(1e-3));
    CHECK(half.hi == Approx(0.7634).epsilon(1e-3));
    Interval none = wilson_interval(0, 10);
    CHECK(none.lo == 0.0);
    CHECK(none.hi == Approx(0.2775).epsilon(1e-3));
    Interval all = wilson_interval(1000, 1000);
    CHECK(all.hi == 1.0);
    CHECK(all.lo > 0.99);
    CHECK_THROWS_AS(wilson_interval(0, 0), InvalidParameter);
}

TEST_CASE("counter RNG is a pure function of (seed, stream, counter)") {
    CounterRng a(7, 3), b(7, 3), c(7, 4);
    for (std::uint64_t t = 0; t < 100; ++t) {
        CHECK(a.bits(t) == b.bits(t));
        CHECK(a.bits(t) != c.bits(t));
        double u = a.uniform(t);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(a.bits(5) == b.bits(5));
    double mean = 0.0;
    const int n = 200000;
    for (int t = 0; t < n; ++t) mean += a.uniform(static_cast<std::uint64_t>(t));
    mean /= n;
    CHECK(std::abs(mean - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("categorical sampling") {
    std::vector<double> p{0.0, 0.25, 0.0, 0.75};
    CHECK(sample_categorical(p, 0.0) == 1);
    CHECK(sample_categorical(p, 0.2499) == 1);
    CHECK(sample_categorical(p, 0.25) == 3);
    CHECK(sample_categorical(p, 0.9999999) == 3);
    CounterRng r(1, 0);
    std::size_t hits = 0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) hits += sample_categorical(p, r.uniform(static_cast<std::uint64_t>(t))) == 3;
    double f = static_cast<double>(hits) / n;
    CHECK(std::abs(f - 0.75) < 5.0 * std::sqrt(0.75 * 0.25 / n));
}
