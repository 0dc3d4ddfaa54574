#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "commitlab/bandit.hpp"

namespace testgen {

// Hand-rolled generators on std::mt19937_64, independent of the library's counter RNG.
struct Gen {
    std::mt19937_64 eng;
    explicit Gen(std::uint64_t seed) : eng(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng); }
    std::size_t integer(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(eng);
    }

    commitlab::Vec rewards(std::size_t k) {
        commitlab::Vec r(k);
        for (double& x : r) x = uniform(0.01, 1.0);
        return r;
    }

    commitlab::BanditInstance bandit(std::size_t kmin, std::size_t kmax) {
        return commitlab::BanditInstance(rewards(integer(kmin, kmax)));
    }

    commitlab::ParamVector theta(std::size_t k, double scale) {
        commitlab::ParamVector t{commitlab::Vec(k)};
        for (double& x : t.logits) x = uniform(-scale, scale);
        return t;
    }
};

// Textbook softmax, used as an oracle.
inline commitlab::Vec naive_softmax(const commitlab::Vec& x) {
    double m = x[0];
    for (double v : x) m = std::max(m, v);
    commitlab::Vec p(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) z += (p[i] = std::exp(x[i] - m));
    for (double& v : p) v /= z;
    return p;
}

inline double dot(const commitlab::Vec& a, const commitlab::Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2(const commitlab::Vec& a) { return std::sqrt(dot(a, a)); }

} // namespace testgen
