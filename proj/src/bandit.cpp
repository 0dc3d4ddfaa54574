#include "commitlab/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "commitlab/errors.hpp"

namespace commitlab {

BanditInstance::BanditInstance(Vec rewards) : rewards_(std::move(rewards)) {
    if (rewards_.size() < 2) throw InvalidParameter("bandit needs at least two arms");
    for (double r : rewards_) {
        if (!std::isfinite(r) || r <= 0.0 || r > 1.0)
            throw InvalidParameter("rewards must lie in (0,1], got " + std::to_string(r));
    }
    optimal_arm_ = static_cast<std::size_t>(
        std::max_element(rewards_.begin(), rewards_.end()) - rewards_.begin());
    double second = -1.0;
    double lo = 2.0;
    for (std::size_t a = 0; a < rewards_.size(); ++a) {
        if (a == optimal_arm_) continue;
        second = std::max(second, rewards_[a]);
        lo = std::min(lo, rewards_[a]);
    }
    if (second == rewards_[optimal_arm_]) throw InvalidParameter("optimal arm is not unique");
    gap_ = rewards_[optimal_arm_] - second;
    min_reward_ = lo;
}

void require_finite(const Vec& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw InvalidParameter(std::string(what) + " has a non-finite entry");
}

double log_sum_exp(const Vec& x) {
    double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

double log_sum_exp_except(const Vec& x, std::size_t skip) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (i != skip) m = std::max(m, x[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (i != skip) s += std::exp(x[i] - m);
    return m + std::log(s);
}

PolicyVector softmax(const ParamVector& theta) {
    if (theta.logits.empty()) throw InvalidParameter("empty logits");
    require_finite(theta.logits, "theta");
    double m = *std::max_element(theta.logits.begin(), theta.logits.end());
    PolicyVector pi{Vec(theta.size())};
    double s = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        pi.probs[i] = std::exp(theta.logits[i] - m);
        s += pi.probs[i];
    }
    for (double& p : pi.probs) p /= s;
    return pi;
}

double log_residual(const ParamVector& theta, std::size_t arm) {
    if (arm >= theta.size()) throw InvalidParameter("arm out of range");
    require_finite(theta.logits, "theta");
    return log_sum_exp_except(theta.logits, arm) - log_sum_exp(theta.logits);
}

static void check_dims(std::size_t n, const BanditInstance& inst) {
    if (n != inst.num_arms())
        throw DimensionMismatch("vector has " + std::to_string(n) + " entries, instance has " +
                                std::to_string(inst.num_arms()) + " arms");
}

double expected_reward(const PolicyVector& pi, const BanditInstance& inst) {
    check_dims(pi.size(), inst);
    double s = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) s += pi.probs[a] * inst.reward(a);
    return s;
}

double suboptimality(const PolicyVector& pi, const BanditInstance& inst) {
    check_dims(pi.size(), inst);
    double s = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a)
        if (a != inst.optimal_arm()) s += pi.probs[a] * (inst.optimal_reward() - inst.reward(a));
    return s;
}

// r(a) - pi^T r written as sum_b pi(b)(r(a) - r(b)); no cancellation near deterministic pi
static Vec centered_rewards(const PolicyVector& pi, const BanditInstance& inst) {
    Vec c(pi.size(), 0.0);
    for (std::size_t a = 0; a < pi.size(); ++a)
        for (std::size_t b = 0; b < pi.size(); ++b)
            c[a] += pi.probs[b] * (inst.reward(a) - inst.reward(b));
    return c;
}

GradientReport true_gradient(const ParamVector& theta, const BanditInstance& inst) {
    check_dims(theta.size(), inst);
    PolicyVector pi = softmax(theta);
    Vec c = centered_rewards(pi, inst);
    GradientReport rep;
    rep.gradient.resize(pi.size());
    double big = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) {
        rep.gradient[a] = pi.probs[a] * c[a];
        big = std::max(big, std::abs(rep.gradient[a]));
        rep.inner_with_r += rep.gradient[a] * inst.reward(a);
    }
    // scaled so that entries near the denormal range do not square to zero
    double sq = 0.0;
    if (big > 0.0)
        for (double g : rep.gradient) sq += (g / big) * (g / big);
    rep.l2_norm = big * std::sqrt(sq);
    return rep;
}

Eigen::MatrixXd value_hessian(const ParamVector& theta, const BanditInstance& inst) {
    check_dims(theta.size(), inst);
    PolicyVector pi = softmax(theta);
    Vec c = centered_rewards(pi, inst);
    const auto k = static_cast<Eigen::Index>(pi.size());
    Eigen::MatrixXd s(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            double pij = pi.probs[i] * pi.probs[j];
            s(i, j) = (i == j ? pi.probs[j] * c[j] : 0.0) - pij * c[i] - pij * c[j];
        }
    }
    return s;
}

SpectralRadius spectral_radius(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidParameter("matrix must be square");
    if (!m.allFinite()) throw InvalidParameter("matrix has non-finite entries");
    const Eigen::Index k = m.rows();
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-8) throw InvalidParameter("matrix is not symmetric");

    SpectralRadius out;
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(k, 1.0, static_cast<double>(k));
    v.normalize();
    // Restart from unit vectors if the start lands in the null space.
    Eigen::Index restart = 0;
    while ((m * v).squaredNorm() == 0.0) {
        if (restart == k) {
            out.converged = true;
            return out;
        }
        v = Eigen::VectorXd::Unit(k, restart++);
    }
    // Iterate on m^2 so a +/- pair of dominant eigenvalues does not make the iterate oscillate.
    constexpr int kMaxIter = 10000;
    for (int it = 1; it <= kMaxIter; ++it) {
        Eigen::VectorXd w = m * v;
        Eigen::VectorXd x = m * w;
        double rho = w.squaredNorm();
        out.value = std::sqrt(rho);
        out.iterations = it;
        if ((x - rho * v).norm() <= 1e-10 * rho) {
            out.converged = true;
            break;
        }
        double xn = x.norm();
        if (xn == 0.0) break;
        v = x / xn;
    }
    return out;
}

double nl_inequality_slack(const ParamVector& theta, const BanditInstance& inst) {
    GradientReport g = true_gradient(theta, inst);
    PolicyVector pi = softmax(theta);
    return g.l2_norm - pi.probs[inst.optimal_arm()] * suboptimality(pi, inst);
}

double natural_nl_slack_continuous(const ParamVector& theta, const BanditInstance& inst) {
    GradientReport g = true_gradient(theta, inst);
    PolicyVector pi = softmax(theta);
    return g.inner_with_r - pi.probs[inst.optimal_arm()] * inst.gap() * suboptimality(pi, inst);
}

double natural_nl_slack_discrete(const ParamVector& theta, const BanditInstance& inst, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidParameter("eta must be positive");
    check_dims(theta.size(), inst);
    PolicyVector pi = softmax(theta);
    ParamVector next = theta;
    for (std::size_t a = 0; a < next.size(); ++a) next.logits[a] += eta * inst.reward(a);
    PolicyVector pn = softmax(next);
    double progress = 0.0;
    for (std::size_t a = 0; a < pi.size(); ++a) progress += (pn.probs[a] - pi.probs[a]) * inst.reward(a);
    double k = pi.probs[inst.optimal_arm()] * std::expm1(eta * inst.gap());
    return progress - (k / (k + 1.0)) * suboptimality(pi, inst);
}

NaturalNlSlack natural_nl_slack(const ParamVector& theta, const BanditInstance& inst) {
    NaturalNlSlack out;
    out.continuous_slack = natural_nl_slack_continuous(theta, inst);
    out.discrete_slack = [theta, inst](double eta) { return natural_nl_slack_discrete(theta, inst, eta); };
    return out;
}

} // namespace commitlab
