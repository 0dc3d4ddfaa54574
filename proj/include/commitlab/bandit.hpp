#pragma once
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace commitlab {

using Vec = std::vector<double>;

class BanditInstance {
public:
    // Throws InvalidParameter unless K >= 2, every reward is in (0,1] and the argmax is unique.
    explicit BanditInstance(Vec rewards);

    const Vec& rewards() const { return rewards_; }
    double reward(std::size_t a) const { return rewards_[a]; }
    std::size_t num_arms() const { return rewards_.size(); }
    std::size_t optimal_arm() const { return optimal_arm_; }
    double optimal_reward() const { return rewards_[optimal_arm_]; }
    double gap() const { return gap_; }
    double min_reward() const { return min_reward_; }

private:
    Vec rewards_;
    std::size_t optimal_arm_ = 0;
    double gap_ = 0.0;
    double min_reward_ = 0.0;
};

struct ParamVector {
    Vec logits;
    std::size_t size() const { return logits.size(); }
};

struct PolicyVector {
    Vec probs;
    std::size_t size() const { return probs.size(); }
};

struct GradientReport {
    Vec gradient;
    double l2_norm = 0.0;
    double inner_with_r = 0.0;
};

void require_finite(const Vec& v, const char* what);

double log_sum_exp(const Vec& x);

// log(sum_{b != skip} exp(x_b))
double log_sum_exp_except(const Vec& x, std::size_t skip);

PolicyVector softmax(const ParamVector& theta);

// log(1 - pi(arm)) computed as a sum over the other arms, so it stays exact as pi(arm) -> 1.
double log_residual(const ParamVector& theta, std::size_t arm);

double expected_reward(const PolicyVector& pi, const BanditInstance& inst);

// (pi* - pi)^T r, summed over suboptimal arms to avoid cancellation.
double suboptimality(const PolicyVector& pi, const BanditInstance& inst);

GradientReport true_gradient(const ParamVector& theta, const BanditInstance& inst);

Eigen::MatrixXd value_hessian(const ParamVector& theta, const BanditInstance& inst);

struct SpectralRadius {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Power iteration from the fixed start (1,2,...,K)/norm. Throws InvalidParameter when
// the matrix is not symmetric within 1e-8.
SpectralRadius spectral_radius(const Eigen::MatrixXd& m);

double nl_inequality_slack(const ParamVector& theta, const BanditInstance& inst);

double natural_nl_slack_continuous(const ParamVector& theta, const BanditInstance& inst);
double natural_nl_slack_discrete(const ParamVector& theta, const BanditInstance& inst, double eta);

struct NaturalNlSlack {
    double continuous_slack = 0.0;
    std::function<double(double)> discrete_slack;
};

NaturalNlSlack natural_nl_slack(const ParamVector& theta, const BanditInstance& inst);

} // namespace commitlab
