#pragma once
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "commitlab/rules.hpp"

namespace commitlab {

class FiniteMdp {
public:
    // transition has S*A rows (row s*A + a) and S columns; rewards is S x A.
    FiniteMdp(Eigen::MatrixXd transition, Eigen::MatrixXd rewards, double gamma, Eigen::VectorXd mu,
              Eigen::VectorXd rho);

    std::size_t num_states() const { return static_cast<std::size_t>(rewards_.rows()); }
    std::size_t num_actions() const { return static_cast<std::size_t>(rewards_.cols()); }
    const Eigen::MatrixXd& transition() const { return transition_; }
    const Eigen::MatrixXd& rewards() const { return rewards_; }
    double gamma() const { return gamma_; }
    const Eigen::VectorXd& mu() const { return mu_; }
    const Eigen::VectorXd& rho() const { return rho_; }

    double prob(std::size_t s, std::size_t a, std::size_t next) const {
        return transition_(static_cast<Eigen::Index>(s * num_actions() + a), static_cast<Eigen::Index>(next));
    }

private:
    Eigen::MatrixXd transition_;
    Eigen::MatrixXd rewards_;
    double gamma_;
    Eigen::VectorXd mu_;
    Eigen::VectorXd rho_;
};

// Rewards in (0,1], dense random transitions, mu and rho with full support.
FiniteMdp random_mdp(std::size_t S, std::size_t A, double gamma, std::uint64_t seed);

struct MdpPolicy {
    Eigen::MatrixXd logits;  // S x A
    Eigen::MatrixXd probs() const;
};

MdpPolicy uniform_policy(const FiniteMdp& mdp);

struct ValueBundle {
    Eigen::VectorXd V;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd Adv;
    Eigen::VectorXd d_mu;
    Eigen::VectorXd d_rho;
    double v_mu = 0.0;
    double v_rho = 0.0;
};

ValueBundle solve_values(const FiniteMdp& mdp, const MdpPolicy& policy);
// Same, for an explicit probability matrix (e.g. a deterministic policy).
ValueBundle solve_values_probs(const FiniteMdp& mdp, const Eigen::MatrixXd& pi);

// Value-iteration fixed point of V, used only as an independent check.
Eigen::VectorXd iterative_values(const FiniteMdp& mdp, const Eigen::MatrixXd& pi, double tol = 1e-13,
                                 std::size_t max_iter = 1000000);

double bellman_residual(const FiniteMdp& mdp, const Eigen::MatrixXd& pi, const Eigen::VectorXd& V);

// dV(mu)/dtheta(s,a)
Eigen::MatrixXd mdp_true_gradient(const FiniteMdp& mdp, const MdpPolicy& policy);
Eigen::MatrixXd mdp_true_gradient(const FiniteMdp& mdp, const Eigen::MatrixXd& pi, const ValueBundle& values);

Eigen::MatrixXd parallel_is_estimate(const FiniteMdp& mdp, const MdpPolicy& policy,
                                     const std::vector<std::size_t>& actions, const ValueBundle& values);

struct MdpMoments {
    Eigen::MatrixXd mean;
    double second_moment = 0.0;
};

// Exact moments of Q_hat; each row depends only on its own state's draw, so the expectation
// is taken one state at a time.
MdpMoments parallel_is_moment_oracle(const FiniteMdp& mdp, const MdpPolicy& policy, const ValueBundle& values);

// Exact moments of the stochastic PG estimator built from Q_hat.
MdpMoments mdp_pg_moment_oracle(const FiniteMdp& mdp, const MdpPolicy& policy, const ValueBundle& values);

Eigen::MatrixXd mdp_stochastic_pg(const FiniteMdp& mdp, const MdpPolicy& policy, const Eigen::MatrixXd& q_hat,
                                  const ValueBundle& values);

MdpPolicy step_mdp(RuleKind kind, const FiniteMdp& mdp, const MdpPolicy& policy, double eta,
                   const std::optional<std::vector<std::size_t>>& actions = std::nullopt);

struct GreedyGaps {
    std::vector<std::size_t> greedy;
    Eigen::VectorXd gap;
};

// Per-state argmax of Q and its margin; throws InvalidParameter on an exact tie.
GreedyGaps greedy_gaps(const Eigen::MatrixXd& Q);

double adaptive_npg_learning_rate(const FiniteMdp& mdp, const MdpPolicy& policy, const ValueBundle& values);

struct OptimalSolution {
    std::vector<std::size_t> actions;
    Eigen::MatrixXd pi;
    ValueBundle values;
    double min_gap = 0.0;  // min_s Q*(s,a*) - max_{a != a*} Q*(s,a)
    bool unique = false;
    std::size_t iterations = 0;
};

OptimalSolution policy_iteration(const FiniteMdp& mdp);

double performance_difference_residual(const FiniteMdp& mdp, const MdpPolicy& pol_a, const MdpPolicy& pol_b);

double value_suboptimality_residual(const FiniteMdp& mdp, const MdpPolicy& policy, const OptimalSolution& opt);

// ||d_rho^{pi*} / d||_inf
double distribution_mismatch(const Eigen::VectorXd& d_star, const Eigen::VectorXd& d);

double general_nl_slack(const FiniteMdp& mdp, const MdpPolicy& policy, const OptimalSolution& opt);

// Progress of one NPG_TRUE step minus the discrete natural NL lower bound.
double npg_discrete_nl_slack(const FiniteMdp& mdp, const MdpPolicy& policy, double eta,
                             const OptimalSolution& opt);

// Progress of one adaptive-eta NPG step minus ((1-gamma)/2) ||d_rho^{pi*}/rho||^-1 (V* - V).
double adaptive_npg_contraction_slack(const FiniteMdp& mdp, const MdpPolicy& policy, const OptimalSolution& opt);

// Step size for GNPG on MDPs with C_inf bounded by 1/min_s mu(s).
double gnpg_mdp_learning_rate(const FiniteMdp& mdp);

} // namespace commitlab
