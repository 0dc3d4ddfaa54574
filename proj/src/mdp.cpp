#include "commitlab/mdp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "commitlab/bandit.hpp"
#include "commitlab/errors.hpp"
#include "commitlab/rng.hpp"

namespace commitlab {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_distribution(const VectorXd& v, Index n, const char* what, bool strictly_positive) {
    if (v.size() != n) throw DimensionMismatch(std::string(what) + " has the wrong length");
    for (Index i = 0; i < n; ++i) {
        if (!std::isfinite(v(i)) || v(i) < 0.0 || (strictly_positive && v(i) <= 0.0))
            throw InvalidParameter(std::string(what) + " must be a distribution" +
                                   (strictly_positive ? " with full support" : ""));
    }
    if (std::abs(v.sum() - 1.0) > 1e-12) throw InvalidParameter(std::string(what) + " must sum to 1");
}

Vec row_vec(const MatrixXd& m, Index s) {
    Vec out(static_cast<std::size_t>(m.cols()));
    for (Index a = 0; a < m.cols(); ++a) out[static_cast<std::size_t>(a)] = m(s, a);
    return out;
}

void check_policy(const FiniteMdp& mdp, const MatrixXd& m) {
    if (m.rows() != static_cast<Index>(mdp.num_states()) || m.cols() != static_cast<Index>(mdp.num_actions()))
        throw DimensionMismatch("policy shape does not match the mdp");
}

// Q(s,a) - V(s) written as sum_b pi(b|s)(Q(s,a) - Q(s,b)).
MatrixXd advantages(const MatrixXd& Q, const MatrixXd& pi) {
    MatrixXd adv = MatrixXd::Zero(Q.rows(), Q.cols());
    for (Index s = 0; s < Q.rows(); ++s)
        for (Index a = 0; a < Q.cols(); ++a)
            for (Index b = 0; b < Q.cols(); ++b) adv(s, a) += pi(s, b) * (Q(s, a) - Q(s, b));
    return adv;
}

MatrixXd policy_transition(const FiniteMdp& mdp, const MatrixXd& pi) {
    const Index S = static_cast<Index>(mdp.num_states());
    const Index A = static_cast<Index>(mdp.num_actions());
    MatrixXd p = MatrixXd::Zero(S, S);
    for (Index s = 0; s < S; ++s)
        for (Index a = 0; a < A; ++a) p.row(s) += pi(s, a) * mdp.transition().row(s * A + a);
    return p;
}

MatrixXd one_step_q(const FiniteMdp& mdp, const VectorXd& V) {
    const Index S = static_cast<Index>(mdp.num_states());
    const Index A = static_cast<Index>(mdp.num_actions());
    VectorXd pv = mdp.transition() * V;
    MatrixXd Q(S, A);
    for (Index s = 0; s < S; ++s)
        for (Index a = 0; a < A; ++a) Q(s, a) = mdp.rewards()(s, a) + mdp.gamma() * pv(s * A + a);
    return Q;
}

void check_actions(const FiniteMdp& mdp, const std::vector<std::size_t>& actions) {
    if (actions.size() != mdp.num_states()) throw DimensionMismatch("need one action per state");
    for (std::size_t a : actions)
        if (a >= mdp.num_actions()) throw InvalidParameter("action " + std::to_string(a) + " out of range");
}

double rho_value(const FiniteMdp& mdp, const VectorXd& V) { return mdp.rho().dot(V); }

} // namespace

FiniteMdp::FiniteMdp(MatrixXd transition, MatrixXd rewards, double gamma, VectorXd mu, VectorXd rho)
    : transition_(std::move(transition)), rewards_(std::move(rewards)), gamma_(gamma), mu_(std::move(mu)),
      rho_(std::move(rho)) {
    const Index S = rewards_.rows();
    const Index A = rewards_.cols();
    if (S < 1 || A < 1) throw InvalidParameter("mdp needs at least one state and one action");
    if (transition_.rows() != S * A || transition_.cols() != S)
        throw DimensionMismatch("transition must have S*A rows and S columns");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidParameter("gamma must lie in [0,1)");
    for (Index i = 0; i < S * A; ++i) {
        for (Index j = 0; j < S; ++j)
            if (!std::isfinite(transition_(i, j)) || transition_(i, j) < 0.0)
                throw InvalidParameter("transition probabilities must be non-negative");
        if (std::abs(transition_.row(i).sum() - 1.0) > 1e-12)
            throw InvalidParameter("transition rows must sum to 1");
    }
    for (Index s = 0; s < S; ++s)
        for (Index a = 0; a < A; ++a)
            if (!std::isfinite(rewards_(s, a)) || rewards_(s, a) <= 0.0 || rewards_(s, a) > 1.0)
                throw InvalidParameter("rewards must lie in (0,1]");
    check_distribution(mu_, S, "mu", true);
    check_distribution(rho_, S, "rho", false);
}

FiniteMdp random_mdp(std::size_t S, std::size_t A, double gamma, std::uint64_t seed) {
    CounterRng rng(seed, 0x4d4450);
    std::uint64_t c = 0;
    const Index s_n = static_cast<Index>(S);
    const Index a_n = static_cast<Index>(A);
    MatrixXd P(s_n * a_n, s_n);
    for (Index i = 0; i < P.rows(); ++i) {
        for (Index j = 0; j < s_n; ++j) P(i, j) = 0.05 + rng.uniform(c++);
        P.row(i) /= P.row(i).sum();
    }
    MatrixXd r(s_n, a_n);
    for (Index s = 0; s < s_n; ++s)
        for (Index a = 0; a < a_n; ++a) r(s, a) = 1.0 - rng.uniform(c++);
    VectorXd mu(s_n), rho(s_n);
    for (Index s = 0; s < s_n; ++s) mu(s) = 0.1 + rng.uniform(c++);
    for (Index s = 0; s < s_n; ++s) rho(s) = 0.1 + rng.uniform(c++);
    mu /= mu.sum();
    rho /= rho.sum();
    return FiniteMdp(std::move(P), std::move(r), gamma, std::move(mu), std::move(rho));
}

MatrixXd MdpPolicy::probs() const {
    MatrixXd p(logits.rows(), logits.cols());
    for (Index s = 0; s < logits.rows(); ++s) {
        PolicyVector row = softmax(ParamVector{row_vec(logits, s)});
        for (Index a = 0; a < logits.cols(); ++a) p(s, a) = row.probs[static_cast<std::size_t>(a)];
    }
    return p;
}

MdpPolicy uniform_policy(const FiniteMdp& mdp) {
    return MdpPolicy{MatrixXd::Zero(static_cast<Index>(mdp.num_states()), static_cast<Index>(mdp.num_actions()))};
}

ValueBundle solve_values_probs(const FiniteMdp& mdp, const MatrixXd& pi) {
    check_policy(mdp, pi);
    const Index S = static_cast<Index>(mdp.num_states());
    const double g = mdp.gamma();
    MatrixXd p_pi = policy_transition(mdp, pi);
    VectorXd r_pi = (pi.cwiseProduct(mdp.rewards())).rowwise().sum();
    MatrixXd m = MatrixXd::Identity(S, S) - g * p_pi;
    ValueBundle vb;
    vb.V = m.partialPivLu().solve(r_pi);
    vb.Q = one_step_q(mdp, vb.V);
    vb.Adv = advantages(vb.Q, pi);
    MatrixXd mt = MatrixXd::Identity(S, S) - g * p_pi.transpose();
    Eigen::PartialPivLU<MatrixXd> lu_t(mt);
    vb.d_mu = lu_t.solve((1.0 - g) * mdp.mu());
    vb.d_rho = lu_t.solve((1.0 - g) * mdp.rho());
    vb.v_mu = mdp.mu().dot(vb.V);
    vb.v_rho = rho_value(mdp, vb.V);
    return vb;
}

ValueBundle solve_values(const FiniteMdp& mdp, const MdpPolicy& policy) {
    check_policy(mdp, policy.logits);
    if (!policy.logits.allFinite()) throw InvalidParameter("policy logits must be finite");
    return solve_values_probs(mdp, policy.probs());
}

VectorXd iterative_values(const FiniteMdp& mdp, const MatrixXd& pi, double tol, std::size_t max_iter) {
    check_policy(mdp, pi);
    MatrixXd p_pi = policy_transition(mdp, pi);
    VectorXd r_pi = (pi.cwiseProduct(mdp.rewards())).rowwise().sum();
    VectorXd V = VectorXd::Zero(static_cast<Index>(mdp.num_states()));
    for (std::size_t it = 0; it < max_iter; ++it) {
        VectorXd next = r_pi + mdp.gamma() * p_pi * V;
        double diff = (next - V).cwiseAbs().maxCoeff();
        V = std::move(next);
        if (diff <= tol) break;
    }
    return V;
}

double bellman_residual(const FiniteMdp& mdp, const MatrixXd& pi, const VectorXd& V) {
    MatrixXd p_pi = policy_transition(mdp, pi);
    VectorXd r_pi = (pi.cwiseProduct(mdp.rewards())).rowwise().sum();
    return (V - r_pi - mdp.gamma() * p_pi * V).cwiseAbs().maxCoeff();
}

MatrixXd mdp_true_gradient(const FiniteMdp& mdp, const MatrixXd& pi, const ValueBundle& values) {
    const double scale = 1.0 - mdp.gamma();
    MatrixXd g(pi.rows(), pi.cols());
    for (Index s = 0; s < pi.rows(); ++s)
        for (Index a = 0; a < pi.cols(); ++a) g(s, a) = values.d_mu(s) * pi(s, a) * values.Adv(s, a) / scale;
    return g;
}

MatrixXd mdp_true_gradient(const FiniteMdp& mdp, const MdpPolicy& policy) {
    ValueBundle vb = solve_values(mdp, policy);
    return mdp_true_gradient(mdp, policy.probs(), vb);
}

MatrixXd parallel_is_estimate(const FiniteMdp& mdp, const MdpPolicy& policy, const std::vector<std::size_t>& actions,
                              const ValueBundle& values) {
    check_policy(mdp, policy.logits);
    check_actions(mdp, actions);
    MatrixXd pi = policy.probs();
    MatrixXd q_hat = MatrixXd::Zero(pi.rows(), pi.cols());
    for (Index s = 0; s < pi.rows(); ++s) {
        Index a = static_cast<Index>(actions[static_cast<std::size_t>(s)]);
        q_hat(s, a) = values.Q(s, a) / pi(s, a);
    }
    return q_hat;
}

MatrixXd mdp_stochastic_pg(const FiniteMdp& mdp, const MdpPolicy& policy, const MatrixXd& q_hat,
                           const ValueBundle& values) {
    MatrixXd pi = policy.probs();
    const double scale = 1.0 - mdp.gamma();
    MatrixXd g(pi.rows(), pi.cols());
    for (Index s = 0; s < pi.rows(); ++s) {
        double base = pi.row(s).dot(q_hat.row(s));
        for (Index a = 0; a < pi.cols(); ++a) g(s, a) = values.d_mu(s) * pi(s, a) * (q_hat(s, a) - base) / scale;
    }
    return g;
}

namespace {

template <class RowFn>
MdpMoments per_state_moments(const FiniteMdp& mdp, const MdpPolicy& policy, RowFn row_of) {
    MatrixXd pi = policy.probs();
    const Index S = pi.rows();
    const Index A = pi.cols();
    MdpMoments m{MatrixXd::Zero(S, A), 0.0};
    std::vector<std::size_t> actions(static_cast<std::size_t>(S), 0);
    for (Index s = 0; s < S; ++s) {
        for (Index a = 0; a < A; ++a) {
            actions[static_cast<std::size_t>(s)] = static_cast<std::size_t>(a);
            Eigen::RowVectorXd row = row_of(actions, s);
            m.mean.row(s) += pi(s, a) * row;
            m.second_moment += pi(s, a) * row.squaredNorm();
        }
        actions[static_cast<std::size_t>(s)] = 0;
    }
    (void)mdp;
    return m;
}

} // namespace

MdpMoments parallel_is_moment_oracle(const FiniteMdp& mdp, const MdpPolicy& policy, const ValueBundle& values) {
    return per_state_moments(mdp, policy, [&](const std::vector<std::size_t>& actions, Index s) {
        return Eigen::RowVectorXd(parallel_is_estimate(mdp, policy, actions, values).row(s));
    });
}

MdpMoments mdp_pg_moment_oracle(const FiniteMdp& mdp, const MdpPolicy& policy, const ValueBundle& values) {
    return per_state_moments(mdp, policy, [&](const std::vector<std::size_t>& actions, Index s) {
        MatrixXd q_hat = parallel_is_estimate(mdp, policy, actions, values);
        return Eigen::RowVectorXd(mdp_stochastic_pg(mdp, policy, q_hat, values).row(s));
    });
}

MdpPolicy step_mdp(RuleKind kind, const FiniteMdp& mdp, const MdpPolicy& policy, double eta,
                   const std::optional<std::vector<std::size_t>>& actions) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidParameter("eta must be positive");
    check_policy(mdp, policy.logits);
    ValueBundle vb = solve_values(mdp, policy);
    MatrixXd pi = policy.probs();
    MatrixXd dir;
    switch (kind) {
    case RuleKind::PgTrue:
        dir = mdp_true_gradient(mdp, pi, vb);
        break;
    case RuleKind::NpgTrue:
        dir = vb.Q;
        break;
    case RuleKind::GnpgTrue: {
        dir = mdp_true_gradient(mdp, pi, vb);
        double n = dir.stableNorm();
        if (!(n > 0.0)) throw ZeroGradientError("true gradient has zero norm");
        dir /= n;
        break;
    }
    case RuleKind::PgStoch:
    case RuleKind::NpgStoch:
    case RuleKind::GnpgStoch: {
        if (!actions) throw InvalidParameter("stochastic mdp step needs one sampled action per state");
        MatrixXd q_hat = parallel_is_estimate(mdp, policy, *actions, vb);
        if (kind == RuleKind::NpgStoch) {
            dir = q_hat;
        } else {
            dir = mdp_stochastic_pg(mdp, policy, q_hat, vb);
            if (kind == RuleKind::GnpgStoch) {
                double n = dir.stableNorm();
                if (!(n > 0.0)) throw ZeroGradientError("stochastic gradient has zero norm");
                dir /= n;
            }
        }
        break;
    }
    default:
        throw UnsupportedRule(to_string(kind) + " has no mdp version");
    }
    MdpPolicy out{policy.logits + eta * dir};
    if (!out.logits.allFinite()) throw NumericalError("mdp update produced a non-finite logit");
    return out;
}

GreedyGaps greedy_gaps(const MatrixXd& Q) {
    GreedyGaps g;
    g.gap.resize(Q.rows());
    for (Index s = 0; s < Q.rows(); ++s) {
        Index best = 0;
        for (Index a = 1; a < Q.cols(); ++a)
            if (Q(s, a) > Q(s, best)) best = a;
        double second = -std::numeric_limits<double>::infinity();
        for (Index a = 0; a < Q.cols(); ++a)
            if (a != best) second = std::max(second, Q(s, a));
        if (Q.cols() > 1 && !(Q(s, best) > second))
            throw InvalidParameter("greedy action is tied in state " + std::to_string(s));
        g.greedy.push_back(static_cast<std::size_t>(best));
        g.gap(s) = Q.cols() > 1 ? Q(s, best) - second : std::numeric_limits<double>::infinity();
    }
    return g;
}

double adaptive_npg_learning_rate(const FiniteMdp& mdp, const MdpPolicy& policy, const ValueBundle& values) {
    check_policy(mdp, policy.logits);
    GreedyGaps g = greedy_gaps(values.Q);
    MatrixXd pi = policy.probs();
    double m = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < pi.rows(); ++s)
        m = std::min(m, pi(s, static_cast<Index>(g.greedy[static_cast<std::size_t>(s)])) * g.gap(s));
    return 1.0 / m;
}

OptimalSolution policy_iteration(const FiniteMdp& mdp) {
    const Index S = static_cast<Index>(mdp.num_states());
    const Index A = static_cast<Index>(mdp.num_actions());
    OptimalSolution opt;
    opt.actions.assign(static_cast<std::size_t>(S), 0);
    for (std::size_t it = 1; it <= 10000; ++it) {
        opt.iterations = it;
        opt.pi = MatrixXd::Zero(S, A);
        for (Index s = 0; s < S; ++s) opt.pi(s, static_cast<Index>(opt.actions[static_cast<std::size_t>(s)])) = 1.0;
        opt.values = solve_values_probs(mdp, opt.pi);
        bool changed = false;
        for (Index s = 0; s < S; ++s) {
            Index cur = static_cast<Index>(opt.actions[static_cast<std::size_t>(s)]);
            Index best = cur;
            for (Index a = 0; a < A; ++a)
                if (opt.values.Q(s, a) > opt.values.Q(s, best) + 1e-12) best = a;
            if (best != cur) {
                opt.actions[static_cast<std::size_t>(s)] = static_cast<std::size_t>(best);
                changed = true;
            }
        }
        if (!changed) break;
    }
    opt.min_gap = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < S; ++s) {
        Index best = static_cast<Index>(opt.actions[static_cast<std::size_t>(s)]);
        for (Index a = 0; a < A; ++a)
            if (a != best) opt.min_gap = std::min(opt.min_gap, opt.values.Q(s, best) - opt.values.Q(s, a));
    }
    opt.unique = opt.min_gap > 1e-9;
    return opt;
}

double performance_difference_residual(const FiniteMdp& mdp, const MdpPolicy& pol_a, const MdpPolicy& pol_b) {
    ValueBundle va = solve_values(mdp, pol_a);
    ValueBundle vb = solve_values(mdp, pol_b);
    MatrixXd pb = pol_b.probs();
    double rhs = 0.0;
    for (Index s = 0; s < pb.rows(); ++s) rhs += vb.d_rho(s) * pb.row(s).dot(va.Adv.row(s));
    rhs /= 1.0 - mdp.gamma();
    return std::abs((vb.v_rho - va.v_rho) - rhs);
}

double value_suboptimality_residual(const FiniteMdp& mdp, const MdpPolicy& policy, const OptimalSolution& opt) {
    ValueBundle v = solve_values(mdp, policy);
    MatrixXd pi = policy.probs();
    double rhs = 0.0;
    for (Index s = 0; s < pi.rows(); ++s)
        rhs += v.d_rho(s) * (opt.pi.row(s) - pi.row(s)).dot(opt.values.Q.row(s));
    rhs /= 1.0 - mdp.gamma();
    return std::abs((opt.values.v_rho - v.v_rho) - rhs);
}

double distribution_mismatch(const VectorXd& d_star, const VectorXd& d) {
    double m = 0.0;
    for (Index s = 0; s < d.size(); ++s) m = std::max(m, d_star(s) / d(s));
    return m;
}

double general_nl_slack(const FiniteMdp& mdp, const MdpPolicy& policy, const OptimalSolution& opt) {
    ValueBundle v = solve_values(mdp, policy);
    MatrixXd pi = policy.probs();
    double grad_norm = mdp_true_gradient(mdp, pi, v).norm();
    double min_pi_star = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < pi.rows(); ++s)
        min_pi_star = std::min(min_pi_star, pi(s, static_cast<Index>(opt.actions[static_cast<std::size_t>(s)])));
    double mismatch = distribution_mismatch(opt.values.d_rho, v.d_mu);
    double S = static_cast<double>(mdp.num_states());
    return grad_norm - min_pi_star / std::sqrt(S) / mismatch * (opt.values.v_rho - v.v_rho);
}

double npg_discrete_nl_slack(const FiniteMdp& mdp, const MdpPolicy& policy, double eta, const OptimalSolution& opt) {
    ValueBundle v = solve_values(mdp, policy);
    GreedyGaps g = greedy_gaps(v.Q);
    MatrixXd pi = policy.probs();
    double c = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < pi.rows(); ++s) {
        double k = pi(s, static_cast<Index>(g.greedy[static_cast<std::size_t>(s)])) * std::expm1(eta * g.gap(s));
        c = std::min(c, k / (k + 1.0));
    }
    ValueBundle next = solve_values(mdp, step_mdp(RuleKind::NpgTrue, mdp, policy, eta));
    double mismatch = distribution_mismatch(opt.values.d_rho, mdp.rho());
    return (next.v_rho - v.v_rho) - c * (1.0 - mdp.gamma()) / mismatch * (opt.values.v_rho - v.v_rho);
}

double adaptive_npg_contraction_slack(const FiniteMdp& mdp, const MdpPolicy& policy, const OptimalSolution& opt) {
    ValueBundle v = solve_values(mdp, policy);
    double eta = adaptive_npg_learning_rate(mdp, policy, v);
    ValueBundle next = solve_values(mdp, step_mdp(RuleKind::NpgTrue, mdp, policy, eta));
    double mismatch = distribution_mismatch(opt.values.d_rho, mdp.rho());
    return (next.v_rho - v.v_rho) - 0.5 * (1.0 - mdp.gamma()) / mismatch * (opt.values.v_rho - v.v_rho);
}

double gnpg_mdp_learning_rate(const FiniteMdp& mdp) {
    const double g = mdp.gamma();
    const double c_inf = 1.0 / mdp.mu().minCoeff();
    const double S = static_cast<double>(mdp.num_states());
    return (1.0 - g) * g / (6.0 * (1.0 - g) * g + 4.0 * (c_inf - (1.0 - g))) / std::sqrt(S);
}

} // namespace commitlab
