#include "commitlab/committal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>

#include "commitlab/errors.hpp"
#include "commitlab/rng.hpp"
#include "commitlab/stats.hpp"

namespace commitlab {

namespace {

struct ResidualPoint {
    double log_u;
    double log_pi;
};

ResidualPoint residual_of(const PolicyState& state, std::size_t arm) {
    if (const auto* s = std::get_if<SambaState>(&state)) {
        double u = 0.0;
        for (std::size_t b = 0; b < s->probs.size(); ++b)
            if (b != arm) u += s->probs[b];
        return {std::log(u), std::log1p(-u)};
    }
    const auto& theta = std::get<ParamVector>(state);
    double log_u = log_residual(theta, arm);
    double log_pi = log_u < std::log(0.5) ? std::log1p(-std::exp(log_u))
                                          : theta.logits[arm] - log_sum_exp(theta.logits);
    return {log_u, log_pi};
}

double prob_of(const PolicyState& state, std::size_t a) { return policy_of(state).probs[a]; }

bool dominating(const PolicyVector& pi, std::size_t a) {
    for (double p : pi.probs)
        if (p > pi.probs[a]) return false;
    return true;
}

} // namespace

double FixedActionTrajectory::running_product() const {
    return log_running_product.empty() ? 1.0 : std::exp(log_running_product.back());
}

FixedActionTrajectory fixed_action_trajectory(const UpdateRuleSpec& rule, const ParamVector& theta1,
                                              const BanditInstance& inst, std::size_t arm, std::size_t T) {
    if (is_true_gradient(rule.kind))
        throw UnsupportedRule(to_string(rule.kind) + " does not take sampled actions");
    if (T < 2) throw InvalidParameter("horizon must be at least 2");
    if (arm >= inst.num_arms()) throw InvalidParameter("arm out of range");
    if (theta1.size() != inst.num_arms()) throw DimensionMismatch("theta and instance sizes differ");
    validate_rule(rule, inst);

    FixedActionTrajectory traj;
    traj.rule = rule;
    traj.forced_arm = arm;
    traj.residuals.reserve(T);
    traj.log_residuals.reserve(T);
    traj.log_running_product.reserve(T);

    PolicyState state = initial_state(rule, theta1);
    if (rule.kind == RuleKind::Samba && greedy_arm(std::get<SambaState>(state).probs) != arm)
        throw InvalidParameter("samba forced arm must be the greedy arm at t=1");

    double log_prod = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
        ResidualPoint p = residual_of(state, arm);
        log_prod += p.log_pi;
        traj.log_residuals.push_back(p.log_u);
        traj.residuals.push_back(std::exp(p.log_u));
        traj.log_running_product.push_back(log_prod);
        if (t == T || traj.saturated_at) continue;
        try {
            state = step(rule, state, inst, arm);
        } catch (const NumericalError&) {
            if (rule.kind == RuleKind::Samba) throw;
            traj.saturated_at = t;
            continue;
        }
        if (rule.kind == RuleKind::Samba && greedy_arm(std::get<SambaState>(state).probs) != arm)
            throw InvalidParameter("samba forced arm stopped being greedy at t=" + std::to_string(t + 1));
    }
    return traj;
}

void write_trajectory_csv(std::ostream& os, const FixedActionTrajectory& traj) {
    os << "t,u_t,log_u_t,running_product\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < traj.horizon(); ++i) {
        os << (i + 1) << ',' << traj.residuals[i] << ',' << traj.log_residuals[i] << ','
           << std::exp(traj.log_running_product[i]) << '\n';
    }
}

std::string to_string(CommittalClass c) {
    switch (c) {
    case CommittalClass::Polynomial: return "POLYNOMIAL";
    case CommittalClass::Exponential: return "EXPONENTIAL";
    case CommittalClass::Zero: return "ZERO";
    }
    return "UNKNOWN";
}

CommittalEstimate estimate_committal_rate(const FixedActionTrajectory& traj) {
    const std::size_t T = traj.horizon();
    if (T < 100) throw InvalidParameter("committal estimate needs T >= 100");
    CommittalEstimate est;
    est.t_lo = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(T))));
    est.t_hi = T;

    std::vector<double> lt, tt, y;
    for (std::size_t t = est.t_lo; t <= T; ++t) {
        double v = traj.log_residuals[t - 1];
        if (!std::isfinite(v)) {
            est.underflow = true;
            est.classification = CommittalClass::Exponential;
            return est;
        }
        lt.push_back(std::log(static_cast<double>(t)));
        tt.push_back(static_cast<double>(t));
        y.push_back(v);
    }
    LineFit poly = fit_line(lt, y);
    LineFit expo = fit_line(tt, y);
    est.fit_r2_poly = poly.r2;
    est.fit_r2_exp = expo.r2;
    est.slope_poly = poly.slope;
    est.slope_exp = expo.slope;

    if (expo.r2 - poly.r2 > kR2Margin && expo.slope < -kDecayFloor) {
        est.classification = CommittalClass::Exponential;
        return est;
    }
    const double log_ratio = traj.log_residuals[T - 1] - traj.log_residuals[T / 2 - 1];
    if (log_ratio > std::log(kStagnationRatio)) {
        est.classification = CommittalClass::Zero;
        return est;
    }
    est.classification = CommittalClass::Polynomial;
    est.alpha_hat = std::max(0.0, -poly.slope);
    return est;
}

double forever_probability_lower_bound(const UpdateRuleSpec& rule, const ParamVector& theta1,
                                       const BanditInstance& inst, ArmTarget target) {
    if (theta1.size() != inst.num_arms()) throw DimensionMismatch("theta and instance sizes differ");
    require_finite(theta1.logits, "theta");
    const double eta = rule.eta;
    if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
    const std::size_t k = inst.num_arms();

    if (target.all_suboptimal) {
        if (rule.kind != RuleKind::NpgStoch)
            throw UnsupportedRule("the all-suboptimal bound is available for npg-stoch only");
        const std::size_t astar = inst.optimal_arm();
        double mean_sub = 0.0;
        for (std::size_t a = 0; a < k; ++a)
            if (a != astar) mean_sub += theta1.logits[a];
        mean_sub /= static_cast<double>(k - 1);
        const double rmin = inst.min_reward();
        const double factor = std::exp(theta1.logits[astar] - mean_sub);
        return std::exp(-factor * std::exp(eta * rmin / static_cast<double>(k - 1)) / (eta * rmin));
    }

    const std::size_t a = target.arm;
    if (a >= k) throw InvalidParameter("arm out of range");
    const double ratio = std::exp(log_sum_exp_except(theta1.logits, a) - theta1.logits[a]);
    if (rule.kind == RuleKind::NpgStoch) {
        const double er = eta * inst.reward(a);
        return std::exp(-std::exp(er) / er * ratio);
    }
    if (rule.kind == RuleKind::GnpgStoch) {
        return std::exp(-std::sqrt(2.0) * std::exp(eta / std::sqrt(2.0)) / eta * ratio);
    }
    throw UnsupportedRule("no closed-form forever bound for " + to_string(rule.kind));
}

double npg_forced_log_envelope(const ParamVector& theta1, const BanditInstance& inst, std::size_t arm,
                               double eta, std::size_t t) {
    return log_sum_exp_except(theta1.logits, arm) - theta1.logits[arm] -
           eta * inst.reward(arm) * static_cast<double>(t - 1);
}

std::optional<double> stepwise_optimality_violation(const UpdateRuleSpec& rule, const ParamVector& theta,
                                                    const BanditInstance& inst, std::size_t action) {
    const std::size_t astar = inst.optimal_arm();
    PolicyState before = initial_state(rule, theta);
    PolicyVector pi = policy_of(before);
    PolicyState after = step(rule, before, inst, action);
    const double diff = prob_of(after, astar) - pi.probs[astar];
    if (action == astar) return -diff;
    const bool gated = rule.kind == RuleKind::PgStoch || rule.kind == RuleKind::GnpgStoch;
    if (gated && !dominating(pi, astar)) return std::nullopt;
    return diff;
}

OptimalitySmartReport verify_optimality_smart(const UpdateRuleSpec& rule, const ParamVector& theta1,
                                              const BanditInstance& inst, std::size_t T, std::uint64_t seed) {
    if (theta1.size() != inst.num_arms()) throw DimensionMismatch("theta and instance sizes differ");
    validate_rule(rule, inst);
    const std::size_t k = inst.num_arms();
    const std::size_t astar = inst.optimal_arm();
    const bool gated = rule.kind == RuleKind::PgStoch || rule.kind == RuleKind::GnpgStoch;

    std::vector<double> forced(T + 1);
    PolicyState s = initial_state(rule, theta1);
    forced[0] = prob_of(s, astar);
    for (std::size_t t = 1; t <= T; ++t) {
        s = step(rule, s, inst, astar);
        forced[t] = prob_of(s, astar);
    }

    OptimalitySmartReport rep;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> seq;

    auto visit_step = [&](const PolicyState& from, std::size_t a, const PolicyState& to, std::size_t t) {
        PolicyVector pf = policy_of(from);
        double now = prob_of(to, astar);
        double v = now - forced[t];
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.worst_sequence = seq;
        }
        if (a == astar || !gated || dominating(pf, astar)) {
            double sv = a == astar ? pf.probs[astar] - now : now - pf.probs[astar];
            rep.max_stepwise_violation = std::max(rep.max_stepwise_violation, sv);
            ++rep.stepwise_checks;
        }
    };

    double count = std::pow(static_cast<double>(k), static_cast<double>(T));
    if (count <= static_cast<double>(kExhaustiveLimit)) {
        rep.exhaustive = true;
        std::function<void(const PolicyState&, std::size_t)> dfs = [&](const PolicyState& st, std::size_t t) {
            if (t == T) {
                ++rep.sequences;
                return;
            }
            for (std::size_t a = 0; a < k; ++a) {
                PolicyState nx;
                try {
                    nx = step(rule, st, inst, a);
                } catch (const NumericalError&) {
                    ++rep.pruned;
                    continue;
                }
                seq.push_back(a);
                visit_step(st, a, nx, t + 1);
                dfs(nx, t + 1);
                seq.pop_back();
            }
        };
        dfs(initial_state(rule, theta1), 0);
    } else {
        constexpr std::size_t kSamples = 10000;
        for (std::size_t i = 0; i < kSamples; ++i) {
            CounterRng rng(seed, i);
            PolicyState st = initial_state(rule, theta1);
            seq.clear();
            for (std::size_t t = 1; t <= T; ++t) {
                std::size_t a = static_cast<std::size_t>(rng.bits(t) % k);
                PolicyState nx;
                try {
                    nx = step(rule, st, inst, a);
                } catch (const NumericalError&) {
                    ++rep.pruned;
                    break;
                }
                seq.push_back(a);
                visit_step(st, a, nx, t);
                st = std::move(nx);
            }
            ++rep.sequences;
        }
    }
    if (T == 0) rep.max_violation = 0.0;
    return rep;
}

} // namespace commitlab
