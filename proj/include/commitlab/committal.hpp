#pragma once
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "commitlab/bandit.hpp"
#include "commitlab/rules.hpp"

namespace commitlab {

struct FixedActionTrajectory {
    UpdateRuleSpec rule;
    std::size_t forced_arm = 0;
    Vec residuals;          // u_t = sum_{b != a} pi_t(b), t = 1..T
    Vec log_residuals;      // log u_t, exact even after u_t underflows
    Vec log_running_product; // sum_{s <= t} log pi_s(a)
    // First t whose update would have produced a non-finite logit; the state is held from there.
    std::optional<std::size_t> saturated_at;

    std::size_t horizon() const { return residuals.size(); }
    double running_product() const;
};

FixedActionTrajectory fixed_action_trajectory(const UpdateRuleSpec& rule, const ParamVector& theta1,
                                              const BanditInstance& inst, std::size_t arm, std::size_t T);

// Columns t,u_t,log_u_t,running_product.
void write_trajectory_csv(std::ostream& os, const FixedActionTrajectory& traj);

enum class CommittalClass { Polynomial, Exponential, Zero };

std::string to_string(CommittalClass c);

struct CommittalEstimate {
    CommittalClass classification = CommittalClass::Zero;
    std::optional<double> alpha_hat;
    double fit_r2_poly = 0.0;
    double fit_r2_exp = 0.0;
    double slope_poly = 0.0;
    double slope_exp = 0.0;
    std::size_t t_lo = 0;
    std::size_t t_hi = 0;
    bool underflow = false;
};

// Classification constants.
inline constexpr double kR2Margin = 0.05;
inline constexpr double kDecayFloor = 1e-6;
inline constexpr double kStagnationRatio = 0.9;

// Fits log u_t against log t and against t on [ceil(sqrt(T)), T]; needs T >= 100.
CommittalEstimate estimate_committal_rate(const FixedActionTrajectory& traj);

struct ArmTarget {
    bool all_suboptimal = false;
    std::size_t arm = 0;

    static ArmTarget single(std::size_t a) { return {false, a}; }
    static ArmTarget suboptimal_set() { return {true, 0}; }
};

// Closed-form lower bound on the probability that on-policy sampling picks the target forever.
double forever_probability_lower_bound(const UpdateRuleSpec& rule, const ParamVector& theta1,
                                       const BanditInstance& inst, ArmTarget target);

// Log of the geometric envelope for NPG_STOCH forced on arm a:
// log( sum_{b != a} e^{theta1(b)} ) - theta1(a) - eta r(a)(t - 1).
double npg_forced_log_envelope(const ParamVector& theta1, const BanditInstance& inst, std::size_t arm,
                               double eta, std::size_t t);

struct OptimalitySmartReport {
    double max_violation = 0.0;          // max over sequences and t of pi_t(a*) - pi~_t(a*)
    std::vector<std::size_t> worst_sequence;
    double max_stepwise_violation = 0.0; // per-step monotonicity, decrease case gated by dominance for PG/GNPG
    std::size_t sequences = 0;
    std::size_t stepwise_checks = 0;
    // branches cut because a step overflowed (a logit jump of 1/pi with pi below ~1e-308)
    std::size_t pruned = 0;
    bool exhaustive = false;
};

inline constexpr std::size_t kExhaustiveLimit = 4096;

// Compares every reachable pi_t(a*) (t <= T updates) with the forced-a* trajectory. Exhaustive when
// K^T <= 4096, otherwise 10^4 sequences drawn uniformly with the given seed.
OptimalitySmartReport verify_optimality_smart(const UpdateRuleSpec& rule, const ParamVector& theta1,
                                              const BanditInstance& inst, std::size_t T,
                                              std::uint64_t seed = 0);

// Violation of the one-step property at theta for the given action; nullopt when the case is not
// covered (PG/GNPG decrease case with a* not dominating).
std::optional<double> stepwise_optimality_violation(const UpdateRuleSpec& rule, const ParamVector& theta,
                                                    const BanditInstance& inst, std::size_t action);

} // namespace commitlab
