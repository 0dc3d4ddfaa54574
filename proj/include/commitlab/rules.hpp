#pragma once
#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include "commitlab/bandit.hpp"

namespace commitlab {

enum class RuleKind {
    PgTrue,
    NpgTrue,
    GnpgTrue,
    PgStoch,
    NpgStoch,
    GnpgStoch,
    NpgOracleBaseline,
    NpgLargeBaseline,
    Staying,
    Samba,
};

// Step-size schedules used by the convergence arguments. Constant is the default.
enum class EtaPolicy {
    Constant,
    CommittalProof,  // eta_t = pi_t(a_t) / (5 r(a_t)), PG_STOCH only
    GradNormOver12,  // eta_t = ||true gradient|| / 12, PG kinds only
};

struct UpdateRuleSpec {
    RuleKind kind = RuleKind::PgTrue;
    double eta = 1.0;
    double baseline_b = 0.0;
    EtaPolicy eta_policy = EtaPolicy::Constant;
};

std::string to_string(RuleKind k);
std::string to_string(EtaPolicy p);
RuleKind rule_kind_from_string(const std::string& s);
EtaPolicy eta_policy_from_string(const std::string& s);

bool is_true_gradient(RuleKind k);
bool is_stochastic_pg_family(RuleKind k);  // PG/NPG/GNPG stochastic
bool is_baseline(RuleKind k);

// Throws InvalidParameter if the rule is not admissible on this instance.
void validate_rule(const UpdateRuleSpec& spec, const BanditInstance& inst);

UpdateRuleSpec make_rule(RuleKind kind, double eta, const BanditInstance& inst,
                         double baseline_b = 0.0, EtaPolicy policy = EtaPolicy::Constant);

struct IsEstimate {
    Vec r_hat;
    std::size_t sampled_action = 0;
};

IsEstimate is_estimate(const BanditInstance& inst, const PolicyVector& pi, std::size_t action);

struct SambaState {
    Vec probs;
};

// Largest probability, lowest index on ties.
std::size_t greedy_arm(const Vec& probs);

// Step size actually used for this step (resolves the adaptive policies).
double effective_eta(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst,
                     std::size_t action);

// Update direction before scaling by eta, for the stochastic and baseline kinds.
Vec stochastic_direction(RuleKind kind, const ParamVector& theta, const BanditInstance& inst,
                         std::size_t action, double baseline_b = 0.0);

ParamVector step_true(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst);
ParamVector step_stochastic(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst,
                            std::size_t action);
ParamVector step_baseline(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst,
                          std::size_t action);
SambaState step_samba(const SambaState& state, const BanditInstance& inst, std::size_t action, double eta);

using PolicyState = std::variant<ParamVector, SambaState>;

PolicyState initial_state(const UpdateRuleSpec& spec, const ParamVector& theta1);
PolicyVector policy_of(const PolicyState& state);

// Uniform stepping entry point. True-gradient kinds and STAYING ignore the action.
PolicyState step(const UpdateRuleSpec& spec, const PolicyState& state, const BanditInstance& inst,
                 std::optional<std::size_t> action);

struct MomentReport {
    Vec mean_update;
    double second_moment = 0.0;
};

// Exact expectation over the K sampling outcomes of the unscaled update direction.
MomentReport stochastic_moment_oracle(const UpdateRuleSpec& spec, const ParamVector& theta,
                                      const BanditInstance& inst);

} // namespace commitlab
