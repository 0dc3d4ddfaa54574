#include "commitlab/rules.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "commitlab/errors.hpp"

namespace commitlab {

namespace {

constexpr std::array<std::pair<RuleKind, const char*>, 10> kRuleNames{{
    {RuleKind::PgTrue, "pg-true"},
    {RuleKind::NpgTrue, "npg-true"},
    {RuleKind::GnpgTrue, "gnpg-true"},
    {RuleKind::PgStoch, "pg-stoch"},
    {RuleKind::NpgStoch, "npg-stoch"},
    {RuleKind::GnpgStoch, "gnpg-stoch"},
    {RuleKind::NpgOracleBaseline, "npg-oracle-baseline"},
    {RuleKind::NpgLargeBaseline, "npg-large-baseline"},
    {RuleKind::Staying, "staying"},
    {RuleKind::Samba, "samba"},
}};

constexpr std::array<std::pair<EtaPolicy, const char*>, 3> kEtaNames{{
    {EtaPolicy::Constant, "constant"},
    {EtaPolicy::CommittalProof, "committal-proof"},
    {EtaPolicy::GradNormOver12, "grad-norm-over-12"},
}};

void check_action(std::size_t action, std::size_t k) {
    if (action >= k) throw InvalidParameter("action " + std::to_string(action) + " out of range");
}

void check_finite_update(const ParamVector& theta) {
    for (double x : theta.logits)
        if (!std::isfinite(x)) throw NumericalError("update produced a non-finite logit");
}

// 1/pi(a) without forming pi(a), so tiny probabilities do not lose digits.
double inverse_prob(const ParamVector& theta, std::size_t a) {
    return std::exp(log_sum_exp(theta.logits) - theta.logits[a]);
}

} // namespace

std::string to_string(RuleKind k) {
    for (const auto& [kind, name] : kRuleNames)
        if (kind == k) return name;
    return "unknown";
}

std::string to_string(EtaPolicy p) {
    for (const auto& [pol, name] : kEtaNames)
        if (pol == p) return name;
    return "unknown";
}

RuleKind rule_kind_from_string(const std::string& s) {
    std::string t = s;
    std::replace(t.begin(), t.end(), '_', '-');
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& [kind, name] : kRuleNames)
        if (t == name) return kind;
    throw InvalidParameter("unknown rule '" + s + "'");
}

EtaPolicy eta_policy_from_string(const std::string& s) {
    for (const auto& [pol, name] : kEtaNames)
        if (s == name) return pol;
    throw InvalidParameter("unknown eta policy '" + s + "'");
}

bool is_true_gradient(RuleKind k) {
    return k == RuleKind::PgTrue || k == RuleKind::NpgTrue || k == RuleKind::GnpgTrue;
}

bool is_stochastic_pg_family(RuleKind k) {
    return k == RuleKind::PgStoch || k == RuleKind::NpgStoch || k == RuleKind::GnpgStoch;
}

bool is_baseline(RuleKind k) {
    return k == RuleKind::NpgOracleBaseline || k == RuleKind::NpgLargeBaseline;
}

void validate_rule(const UpdateRuleSpec& spec, const BanditInstance& inst) {
    if (spec.eta_policy == EtaPolicy::Constant) {
        if (!(spec.eta > 0.0) || !std::isfinite(spec.eta)) throw InvalidParameter("eta must be positive");
    } else if (spec.eta_policy == EtaPolicy::CommittalProof) {
        if (spec.kind != RuleKind::PgStoch) throw InvalidParameter("committal-proof eta applies to pg-stoch only");
    } else if (spec.kind != RuleKind::PgStoch && spec.kind != RuleKind::PgTrue) {
        throw InvalidParameter("grad-norm-over-12 eta applies to pg kinds only");
    }
    const double rstar = inst.optimal_reward();
    if (spec.kind == RuleKind::NpgOracleBaseline) {
        if (!(spec.baseline_b > rstar - inst.gap() && spec.baseline_b < rstar))
            throw InvalidParameter("oracle baseline must satisfy r* - gap < b < r*");
    }
    if (spec.kind == RuleKind::NpgLargeBaseline) {
        if (!(spec.baseline_b > rstar) || !std::isfinite(spec.baseline_b))
            throw InvalidParameter("large baseline must exceed r*");
    }
    if (spec.kind == RuleKind::Samba) {
        if (!(spec.eta < inst.gap() / (rstar - inst.gap())))
            throw InvalidParameter("samba needs eta < gap / (r* - gap)");
    }
}

UpdateRuleSpec make_rule(RuleKind kind, double eta, const BanditInstance& inst, double baseline_b,
                         EtaPolicy policy) {
    UpdateRuleSpec spec{kind, eta, baseline_b, policy};
    validate_rule(spec, inst);
    return spec;
}

IsEstimate is_estimate(const BanditInstance& inst, const PolicyVector& pi, std::size_t action) {
    if (pi.size() != inst.num_arms()) throw DimensionMismatch("policy and instance sizes differ");
    check_action(action, pi.size());
    if (!(pi.probs[action] > 0.0)) throw InvalidParameter("sampled action has zero probability");
    IsEstimate est{Vec(pi.size(), 0.0), action};
    est.r_hat[action] = inst.reward(action) / pi.probs[action];
    return est;
}

std::size_t greedy_arm(const Vec& probs) {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double effective_eta(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst,
                     std::size_t action) {
    switch (spec.eta_policy) {
    case EtaPolicy::Constant:
        return spec.eta;
    case EtaPolicy::CommittalProof:
        return softmax(theta).probs[action] / (5.0 * inst.reward(action));
    case EtaPolicy::GradNormOver12:
        return true_gradient(theta, inst).l2_norm / 12.0;
    }
    return spec.eta;
}

Vec stochastic_direction(RuleKind kind, const ParamVector& theta, const BanditInstance& inst,
                         std::size_t action, double baseline_b) {
    const std::size_t k = theta.size();
    if (k != inst.num_arms()) throw DimensionMismatch("theta and instance sizes differ");
    check_action(action, k);
    require_finite(theta.logits, "theta");
    Vec d(k, 0.0);
    const double r = inst.reward(action);
    switch (kind) {
    case RuleKind::PgStoch: {
        PolicyVector pi = softmax(theta);
        double rest = 0.0;
        for (std::size_t b = 0; b < k; ++b) {
            if (b == action) continue;
            rest += pi.probs[b];
            d[b] = -pi.probs[b] * r;
        }
        d[action] = rest * r;
        return d;
    }
    case RuleKind::NpgStoch:
        d[action] = r * inverse_prob(theta, action);
        return d;
    case RuleKind::GnpgStoch: {
        // Proportional to ((1 - pi(a_t)), -pi(b) for b != a_t); the common factor r(a_t)/Z is
        // dropped and the rest rescaled by the largest non-sampled weight.
        double m = -INFINITY;
        for (std::size_t b = 0; b < k; ++b)
            if (b != action) m = std::max(m, theta.logits[b]);
        double rest = 0.0;
        for (std::size_t b = 0; b < k; ++b) {
            if (b == action) continue;
            double w = std::exp(theta.logits[b] - m);
            d[b] = -w;
            rest += w;
        }
        d[action] = rest;
        double n = 0.0;
        for (double x : d) n += x * x;
        n = std::sqrt(n);
        if (!(n > 0.0)) throw ZeroGradientError("stochastic gradient has zero norm");
        for (double& x : d) x /= n;
        return d;
    }
    case RuleKind::NpgOracleBaseline:
    case RuleKind::NpgLargeBaseline:
        d[action] = (r - baseline_b) * inverse_prob(theta, action);
        return d;
    default:
        throw UnsupportedRule("no stochastic direction for rule " + to_string(kind));
    }
}

ParamVector step_true(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst) {
    if (!is_true_gradient(spec.kind)) throw UnsupportedRule(to_string(spec.kind) + " is not a true-gradient rule");
    if (theta.size() != inst.num_arms()) throw DimensionMismatch("theta and instance sizes differ");
    ParamVector out = theta;
    if (spec.kind == RuleKind::NpgTrue) {
        for (std::size_t a = 0; a < out.size(); ++a) out.logits[a] += spec.eta * inst.reward(a);
    } else {
        GradientReport g = true_gradient(theta, inst);
        if (spec.kind == RuleKind::PgTrue) {
            double eta = spec.eta_policy == EtaPolicy::GradNormOver12 ? g.l2_norm / 12.0 : spec.eta;
            for (std::size_t a = 0; a < out.size(); ++a) out.logits[a] += eta * g.gradient[a];
        } else {
            if (!(g.l2_norm > 0.0)) throw ZeroGradientError("true gradient has zero norm");
            double big = 0.0;
            for (double x : g.gradient) big = std::max(big, std::abs(x));
            double sq = 0.0;
            for (double x : g.gradient) sq += (x / big) * (x / big);
            const double n = std::sqrt(sq);
            for (std::size_t a = 0; a < out.size(); ++a) out.logits[a] += spec.eta * (g.gradient[a] / big) / n;
        }
    }
    check_finite_update(out);
    return out;
}

ParamVector step_stochastic(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst,
                            std::size_t action) {
    if (!is_stochastic_pg_family(spec.kind)) throw UnsupportedRule(to_string(spec.kind) + " is not a stochastic rule");
    Vec d = stochastic_direction(spec.kind, theta, inst, action);
    double eta = effective_eta(spec, theta, inst, action);
    ParamVector out = theta;
    for (std::size_t a = 0; a < out.size(); ++a) out.logits[a] += eta * d[a];
    check_finite_update(out);
    return out;
}

ParamVector step_baseline(const UpdateRuleSpec& spec, const ParamVector& theta, const BanditInstance& inst,
                          std::size_t action) {
    if (!is_baseline(spec.kind)) throw UnsupportedRule(to_string(spec.kind) + " is not a baseline rule");
    Vec d = stochastic_direction(spec.kind, theta, inst, action, spec.baseline_b);
    ParamVector out = theta;
    out.logits[action] += spec.eta * d[action];
    check_finite_update(out);
    return out;
}

SambaState step_samba(const SambaState& state, const BanditInstance& inst, std::size_t action, double eta) {
    const std::size_t k = state.probs.size();
    if (k != inst.num_arms()) throw DimensionMismatch("state and instance sizes differ");
    check_action(action, k);
    const std::size_t g = greedy_arm(state.probs);
    const double ratio = inst.reward(action) / state.probs[action];
    SambaState out = state;
    if (action == g) {
        for (std::size_t b = 0; b < k; ++b)
            if (b != g) out.probs[b] -= eta * state.probs[b] * state.probs[b] * ratio;
    } else {
        out.probs[action] += eta * state.probs[action] * state.probs[action] * ratio;
    }
    double rest = 0.0;
    for (std::size_t b = 0; b < k; ++b)
        if (b != g) rest += out.probs[b];
    out.probs[g] = 1.0 - rest;
    for (std::size_t b = 0; b < k; ++b) {
        if (!(out.probs[b] > 0.0 && out.probs[b] < 1.0))
            throw NumericalError("samba step left the simplex at arm " + std::to_string(b) +
                                 " (value " + std::to_string(out.probs[b]) + ")");
    }
    return out;
}

PolicyState initial_state(const UpdateRuleSpec& spec, const ParamVector& theta1) {
    if (spec.kind == RuleKind::Samba) return SambaState{softmax(theta1).probs};
    require_finite(theta1.logits, "theta");
    return theta1;
}

PolicyVector policy_of(const PolicyState& state) {
    if (const auto* s = std::get_if<SambaState>(&state)) return PolicyVector{s->probs};
    return softmax(std::get<ParamVector>(state));
}

PolicyState step(const UpdateRuleSpec& spec, const PolicyState& state, const BanditInstance& inst,
                 std::optional<std::size_t> action) {
    if (spec.kind == RuleKind::Samba) {
        const auto* s = std::get_if<SambaState>(&state);
        if (!s) throw InvalidParameter("samba needs a simplex state");
        if (!action) throw InvalidParameter("samba needs a sampled action");
        return step_samba(*s, inst, *action, spec.eta);
    }
    const auto* theta = std::get_if<ParamVector>(&state);
    if (!theta) throw InvalidParameter("rule needs a logit state");
    if (spec.kind == RuleKind::Staying) return *theta;
    if (is_true_gradient(spec.kind)) return step_true(spec, *theta, inst);
    if (!action) throw InvalidParameter(to_string(spec.kind) + " needs a sampled action");
    if (is_baseline(spec.kind)) return step_baseline(spec, *theta, inst, *action);
    return step_stochastic(spec, *theta, inst, *action);
}

MomentReport stochastic_moment_oracle(const UpdateRuleSpec& spec, const ParamVector& theta,
                                      const BanditInstance& inst) {
    if (!is_stochastic_pg_family(spec.kind) && !is_baseline(spec.kind))
        throw UnsupportedRule(to_string(spec.kind) + " has no sampling distribution");
    PolicyVector pi = softmax(theta);
    MomentReport rep{Vec(theta.size(), 0.0), 0.0};
    for (std::size_t a = 0; a < theta.size(); ++a) {
        Vec d = stochastic_direction(spec.kind, theta, inst, a, spec.baseline_b);
        double sq = 0.0;
        for (std::size_t b = 0; b < d.size(); ++b) {
            rep.mean_update[b] += pi.probs[a] * d[b];
            sq += d[b] * d[b];
        }
        rep.second_moment += pi.probs[a] * sq;
    }
    return rep;
}

} // namespace commitlab
