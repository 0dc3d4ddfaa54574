#include "commitlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "commitlab/errors.hpp"
#include "commitlab/rng.hpp"

namespace commitlab {

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be written by index;
// the first exception (by index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

double leader_log_residual(const PolicyState& state, std::size_t arm) {
    if (const auto* s = std::get_if<SambaState>(&state)) {
        double u = 0.0;
        for (std::size_t b = 0; b < s->probs.size(); ++b)
            if (b != arm) u += s->probs[b];
        return std::log(u);
    }
    return log_residual(std::get<ParamVector>(state), arm);
}

} // namespace

std::string to_string(Outcome o) {
    switch (o) {
    case Outcome::ConvergedOpt: return "CONVERGED_OPT";
    case Outcome::ConvergedSubopt: return "CONVERGED_SUBOPT";
    case Outcome::Undecided: return "UNDECIDED";
    }
    return "UNKNOWN";
}

std::string to_string(RateModel m) {
    switch (m) {
    case RateModel::InvT: return "INV_T";
    case RateModel::InvSqrtT: return "INV_SQRT_T";
    case RateModel::Exp: return "EXP";
    }
    return "UNKNOWN";
}

ParamVector initial_logits(const TrialConfig& cfg) {
    if (cfg.theta1.logits.empty()) return ParamVector{Vec(cfg.instance.num_arms(), 0.0)};
    if (cfg.theta1.size() != cfg.instance.num_arms()) throw DimensionMismatch("theta1 and instance sizes differ");
    return cfg.theta1;
}

Trajectory run_trial(const TrialConfig& cfg) {
    if (cfg.horizon < 1) throw InvalidParameter("horizon must be at least 1");
    if (!(cfg.eps_commit > 0.0 && cfg.eps_commit < 1.0)) throw InvalidParameter("eps_commit must lie in (0,1)");
    validate_rule(cfg.rule, cfg.instance);
    const BanditInstance& inst = cfg.instance;
    const std::size_t astar = inst.optimal_arm();
    const bool sampled = !is_true_gradient(cfg.rule.kind);
    CounterRng rng(cfg.seed, cfg.trial_index);

    Trajectory tr;
    if (cfg.keep_path) {
        tr.suboptimality.reserve(cfg.horizon);
        tr.pi_opt.reserve(cfg.horizon);
        tr.actions.reserve(cfg.horizon);
    }
    std::vector<std::size_t> cps = cfg.checkpoints;
    std::sort(cps.begin(), cps.end());
    std::size_t next_cp = 0;

    PolicyState state = initial_state(cfg.rule, initial_logits(cfg));
    PolicyState prev = state;
    for (std::size_t t = 1; t <= cfg.horizon; ++t) {
        PolicyVector pi = policy_of(state);
        const double delta = suboptimality(pi, inst);
        if (!std::isfinite(delta)) throw NumericalError("non-finite sub-optimality at step " + std::to_string(t));
        if (cfg.keep_path) {
            tr.suboptimality.push_back(delta);
            tr.pi_opt.push_back(pi.probs[astar]);
        }
        while (next_cp < cps.size() && cps[next_cp] == t) {
            tr.checkpoint_suboptimality.push_back(delta);
            ++next_cp;
        }
        tr.final_suboptimality = delta;
        if (t == cfg.horizon) break;
        std::optional<std::size_t> action;
        if (sampled) {
            action = sample_categorical(pi.probs, rng.uniform(t));
            if (cfg.keep_path) tr.actions.push_back(static_cast<std::uint32_t>(*action));
        }
        prev = state;
        try {
            state = step(cfg.rule, state, inst, action);
        } catch (const ZeroGradientError&) {
            // the policy is deterministic to double precision; the normalized step is undefined
            // and the iterate is stationary
            if (delta != 0.0) throw;
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at step " + std::to_string(t));
        }
    }
    for (; next_cp < cps.size(); ++next_cp) tr.checkpoint_suboptimality.push_back(NAN);

    const std::size_t leader = greedy_arm(policy_of(state).probs);
    tr.final_log_residual = leader_log_residual(state, leader);
    tr.previous_log_residual = leader_log_residual(prev, leader);
    if (tr.final_log_residual < std::log(cfg.eps_commit)) {
        tr.committed_arm = leader;
        tr.outcome = leader == astar ? Outcome::ConvergedOpt : Outcome::ConvergedSubopt;
    }
    return tr;
}

Trajectory run_true_gradient(const TrialConfig& cfg) {
    if (!is_true_gradient(cfg.rule.kind)) throw UnsupportedRule(to_string(cfg.rule.kind) + " samples actions");
    return run_trial(cfg);
}

FailureEstimate estimate_failure_probability(const TrialConfig& tmpl, std::size_t n_trials, unsigned threads) {
    if (n_trials < 1) throw InvalidParameter("need at least one trial");
    std::vector<Trajectory> results(n_trials);
    parallel_for(n_trials, threads, [&](std::size_t i) {
        TrialConfig cfg = tmpl;
        cfg.trial_index = i;
        cfg.keep_path = false;
        results[i] = run_trial(cfg);
    });
    FailureEstimate est;
    est.n_trials = n_trials;
    est.commits_per_arm.assign(tmpl.instance.num_arms(), 0);
    est.checkpoint_mean_suboptimality.assign(tmpl.checkpoints.size(), 0.0);
    for (const Trajectory& tr : results) {
        switch (tr.outcome) {
        case Outcome::ConvergedOpt: ++est.n_opt; break;
        case Outcome::ConvergedSubopt: ++est.n_subopt; break;
        case Outcome::Undecided: ++est.n_undecided; break;
        }
        if (tr.outcome != Outcome::Undecided) ++est.commits_per_arm[tr.committed_arm];
        for (std::size_t c = 0; c < tr.checkpoint_suboptimality.size(); ++c)
            est.checkpoint_mean_suboptimality[c] += tr.checkpoint_suboptimality[c];
    }
    for (double& m : est.checkpoint_mean_suboptimality) m /= static_cast<double>(n_trials);
    est.p_fail = static_cast<double>(est.n_subopt) / static_cast<double>(n_trials);
    est.interval = wilson_interval(est.n_subopt, n_trials);
    return est;
}

RateFit fit_rate(const Vec& suboptimality) {
    const std::size_t T = suboptimality.size();
    if (T < 4) throw InvalidParameter("rate fit needs at least four points");
    RateFit fit;
    fit.t_lo = std::max<std::size_t>(1, T / 2);
    fit.t_hi = T;
    for (std::size_t t = fit.t_lo; t <= T; ++t) {
        double d = suboptimality[t - 1];
        if (!(d > 0.0) || !std::isfinite(d)) {
            fit.underflow = true;
            fit.t_hi = t - 1;
            break;
        }
    }
    if (fit.underflow && fit.t_hi < fit.t_lo + 1) fit.t_lo = fit.t_hi >= 2 ? fit.t_hi - 1 : 1;
    if (fit.t_hi < 2 || fit.t_hi < fit.t_lo + 1) throw InvalidParameter("sub-optimality underflowed immediately");

    std::vector<double> lt, tt, y;
    for (std::size_t t = fit.t_lo; t <= fit.t_hi; ++t) {
        lt.push_back(std::log(static_cast<double>(t)));
        tt.push_back(static_cast<double>(t));
        y.push_back(std::log(suboptimality[t - 1]));
    }
    LineFit inv_t = fit_fixed_slope(lt, y, -1.0);
    LineFit inv_sqrt = fit_fixed_slope(lt, y, -0.5);
    LineFit expo = fit_line(tt, y);
    fit.r2_inv_t = inv_t.r2;
    fit.r2_inv_sqrt_t = inv_sqrt.r2;
    fit.r2_exp = expo.r2;
    fit.c_inv_t = std::exp(inv_t.intercept);
    fit.c_inv_sqrt_t = std::exp(inv_sqrt.intercept);
    fit.c_exp = -expo.slope;

    if (fit.underflow || (fit.r2_exp >= fit.r2_inv_t && fit.r2_exp >= fit.r2_inv_sqrt_t)) {
        fit.model = RateModel::Exp;
        fit.constant = fit.c_exp;
    } else if (fit.r2_inv_t >= fit.r2_inv_sqrt_t) {
        fit.model = RateModel::InvT;
        fit.constant = fit.c_inv_t;
    } else {
        fit.model = RateModel::InvSqrtT;
        fit.constant = fit.c_inv_sqrt_t;
    }
    return fit;
}

std::size_t ensemble_size(double p, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("delta must lie in (0,1)");
    if (!(p > 0.0))
        throw InvalidParameter("per-run success probability is zero; cannot size the ensemble "
                               "(use more probes, a longer horizon, or supply p)");
    if (p >= 1.0) return 1;
    double n = std::ceil(std::log(1.0 / delta) / std::log(1.0 / (1.0 - p)));
    return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

EnsembleReport run_ensemble(const TrialConfig& tmpl, double delta, std::size_t n_probe, std::size_t repetitions,
                            unsigned threads, std::optional<double> p_supplied) {
    if (repetitions < 1) throw InvalidParameter("need at least one repetition");
    EnsembleReport rep;
    rep.delta = delta;
    std::size_t offset = 0;
    if (p_supplied) {
        rep.p_hat = *p_supplied;
    } else {
        if (n_probe < 1) throw InvalidParameter("need probe trials or a supplied p");
        FailureEstimate probe = estimate_failure_probability(tmpl, n_probe, threads);
        rep.p_hat = static_cast<double>(probe.n_opt) / static_cast<double>(n_probe);
        rep.p_interval = wilson_interval(probe.n_opt, n_probe);
        offset = n_probe;
    }
    rep.n_runs = ensemble_size(rep.p_hat, delta);
    rep.repetitions = repetitions;

    const std::size_t total = repetitions * rep.n_runs;
    std::vector<Trajectory> runs(total);
    parallel_for(total, threads, [&](std::size_t i) {
        TrialConfig cfg = tmpl;
        cfg.trial_index = offset + i;
        cfg.keep_path = false;
        runs[i] = run_trial(cfg);
    });
    std::size_t first_best = 0;
    for (std::size_t r = 0; r < repetitions; ++r) {
        std::size_t best = r * rep.n_runs;
        for (std::size_t j = 1; j < rep.n_runs; ++j) {
            std::size_t i = r * rep.n_runs + j;
            if (runs[i].final_suboptimality < runs[best].final_suboptimality) best = i;
        }
        if (r == 0) first_best = best;
        if (runs[best].outcome != Outcome::ConvergedOpt) ++rep.failures;
    }
    rep.empirical_success_rate = 1.0 - static_cast<double>(rep.failures) / static_cast<double>(repetitions);
    TrialConfig cfg = tmpl;
    cfg.trial_index = offset + first_best;
    rep.best_run = run_trial(cfg);
    return rep;
}

Table1Report table1_report(const BanditInstance& inst, std::size_t true_horizon, std::size_t stoch_horizon,
                           std::size_t n_trials, std::uint64_t seed, unsigned threads) {
    Table1Report rep;
    rep.rewards = inst.rewards();
    rep.true_horizon = true_horizon;
    rep.stoch_horizon = stoch_horizon;
    rep.n_trials = n_trials;
    const std::pair<RuleKind, double> true_rules[] = {
        {RuleKind::PgTrue, 0.4}, {RuleKind::NpgTrue, 1.0}, {RuleKind::GnpgTrue, 1.0 / 6.0}};
    for (const auto& [kind, eta] : true_rules) {
        TrialConfig cfg;
        cfg.instance = inst;
        cfg.rule = make_rule(kind, eta, inst);
        cfg.horizon = true_horizon;
        cfg.seed = seed;
        Trajectory tr = run_true_gradient(cfg);
        rep.true_row.push_back({to_string(kind), eta, fit_rate(tr.suboptimality), {}});
    }
    for (RuleKind kind : {RuleKind::PgStoch, RuleKind::NpgStoch, RuleKind::GnpgStoch}) {
        TrialConfig cfg;
        cfg.instance = inst;
        cfg.rule = make_rule(kind, 1.0, inst);
        cfg.horizon = stoch_horizon;
        cfg.seed = seed;
        rep.stochastic_row.push_back({to_string(kind), 1.0, {}, estimate_failure_probability(cfg, n_trials, threads)});
    }
    return rep;
}

MdpTrajectory run_mdp_trial(const FiniteMdp& mdp, const MdpPolicy& init, const MdpTrialConfig& cfg) {
    if (cfg.horizon < 1) throw InvalidParameter("horizon must be at least 1");
    const std::size_t S = mdp.num_states();
    if (cfg.forced_actions && cfg.forced_actions->size() != S)
        throw DimensionMismatch("forced actions need one entry per state");
    OptimalSolution opt = policy_iteration(mdp);
    CounterRng rng(cfg.seed, cfg.trial_index);
    MdpTrajectory tr;
    MdpPolicy pol = init;
    for (std::size_t t = 1; t <= cfg.horizon; ++t) {
        ValueBundle vb = solve_values(mdp, pol);
        tr.value_rho.push_back(vb.v_rho);
        tr.value_gap.push_back(opt.values.v_rho - vb.v_rho);
        if (t == cfg.horizon) break;
        std::optional<std::vector<std::size_t>> actions;
        if (!is_true_gradient(cfg.kind)) {
            if (cfg.forced_actions) {
                actions = cfg.forced_actions;
            } else {
                Eigen::MatrixXd pi = pol.probs();
                std::vector<std::size_t> a(S);
                for (std::size_t s = 0; s < S; ++s) {
                    Vec row(pi.cols());
                    for (Eigen::Index j = 0; j < pi.cols(); ++j) row[static_cast<std::size_t>(j)] = pi(static_cast<Eigen::Index>(s), j);
                    a[s] = sample_categorical(row, rng.uniform(t * S + s));
                }
                actions = std::move(a);
            }
        }
        try {
            pol = step_mdp(cfg.kind, mdp, pol, cfg.eta, actions);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at step " + std::to_string(t));
        }
    }
    tr.final_probs = pol.probs();
    return tr;
}

} // namespace commitlab
