#include "commitlab/io.hpp"

#include <cmath>
#include <iomanip>

#include "commitlab/errors.hpp"

namespace commitlab {

namespace {

Json vec_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd json_vec(const Json& j, const char* what) {
    if (!j.is_array()) throw InvalidParameter(std::string(what) + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json interval_json(const Interval& iv) { return Json::array({iv.lo, iv.hi}); }

template <class T>
T required(const Json& j, const char* key) {
    if (!j.contains(key)) throw InvalidParameter(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameter(std::string("bad field '") + key + "': " + e.what());
    }
}

} // namespace

Json to_json(const BanditInstance& inst) { return Json{{"rewards", inst.rewards()}}; }

BanditInstance bandit_from_json(const Json& j) { return BanditInstance(required<Vec>(j, "rewards")); }

Json to_json(const UpdateRuleSpec& spec) {
    Json j{{"kind", to_string(spec.kind)}, {"eta", spec.eta}};
    if (is_baseline(spec.kind)) j["baseline_b"] = spec.baseline_b;
    if (spec.eta_policy != EtaPolicy::Constant) j["eta_policy"] = to_string(spec.eta_policy);
    return j;
}

UpdateRuleSpec rule_from_json(const Json& j, const BanditInstance& inst) {
    UpdateRuleSpec spec;
    spec.kind = rule_kind_from_string(required<std::string>(j, "kind"));
    spec.eta = j.contains("eta") ? required<double>(j, "eta") : 1.0;
    if (j.contains("baseline_b")) spec.baseline_b = required<double>(j, "baseline_b");
    if (j.contains("eta_policy")) spec.eta_policy = eta_policy_from_string(required<std::string>(j, "eta_policy"));
    validate_rule(spec, inst);
    return spec;
}

Json to_json(const FiniteMdp& mdp) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    Json P = Json::array();
    Json r = Json::array();
    for (std::size_t s = 0; s < S; ++s) {
        Json ps = Json::array();
        Json rs = Json::array();
        for (std::size_t a = 0; a < A; ++a) {
            Json row = Json::array();
            for (std::size_t n = 0; n < S; ++n) row.push_back(mdp.prob(s, a, n));
            ps.push_back(row);
            rs.push_back(mdp.rewards()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)));
        }
        P.push_back(ps);
        r.push_back(rs);
    }
    return Json{{"P", P}, {"r", r}, {"gamma", mdp.gamma()}, {"mu", vec_json(mdp.mu())}, {"rho", vec_json(mdp.rho())}};
}

FiniteMdp mdp_from_json(const Json& j) {
    for (const char* key : {"P", "r", "gamma", "mu", "rho"})
        if (!j.contains(key)) throw InvalidParameter(std::string("mdp is missing field '") + key + "'");
    const Json& P = j["P"];
    const Json& r = j["r"];
    if (!P.is_array() || P.empty() || !r.is_array() || r.size() != P.size())
        throw InvalidParameter("mdp P and r must be arrays over states");
    const std::size_t S = P.size();
    const std::size_t A = P[0].size();
    Eigen::MatrixXd trans(static_cast<Eigen::Index>(S * A), static_cast<Eigen::Index>(S));
    Eigen::MatrixXd rew(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(A));
    for (std::size_t s = 0; s < S; ++s) {
        if (P[s].size() != A || r[s].size() != A) throw InvalidParameter("every state needs the same action count");
        for (std::size_t a = 0; a < A; ++a) {
            if (P[s][a].size() != S) throw InvalidParameter("transition rows need one entry per state");
            for (std::size_t n = 0; n < S; ++n)
                trans(static_cast<Eigen::Index>(s * A + a), static_cast<Eigen::Index>(n)) = P[s][a][n].get<double>();
            rew(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = r[s][a].get<double>();
        }
    }
    return FiniteMdp(std::move(trans), std::move(rew), j["gamma"].get<double>(), json_vec(j["mu"], "mu"),
                     json_vec(j["rho"], "rho"));
}

Json to_json(const CommittalEstimate& est) {
    Json j{{"classification", to_string(est.classification)},
           {"alpha_hat", est.alpha_hat ? Json(*est.alpha_hat) : Json(nullptr)},
           {"fit_r2_poly", est.fit_r2_poly},
           {"fit_r2_exp", est.fit_r2_exp},
           {"slope_log_log", est.slope_poly},
           {"slope_semi_log", est.slope_exp},
           {"tail_window", Json::array({est.t_lo, est.t_hi})},
           {"underflow", est.underflow}};
    return j;
}

Json to_json(const RateFit& fit) {
    return Json{{"model", to_string(fit.model)},
                {"constant", fit.constant},
                {"window", Json::array({fit.t_lo, fit.t_hi})},
                {"r2", {{"INV_T", fit.r2_inv_t}, {"INV_SQRT_T", fit.r2_inv_sqrt_t}, {"EXP", fit.r2_exp}}},
                {"constants", {{"INV_T", fit.c_inv_t}, {"INV_SQRT_T", fit.c_inv_sqrt_t}, {"EXP", fit.c_exp}}},
                {"underflow", fit.underflow}};
}

Json to_json(const FailureEstimate& est) {
    return Json{{"n_trials", est.n_trials},
                {"p_fail", est.p_fail},
                {"interval", interval_json(est.interval)},
                {"converged_opt", est.n_opt},
                {"converged_subopt", est.n_subopt},
                {"undecided", est.n_undecided},
                {"commits_per_arm", est.commits_per_arm},
                {"checkpoint_mean_suboptimality", est.checkpoint_mean_suboptimality}};
}

Json to_json(const EnsembleReport& rep) {
    return Json{{"p_hat", rep.p_hat},
                {"p_interval", interval_json(rep.p_interval)},
                {"delta", rep.delta},
                {"n_runs", rep.n_runs},
                {"repetitions", rep.repetitions},
                {"failures", rep.failures},
                {"empirical_success_rate", rep.empirical_success_rate},
                {"best_run", {{"outcome", to_string(rep.best_run.outcome)},
                              {"final_suboptimality", rep.best_run.final_suboptimality}}}};
}

Json to_json(const Table1Report& rep) {
    Json t = Json::array();
    for (const auto& c : rep.true_row) t.push_back(Json{{"rule", c.rule}, {"eta", c.eta}, {"rate", to_json(c.rate)}});
    Json s = Json::array();
    for (const auto& c : rep.stochastic_row)
        s.push_back(Json{{"rule", c.rule}, {"eta", c.eta}, {"failure", to_json(c.failure)}});
    return Json{{"rewards", rep.rewards},
                {"true_horizon", rep.true_horizon},
                {"stochastic_horizon", rep.stoch_horizon},
                {"n_trials", rep.n_trials},
                {"true_row", t},
                {"stochastic_row", s}};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "t,suboptimality,pi_opt,action\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tr.suboptimality.size(); ++i) {
        os << (i + 1) << ',' << tr.suboptimality[i] << ',' << tr.pi_opt[i] << ',';
        if (i < tr.actions.size()) os << tr.actions[i];
        os << '\n';
    }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

} // namespace commitlab
