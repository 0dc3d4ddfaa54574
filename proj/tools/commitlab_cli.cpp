#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commitlab/bandit.hpp"
#include "commitlab/committal.hpp"
#include "commitlab/errors.hpp"
#include "commitlab/harness.hpp"
#include "commitlab/io.hpp"
#include "commitlab/mdp.hpp"
#include "commitlab/rules.hpp"
#include "commitlab/verify.hpp"

namespace fs = std::filesystem;
using namespace commitlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitProperty = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kConfigVersion = 1;

struct CliConfig {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = kDefaultSeed;
    bool seed_set = false;
    unsigned threads = 1;
    std::optional<double> eta;
    std::optional<std::size_t> horizon;
    std::optional<std::size_t> n_trials;
    std::optional<double> delta;

    std::string rule;
    std::string eta_policy;
    std::optional<double> baseline_b;
    std::string rewards;
    std::string theta1;
    std::optional<std::size_t> arm;

    std::vector<std::string> suites;
    std::size_t samples = 1000;
    bool perturb_hessian = false;

    std::optional<std::size_t> n_probe;
    std::optional<std::size_t> repetitions;
    std::optional<std::size_t> stoch_horizon;

    std::optional<std::size_t> states;
    std::optional<std::size_t> actions;
    std::optional<double> gamma;
    std::optional<std::uint64_t> mdp_seed;
};

Json load_config(const CliConfig& c) {
    if (c.config_path.empty()) return Json::object();
    std::ifstream in(c.config_path);
    if (!in) throw InvalidParameter("cannot read config file '" + c.config_path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidParameter(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidParameter("config must be a JSON object");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kConfigVersion)
        throw InvalidParameter("config needs \"version\": " + std::to_string(kConfigVersion));
    return j;
}

template <class T>
T pick(const std::optional<T>& flag, const Json& cfg, const char* key, T fallback) {
    if (flag) return *flag;
    if (cfg.contains(key)) {
        try {
            return cfg.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw InvalidParameter(std::string("bad config field '") + key + "': " + e.what());
        }
    }
    return fallback;
}

Vec parse_list(const std::string& s, const char* what) {
    Vec out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidParameter(std::string("cannot parse ") + what + " entry '" + item + "'");
        }
    }
    return out;
}

fs::path output_dir(const CliConfig& c, const Json& cfg) {
    std::string dir = c.out_dir;
    if (dir.empty() && cfg.contains("output_dir")) dir = cfg["output_dir"].get<std::string>();
    if (dir.empty()) {
        const char* env = std::getenv("COMMITLAB_OUTPUT_DIR");
        dir = env && *env ? env : "commitlab-out";
    }
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw InvalidParameter("output directory '" + dir + "' is not writable");
    return p;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InvalidParameter("cannot write '" + p.string() + "'");
    out << text;
}

std::uint64_t seed_of(const CliConfig& c, const Json& cfg) {
    return c.seed_set ? c.seed : pick<std::uint64_t>(std::nullopt, cfg, "seed", kDefaultSeed);
}

BanditInstance instance_of(const CliConfig& c, const Json& cfg) {
    if (!c.rewards.empty()) return BanditInstance(parse_list(c.rewards, "rewards"));
    if (cfg.contains("instance")) return bandit_from_json(cfg["instance"]);
    throw InvalidParameter("no rewards given (use --rewards or an \"instance\" in the config)");
}

UpdateRuleSpec rule_of(const CliConfig& c, const Json& cfg, const BanditInstance& inst) {
    Json r = cfg.contains("rule") ? cfg["rule"] : Json::object();
    if (!r.is_object()) throw InvalidParameter("config \"rule\" must be an object");
    if (!c.rule.empty()) r["kind"] = c.rule;
    if (c.eta) r["eta"] = *c.eta;
    if (c.baseline_b) r["baseline_b"] = *c.baseline_b;
    if (!c.eta_policy.empty()) r["eta_policy"] = c.eta_policy;
    if (!r.contains("kind")) throw InvalidParameter("no rule given (use --rule or a \"rule\" in the config)");
    return rule_from_json(r, inst);
}

ParamVector theta_of(const CliConfig& c, const Json& cfg, const BanditInstance& inst) {
    ParamVector th;
    if (!c.theta1.empty()) th.logits = parse_list(c.theta1, "theta1");
    else if (cfg.contains("theta1")) th.logits = cfg["theta1"].get<Vec>();
    else th.logits.assign(inst.num_arms(), 0.0);
    if (th.size() != inst.num_arms()) throw DimensionMismatch("theta1 has the wrong number of entries");
    require_finite(th.logits, "theta1");
    return th;
}

int cmd_run(const CliConfig& c) {
    Json cfg = load_config(c);
    TrialConfig t;
    t.instance = instance_of(c, cfg);
    t.rule = rule_of(c, cfg, t.instance);
    t.theta1 = theta_of(c, cfg, t.instance);
    t.horizon = pick(c.horizon, cfg, "horizon", std::size_t{1000});
    t.seed = seed_of(c, cfg);
    if (t.horizon < 1) throw InvalidParameter("horizon must be at least 1");
    fs::path dir = output_dir(c, cfg);
    Trajectory tr = is_true_gradient(t.rule.kind) ? run_true_gradient(t) : run_trial(t);
    std::ostringstream csv;
    write_trajectory_csv(csv, tr);
    Json summary{{"version", kConfigVersion},
                 {"rule", to_json(t.rule)},
                 {"instance", to_json(t.instance)},
                 {"seed", t.seed},
                 {"horizon", t.horizon},
                 {"outcome", to_string(tr.outcome)},
                 {"final_suboptimality", tr.final_suboptimality}};
    if (tr.outcome != Outcome::Undecided) summary["committed_arm"] = tr.committed_arm;
    if (is_true_gradient(t.rule.kind) && t.horizon >= 8) summary["rate_fit"] = to_json(fit_rate(tr.suboptimality));
    write_file(dir / "trajectory.csv", csv.str());
    write_file(dir / "summary.json", dump_json(summary));
    std::cout << "run: " << to_string(t.rule.kind) << " outcome " << to_string(tr.outcome) << ", wrote "
              << (dir / "trajectory.csv").string() << "\n";
    return kExitOk;
}

int cmd_committal(const CliConfig& c) {
    Json cfg = load_config(c);
    BanditInstance inst = instance_of(c, cfg);
    UpdateRuleSpec rule = rule_of(c, cfg, inst);
    ParamVector th = theta_of(c, cfg, inst);
    std::size_t arm = pick(c.arm, cfg, "arm", std::size_t{0});
    std::size_t T = pick(c.horizon, cfg, "horizon", std::size_t{10000});
    if (arm >= inst.num_arms()) throw InvalidParameter("arm index out of range");
    fs::path dir = output_dir(c, cfg);
    FixedActionTrajectory traj = fixed_action_trajectory(rule, th, inst, arm, T);
    CommittalEstimate est = estimate_committal_rate(traj);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    Json j{{"version", kConfigVersion},
           {"rule", to_json(rule)},
           {"instance", to_json(inst)},
           {"arm", arm},
           {"horizon", T},
           {"estimate", to_json(est)}};
    if (traj.saturated_at) j["saturated_at"] = *traj.saturated_at;
    write_file(dir / "committal.csv", csv.str());
    write_file(dir / "committal.json", dump_json(j));
    std::cout << "committal: " << to_string(rule.kind) << " arm " << arm << " -> " << to_string(est.classification);
    if (est.alpha_hat) std::cout << " alpha_hat " << *est.alpha_hat;
    std::cout << "\n";
    return kExitOk;
}

int cmd_verify(const CliConfig& c) {
    Json cfg = load_config(c);
    VerifyOptions o;
    o.seed = seed_of(c, cfg);
    o.samples = c.samples;
    o.perturb_hessian = c.perturb_hessian;
    if (!c.suites.empty()) o.suites = c.suites;
    else if (cfg.contains("suites")) o.suites = cfg["suites"].get<std::vector<std::string>>();
    else o.suites = available_suites();
    if (o.suites.size() == 1 && o.suites[0] == "none") o.suites.clear();
    if (o.suites.empty()) throw InvalidParameter("empty suite selection");
    std::vector<PropertyResult> res = run_property_suite(o);
    std::size_t failed = 0;
    Json out = Json::array();
    for (const auto& r : res) {
        std::cout << (r.failed == 0 ? "PASS " : "FAIL ") << r.name << ": " << (r.checked - r.failed) << "/"
                  << r.checked << " (worst margin " << std::setprecision(6) << r.worst_margin << ")\n";
        failed += r.failed;
        out.push_back(Json{{"name", r.name}, {"checked", r.checked}, {"failed", r.failed}, {"worst_margin", r.worst_margin}});
    }
    fs::path dir = output_dir(c, cfg);
    write_file(dir / "verify.json", dump_json(Json{{"seed", o.seed}, {"samples", o.samples}, {"results", out}}));
    std::cout << (failed == 0 ? "all properties hold\n" : "property failures: " + std::to_string(failed) + "\n");
    return failed == 0 ? kExitOk : kExitProperty;
}

int cmd_ensemble(const CliConfig& c) {
    Json cfg = load_config(c);
    TrialConfig t;
    t.instance = instance_of(c, cfg);
    t.rule = rule_of(c, cfg, t.instance);
    t.theta1 = theta_of(c, cfg, t.instance);
    t.horizon = pick(c.horizon, cfg, "horizon", std::size_t{1000});
    t.seed = seed_of(c, cfg);
    t.keep_path = false;
    double delta = pick(c.delta, cfg, "delta", 0.1);
    std::size_t probes = pick(c.n_probe, cfg, "n_probe", std::size_t{1000});
    std::size_t reps = pick(c.repetitions, cfg, "repetitions", std::size_t{100});
    fs::path dir = output_dir(c, cfg);
    EnsembleReport rep = run_ensemble(t, delta, probes, reps, c.threads);
    Json j = to_json(rep);
    j["rule"] = to_json(t.rule);
    j["instance"] = to_json(t.instance);
    j["seed"] = t.seed;
    j["horizon"] = t.horizon;
    write_file(dir / "ensemble.json", dump_json(j));
    std::cout << "ensemble: n = " << rep.n_runs << ", success rate " << rep.empirical_success_rate
              << " (target " << 1.0 - delta << ")\n";
    return kExitOk;
}

int cmd_table1(const CliConfig& c) {
    Json cfg = load_config(c);
    BanditInstance inst = c.rewards.empty() && !cfg.contains("instance") ? BanditInstance(Vec{1.0, 0.8})
                                                                         : instance_of(c, cfg);
    std::size_t true_T = pick(c.horizon, cfg, "horizon", std::size_t{10000});
    std::size_t stoch_T = pick(c.stoch_horizon, cfg, "stochastic_horizon", std::size_t{1000});
    std::size_t n = pick(c.n_trials, cfg, "n_trials", std::size_t{200});
    fs::path dir = output_dir(c, cfg);
    Table1Report rep = table1_report(inst, true_T, stoch_T, n, seed_of(c, cfg), c.threads);
    write_file(dir / "table1.json", dump_json(to_json(rep)));
    for (const auto& cell : rep.true_row)
        std::cout << "true " << cell.rule << ": " << to_string(cell.rate.model) << " " << cell.rate.constant << "\n";
    for (const auto& cell : rep.stochastic_row)
        std::cout << "stochastic " << cell.rule << ": p_fail " << cell.failure.p_fail << "\n";
    return kExitOk;
}

int cmd_mdp(const CliConfig& c) {
    Json cfg = load_config(c);
    std::uint64_t seed = seed_of(c, cfg);
    FiniteMdp mdp = [&] {
        if (cfg.contains("mdp") && !c.states && !c.actions) return mdp_from_json(cfg["mdp"]);
        std::size_t S = pick(c.states, cfg, "states", std::size_t{5});
        std::size_t A = pick(c.actions, cfg, "actions", std::size_t{3});
        double g = pick(c.gamma, cfg, "gamma", 0.9);
        if (S < 1 || A < 2) throw InvalidParameter("need at least one state and two actions");
        return random_mdp(S, A, g, pick(c.mdp_seed, cfg, "mdp_seed", seed));
    }();
    MdpTrialConfig t;
    std::string kind = !c.rule.empty() ? c.rule : cfg.value("rule", std::string("npg-true"));
    t.kind = rule_kind_from_string(kind);
    t.eta = pick(c.eta, cfg, "eta", 1.0);
    t.horizon = pick(c.horizon, cfg, "horizon", std::size_t{100});
    t.seed = seed;
    if (!(t.eta > 0.0)) throw InvalidParameter("eta must be positive");
    fs::path dir = output_dir(c, cfg);
    MdpTrajectory tr = run_mdp_trial(mdp, uniform_policy(mdp), t);
    std::ostringstream csv;
    csv << "t,value_rho,value_gap\n" << std::setprecision(17);
    for (std::size_t i = 0; i < tr.value_rho.size(); ++i)
        csv << (i + 1) << ',' << tr.value_rho[i] << ',' << tr.value_gap[i] << '\n';
    Json j{{"version", kConfigVersion},
           {"rule", to_string(t.kind)},
           {"eta", t.eta},
           {"horizon", t.horizon},
           {"seed", seed},
           {"mdp", to_json(mdp)},
           {"final_value_gap", tr.value_gap.empty() ? 0.0 : tr.value_gap.back()}};
    write_file(dir / "mdp_trajectory.csv", csv.str());
    write_file(dir / "mdp_summary.json", dump_json(j));
    std::cout << "mdp: " << to_string(t.kind) << " final value gap " << j["final_value_gap"].get<double>() << "\n";
    return kExitOk;
}

void add_common(CLI::App* sub, CliConfig& c) {
    sub->add_option("--config", c.config_path, "JSON config file (versioned); flags override its values");
    sub->add_option("--out", c.out_dir, "output directory (default: $COMMITLAB_OUTPUT_DIR or ./commitlab-out)");
    sub->add_option_function<std::uint64_t>("--seed", [&c](const std::uint64_t& s) { c.seed = s; c.seed_set = true; },
                                            "master seed");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

void add_rule(CLI::App* sub, CliConfig& c) {
    sub->add_option("--rule", c.rule, "update rule, e.g. npg-stoch");
    sub->add_option("--rewards", c.rewards, "comma-separated rewards in (0,1]");
    sub->add_option("--theta1", c.theta1, "comma-separated initial logits (default zeros)");
    sub->add_option("--eta", c.eta, "learning rate");
    sub->add_option("--baseline", c.baseline_b, "baseline b for the baseline rules");
    sub->add_option("--eta-policy", c.eta_policy, "constant, committal-proof or grad-norm-over-12");
    sub->add_option("--horizon", c.horizon, "number of iterates T");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"commitlab: committal-rate experiments for softmax policy gradient"};
    app.require_subcommand(1);
    CliConfig c;

    auto* run = app.add_subcommand("run", "run one trial and write trajectory.csv and summary.json");
    add_common(run, c);
    add_rule(run, c);

    auto* committal = app.add_subcommand("committal", "forced-arm trajectory and committal-rate estimate");
    add_common(committal, c);
    add_rule(committal, c);
    committal->add_option("--arm", c.arm, "forced arm index");

    auto* verify = app.add_subcommand("verify", "run the property suite");
    add_common(verify, c);
    verify->add_option("--suite", c.suites, "suites to run (repeatable; 'none' selects nothing)");
    verify->add_option("--samples", c.samples, "random cases per suite");
    verify->add_flag("--test-perturb-hessian", c.perturb_hessian, "negative control: perturb the Hessian");

    auto* ensemble = app.add_subcommand("ensemble", "ensemble of independent stochastic runs");
    add_common(ensemble, c);
    add_rule(ensemble, c);
    ensemble->add_option("--delta", c.delta, "target failure probability");
    ensemble->add_option("--n-probe", c.n_probe, "probe trials used to estimate p");
    ensemble->add_option("--repetitions", c.repetitions, "ensemble repetitions");

    auto* table1 = app.add_subcommand("table1", "rates and failure probabilities for PG, NPG and GNPG");
    add_common(table1, c);
    table1->add_option("--rewards", c.rewards, "comma-separated rewards (default 1,0.8)");
    table1->add_option("--horizon", c.horizon, "true-gradient horizon");
    table1->add_option("--stochastic-horizon", c.stoch_horizon, "stochastic horizon");
    table1->add_option("--n-trials", c.n_trials, "stochastic trials per rule");

    auto* mdp = app.add_subcommand("mdp", "run a policy update on a finite MDP");
    add_common(mdp, c);
    mdp->add_option("--rule", c.rule, "pg-true, npg-true, gnpg-true, pg-stoch, npg-stoch or gnpg-stoch");
    mdp->add_option("--eta", c.eta, "learning rate");
    mdp->add_option("--horizon", c.horizon, "iterations");
    mdp->add_option("--states", c.states, "number of states of the random MDP");
    mdp->add_option("--actions", c.actions, "number of actions of the random MDP");
    mdp->add_option("--gamma", c.gamma, "discount");
    mdp->add_option("--mdp-seed", c.mdp_seed, "seed of the random MDP (default: --seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) return cmd_run(c);
        if (*committal) return cmd_committal(c);
        if (*verify) return cmd_verify(c);
        if (*ensemble) return cmd_ensemble(c);
        if (*table1) return cmd_table1(c);
        if (*mdp) return cmd_mdp(c);
    } catch (const NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ZeroGradientError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
