#pragma once
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "commitlab/bandit.hpp"
#include "commitlab/mdp.hpp"
#include "commitlab/rules.hpp"
#include "commitlab/stats.hpp"

namespace commitlab {

inline constexpr double kDefaultEpsCommit = 1e-6;
inline constexpr std::uint64_t kDefaultSeed = 20210705;

struct TrialConfig {
    BanditInstance instance{Vec{1.0, 0.5}};
    UpdateRuleSpec rule;
    ParamVector theta1;       // empty means all zeros
    std::size_t horizon = 1000;  // number of iterates t = 1..T
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t trial_index = 0;
    double eps_commit = kDefaultEpsCommit;
    bool keep_path = true;              // full per-step record, otherwise checkpoints only
    std::vector<std::size_t> checkpoints;  // t values whose sub-optimality is always recorded
};

enum class Outcome { ConvergedOpt, ConvergedSubopt, Undecided };

std::string to_string(Outcome o);

struct Trajectory {
    Vec suboptimality;        // delta_t, when keep_path
    Vec pi_opt;               // pi_t(a*), when keep_path
    std::vector<std::uint32_t> actions;  // a_t for t = 1..T-1, when keep_path
    Vec checkpoint_suboptimality;
    Outcome outcome = Outcome::Undecided;
    std::size_t committed_arm = 0;   // meaningful unless Undecided
    double final_suboptimality = 0.0;
    double final_log_residual = 0.0;     // log(1 - pi_T(leader)), leader = argmax pi_T
    double previous_log_residual = 0.0;  // same arm at T-1
};

ParamVector initial_logits(const TrialConfig& cfg);

// On-policy run: a_t ~ pi_t from the counter stream (seed, trial_index, t).
Trajectory run_trial(const TrialConfig& cfg);

// Deterministic run for the true-gradient kinds (no sampling).
Trajectory run_true_gradient(const TrialConfig& cfg);

struct FailureEstimate {
    std::size_t n_trials = 0;
    std::size_t n_subopt = 0;
    std::size_t n_opt = 0;
    std::size_t n_undecided = 0;
    std::vector<std::size_t> commits_per_arm;
    double p_fail = 0.0;
    Interval interval;
    Vec checkpoint_mean_suboptimality;
};

// Runs trials 0..n_trials-1 on `threads` workers; the fold is ordered by trial index.
FailureEstimate estimate_failure_probability(const TrialConfig& tmpl, std::size_t n_trials, unsigned threads = 1);

enum class RateModel { InvT, InvSqrtT, Exp };

std::string to_string(RateModel m);

struct RateFit {
    RateModel model = RateModel::InvT;
    double constant = 0.0;  // C for InvT / InvSqrtT, c for Exp
    std::size_t t_lo = 0;
    std::size_t t_hi = 0;
    double r2_inv_t = 0.0;
    double r2_inv_sqrt_t = 0.0;
    double r2_exp = 0.0;
    double c_inv_t = 0.0;
    double c_inv_sqrt_t = 0.0;
    double c_exp = 0.0;
    bool underflow = false;
};

// Least squares on log delta_t over the last half: slope -1 and -1/2 on log t with free
// intercept, and a free line in t. Best R^2 wins.
RateFit fit_rate(const Vec& suboptimality);

std::size_t ensemble_size(double p, double delta);

struct EnsembleReport {
    double p_hat = 0.0;
    Interval p_interval;
    double delta = 0.0;
    std::size_t n_runs = 0;
    std::size_t repetitions = 0;
    std::size_t failures = 0;
    double empirical_success_rate = 0.0;
    Trajectory best_run;  // best run of the first repetition
};

// Probes use trial indices [0, n_probe); repetition r, run j uses n_probe + r*n_runs + j.
// When p_supplied is set the probes are skipped.
EnsembleReport run_ensemble(const TrialConfig& tmpl, double delta, std::size_t n_probe, std::size_t repetitions,
                            unsigned threads = 1, std::optional<double> p_supplied = std::nullopt);

struct Table1Cell {
    std::string rule;
    double eta = 0.0;
    RateFit rate;             // true row
    FailureEstimate failure;  // stochastic row
};

struct Table1Report {
    Vec rewards;
    std::size_t true_horizon = 0;
    std::size_t stoch_horizon = 0;
    std::size_t n_trials = 0;
    std::vector<Table1Cell> true_row;
    std::vector<Table1Cell> stochastic_row;
};

Table1Report table1_report(const BanditInstance& inst, std::size_t true_horizon, std::size_t stoch_horizon,
                           std::size_t n_trials, std::uint64_t seed, unsigned threads = 1);

struct MdpTrialConfig {
    RuleKind kind = RuleKind::NpgStoch;
    double eta = 1.0;
    std::size_t horizon = 100;
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t trial_index = 0;
    // When set, every state samples this action instead of drawing from the policy.
    std::optional<std::vector<std::size_t>> forced_actions;
};

struct MdpTrajectory {
    Vec value_rho;                 // V_t(rho)
    Vec value_gap;                 // V*(rho) - V_t(rho)
    Eigen::MatrixXd final_probs;
};

MdpTrajectory run_mdp_trial(const FiniteMdp& mdp, const MdpPolicy& init, const MdpTrialConfig& cfg);

} // namespace commitlab
