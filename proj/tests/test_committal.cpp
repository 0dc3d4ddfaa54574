#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "commitlab/committal.hpp"
#include "commitlab/errors.hpp"
#include "support.hpp"

using namespace commitlab;
using doctest::Approx;

namespace {

const BanditInstance kInst(Vec{1.0, 0.5});
const ParamVector kZero{{0.0, 0.0}};

FixedActionTrajectory synthetic(const std::function<double(double)>& log_u, std::size_t T) {
    FixedActionTrajectory tr;
    for (std::size_t t = 1; t <= T; ++t) {
        double l = log_u(static_cast<double>(t));
        tr.log_residuals.push_back(l);
        tr.residuals.push_back(std::exp(l));
        tr.log_running_product.push_back(0.0);
    }
    return tr;
}

bool non_decreasing(const Vec& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1]) return false;
    return true;
}

} // namespace

TEST_CASE("classifier on synthetic residual sequences") {
    CommittalEstimate poly = estimate_committal_rate(synthetic([](double t) { return -std::log(t); }, 10000));
    CHECK(poly.classification == CommittalClass::Polynomial);
    CHECK(*poly.alpha_hat == Approx(1.0).epsilon(1e-9));
    CommittalEstimate half = estimate_committal_rate(synthetic([](double t) { return -0.5 * std::log(t) - 2; }, 10000));
    CHECK(*half.alpha_hat == Approx(0.5).epsilon(1e-9));
    CommittalEstimate geo = estimate_committal_rate(synthetic([](double t) { return -0.01 * t; }, 1000));
    CHECK(geo.classification == CommittalClass::Exponential);
    CHECK(!geo.alpha_hat);
    CommittalEstimate flat = estimate_committal_rate(synthetic([](double) { return std::log(0.3); }, 1000));
    CHECK(flat.classification == CommittalClass::Zero);
    CommittalEstimate under = estimate_committal_rate(
        synthetic([](double t) { return t > 50 ? -INFINITY : -t; }, 1000));
    CHECK(under.classification == CommittalClass::Exponential);
    CHECK(under.underflow);
    CHECK(geo.t_lo == 32);
    CHECK_THROWS_AS(estimate_committal_rate(synthetic([](double t) { return -t; }, 50)), InvalidParameter);
}

TEST_CASE("forced trajectory matches a naive re-simulation") {
    testgen::Gen g(41);
    for (int i = 0; i < 50; ++i) {
        BanditInstance b = g.bandit(2, 5);
        ParamVector th = g.theta(b.num_arms(), 1.0);
        std::size_t arm = g.integer(0, b.num_arms() - 1);
        for (RuleKind k : {RuleKind::PgStoch, RuleKind::NpgStoch}) {
            const double eta = 0.3;
            FixedActionTrajectory tr = fixed_action_trajectory(UpdateRuleSpec{k, eta}, th, b, arm, 30);
            Vec x = th.logits;
            for (std::size_t t = 0; t < 30; ++t) {
                Vec p = testgen::naive_softmax(x);
                CHECK(tr.residuals[t] == Approx(1.0 - p[arm]).epsilon(1e-8));
                if (k == RuleKind::NpgStoch) {
                    x[arm] += eta * b.reward(arm) / p[arm];
                } else {
                    for (std::size_t j = 0; j < x.size(); ++j)
                        x[j] += eta * b.reward(arm) * ((j == arm ? 1.0 : 0.0) - p[j]);
                }
            }
        }
    }
}

TEST_CASE("PG forced trajectory commits polynomially with exponent near one") {
    UpdateRuleSpec r{RuleKind::PgStoch, 1.0, 0.0, EtaPolicy::CommittalProof};
    for (std::size_t arm : {0u, 1u}) {
        FixedActionTrajectory tr = fixed_action_trajectory(r, kZero, kInst, arm, 100000);
        CommittalEstimate est = estimate_committal_rate(tr);
        CHECK(est.classification == CommittalClass::Polynomial);
        REQUIRE(est.alpha_hat);
        CHECK(*est.alpha_hat >= 0.8);
        CHECK(*est.alpha_hat <= 1.2);
    }
}

TEST_CASE("NPG and GNPG forced trajectories commit exponentially") {
    for (RuleKind k : {RuleKind::NpgStoch, RuleKind::GnpgStoch}) {
        for (std::size_t arm : {0u, 1u}) {
            FixedActionTrajectory tr = fixed_action_trajectory(UpdateRuleSpec{k, 1.0}, kZero, kInst, arm, 1000);
            CHECK(estimate_committal_rate(tr).classification == CommittalClass::Exponential);
        }
    }
}

TEST_CASE("NPG forced residual stays under its geometric envelope") {
    FixedActionTrajectory tr = fixed_action_trajectory(UpdateRuleSpec{RuleKind::NpgStoch, 1.0}, kZero, kInst, 1, 300);
    for (std::size_t t = 1; t <= 300; ++t)
        CHECK(tr.log_residuals[t - 1] <= npg_forced_log_envelope(kZero, kInst, 1, 1.0, t) + 1e-12);
}

TEST_CASE("SAMBA forced on the greedy arm commits polynomially") {
    UpdateRuleSpec r = make_rule(RuleKind::Samba, 0.5, kInst);
    FixedActionTrajectory tr = fixed_action_trajectory(r, kZero, kInst, 0, 100000);
    CommittalEstimate est = estimate_committal_rate(tr);
    CHECK(est.classification == CommittalClass::Polynomial);
    REQUIRE(est.alpha_hat);
    CHECK(*est.alpha_hat >= 0.8);
    CHECK(*est.alpha_hat <= 1.2);
    CHECK_THROWS_AS(fixed_action_trajectory(r, kZero, kInst, 1, 1000), InvalidParameter);
}

TEST_CASE("baselines: residuals never fall on losing arms") {
    UpdateRuleSpec oracle = make_rule(RuleKind::NpgOracleBaseline, 1.0, kInst, 0.75);
    UpdateRuleSpec large = make_rule(RuleKind::NpgLargeBaseline, 1.0, kInst, 1.5);
    FixedActionTrajectory sub = fixed_action_trajectory(oracle, kZero, kInst, 1, 1000);
    CHECK(non_decreasing(sub.residuals));
    CHECK(sub.saturated_at.has_value());
    FixedActionTrajectory top = fixed_action_trajectory(oracle, kZero, kInst, 0, 1000);
    CHECK(estimate_committal_rate(top).classification == CommittalClass::Exponential);
    for (std::size_t arm : {0u, 1u}) CHECK(non_decreasing(fixed_action_trajectory(large, kZero, kInst, arm, 1000).residuals));
}

TEST_CASE("running product of a polynomially committing rule vanishes") {
    FixedActionTrajectory tr = fixed_action_trajectory(UpdateRuleSpec{RuleKind::PgStoch, 1.0}, kZero, kInst, 1, 1000000);
    CHECK(tr.running_product() < 1e-3);
    CHECK(estimate_committal_rate(tr).classification == CommittalClass::Polynomial);
}

TEST_CASE("forced trajectory errors") {
    CHECK_THROWS_AS(fixed_action_trajectory(UpdateRuleSpec{RuleKind::NpgTrue, 1.0}, kZero, kInst, 0, 100),
                    UnsupportedRule);
    CHECK_THROWS_AS(fixed_action_trajectory(UpdateRuleSpec{RuleKind::NpgStoch, 1.0}, kZero, kInst, 2, 100),
                    InvalidParameter);
}

TEST_CASE("trajectory CSV layout") {
    FixedActionTrajectory tr = fixed_action_trajectory(UpdateRuleSpec{RuleKind::NpgStoch, 1.0}, kZero, kInst, 1, 3);
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::string s = os.str();
    CHECK(s.rfind("t,u_t,log_u_t,running_product\n1,0.5,", 0) == 0);
}

TEST_CASE("closed-form forever bounds") {
    UpdateRuleSpec npg{RuleKind::NpgStoch, 1.0};
    UpdateRuleSpec gnpg{RuleKind::GnpgStoch, 1.0};
    CHECK(forever_probability_lower_bound(npg, kZero, kInst, ArmTarget::single(1)) ==
          Approx(std::exp(-std::exp(0.5) / 0.5)).epsilon(1e-14));
    for (std::size_t a : {0u, 1u})
        CHECK(forever_probability_lower_bound(gnpg, kZero, kInst, ArmTarget::single(a)) ==
              Approx(std::exp(-std::sqrt(2.0) * std::exp(1.0 / std::sqrt(2.0)))).epsilon(1e-14));
    testgen::Gen g(42);
    for (int i = 0; i < 500; ++i) {
        BanditInstance b = g.bandit(2, 6);
        ParamVector th = g.theta(b.num_arms(), 2.0);
        UpdateRuleSpec r{RuleKind::NpgStoch, g.uniform(0.1, 5.0)};
        double v = forever_probability_lower_bound(r, th, b, ArmTarget::single(g.integer(0, b.num_arms() - 1)));
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        double w = forever_probability_lower_bound(r, th, b, ArmTarget::suboptimal_set());
        CHECK(w >= 0.0);
        CHECK(w < 1.0);
    }
    CHECK_THROWS_AS(forever_probability_lower_bound(UpdateRuleSpec{RuleKind::PgStoch, 1.0}, kZero, kInst,
                                                    ArmTarget::single(0)),
                    UnsupportedRule);
}

TEST_CASE("optimality-smart checks") {
    OptimalitySmartReport stay =
        verify_optimality_smart(UpdateRuleSpec{RuleKind::Staying, 1.0}, kZero, kInst, 10);
    CHECK(stay.exhaustive);
    CHECK(stay.sequences == 1024);
    CHECK(stay.max_violation == 0.0);

    OptimalitySmartReport pg = verify_optimality_smart(UpdateRuleSpec{RuleKind::PgStoch, 1.0}, kZero, kInst, 10);
    CHECK(pg.max_violation <= 1e-12);
    CHECK(pg.max_stepwise_violation <= 1e-12);
    OptimalitySmartReport gn = verify_optimality_smart(UpdateRuleSpec{RuleKind::GnpgStoch, 1.0}, kZero, kInst, 10);
    CHECK(gn.max_violation <= 1e-12);

    // per-step monotonicity holds for NPG, but whole-trajectory dominance does not:
    // sampling (a*, a2, a*) ends above the all-a* path because the a2 draw shrinks pi(a*)
    // and so enlarges the next 1/pi(a*) step.
    OptimalitySmartReport npg = verify_optimality_smart(UpdateRuleSpec{RuleKind::NpgStoch, 1.0}, kZero, kInst, 10);
    CHECK(npg.max_stepwise_violation <= 1e-12);
    CHECK(npg.max_violation > 0.01);
    ParamVector th = kZero;
    UpdateRuleSpec r{RuleKind::NpgStoch, 1.0};
    ParamVector forced = kZero;
    for (std::size_t a : {0u, 1u, 0u}) th = step_stochastic(r, th, kInst, a);
    for (int i = 0; i < 3; ++i) forced = step_stochastic(r, forced, kInst, 0);
    CHECK(testgen::naive_softmax(th.logits)[0] > testgen::naive_softmax(forced.logits)[0] + 0.01);

    OptimalitySmartReport sampled =
        verify_optimality_smart(UpdateRuleSpec{RuleKind::PgStoch, 0.5}, ParamVector{{0.0, 0.0, 0.0}},
                                BanditInstance(Vec{1.0, 0.6, 0.3}), 12, 9);
    CHECK(!sampled.exhaustive);
    CHECK(sampled.sequences == 10000);
}
