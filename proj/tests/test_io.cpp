#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "commitlab/errors.hpp"
#include "commitlab/io.hpp"

using namespace commitlab;

TEST_CASE("bandit and rule JSON round-trip") {
    BanditInstance inst(Vec{0.3, 1.0, 0.6});
    Json j = to_json(inst);
    CHECK(j.dump() == R"({"rewards":[0.3,1.0,0.6]})");
    CHECK(bandit_from_json(j).rewards() == inst.rewards());
    CHECK_THROWS_AS(bandit_from_json(Json{{"reward", {1.0}}}), InvalidParameter);
    CHECK_THROWS_AS(bandit_from_json(Json::parse(R"({"rewards":[1.0,1.0]})")), InvalidParameter);

    UpdateRuleSpec s = make_rule(RuleKind::NpgOracleBaseline, 0.5, inst, 0.9);
    UpdateRuleSpec back = rule_from_json(to_json(s), inst);
    CHECK(back.kind == s.kind);
    CHECK(back.eta == s.eta);
    CHECK(back.baseline_b == s.baseline_b);
    CHECK_THROWS_AS(rule_from_json(Json::parse(R"({"kind":"npg-large-baseline","baseline_b":0.5})"), inst),
                    InvalidParameter);
    CHECK_THROWS_AS(rule_from_json(Json::parse(R"({"eta":1})"), inst), InvalidParameter);
    UpdateRuleSpec pol = rule_from_json(Json::parse(R"({"kind":"pg_stoch","eta_policy":"committal-proof"})"), inst);
    CHECK(pol.eta_policy == EtaPolicy::CommittalProof);
}

TEST_CASE("mdp JSON round-trip") {
    FiniteMdp m = random_mdp(3, 2, 0.8, 4);
    FiniteMdp back = mdp_from_json(to_json(m));
    CHECK(back.transition() == m.transition());
    CHECK(back.rewards() == m.rewards());
    CHECK(back.gamma() == m.gamma());
    CHECK(back.mu() == m.mu());
    CHECK(back.rho() == m.rho());
}

TEST_CASE("trajectory CSV round-trips doubles") {
    Trajectory tr;
    tr.suboptimality = {0.1, 1.0 / 3.0};
    tr.pi_opt = {0.9, 2.0 / 3.0};
    tr.actions = {1};
    std::ostringstream os;
    write_trajectory_csv(os, tr);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,suboptimality,pi_opt,action");
    std::getline(in, line);
    CHECK(line == "1,0.10000000000000001,0.90000000000000002,1");
    std::getline(in, line);
    double v = std::stod(line.substr(2, line.find(',', 2) - 2));
    CHECK(v == 1.0 / 3.0);
    CHECK(line.back() == ',');
}
