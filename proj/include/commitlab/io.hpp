#pragma once
#include <ostream>

#include <json.hpp>

#include "commitlab/bandit.hpp"
#include "commitlab/committal.hpp"
#include "commitlab/harness.hpp"
#include "commitlab/mdp.hpp"
#include "commitlab/rules.hpp"

namespace commitlab {

using Json = nlohmann::ordered_json;

Json to_json(const BanditInstance& inst);
BanditInstance bandit_from_json(const Json& j);

Json to_json(const UpdateRuleSpec& spec);
// Reads {"kind", "eta", "baseline_b", "eta_policy"}; validates against the instance.
UpdateRuleSpec rule_from_json(const Json& j, const BanditInstance& inst);

Json to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const Json& j);

Json to_json(const CommittalEstimate& est);
Json to_json(const RateFit& fit);
Json to_json(const FailureEstimate& est);
Json to_json(const EnsembleReport& rep);
Json to_json(const Table1Report& rep);

// Columns t,suboptimality,pi_opt,action (action empty on the last row).
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

// Indented JSON; doubles use the shortest representation that round-trips.
std::string dump_json(const Json& j);

} // namespace commitlab
