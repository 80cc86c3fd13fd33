#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "occest/forc.hpp"
#include "occest/force.hpp"
#include "occest/mdp.hpp"
#include "occest/repr.hpp"
#include "occest/types.hpp"

namespace occest {

// File formats. The MDP document is
//   {num_states, num_actions, horizon, rank, phi: [h][x][a][i], mu: [h][x][i],
//    init_dist: [x]}
// with all arrays row-major as indexed.

nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);

void save_mdp_json(const LowRankMdp& m, const std::string& path);
LowRankMdp load_mdp_json(const std::string& path);

void save_policies_json(const std::vector<MarkovPolicy>& policies, const std::string& path);
std::vector<MarkovPolicy> load_policies_json(const std::string& path, int num_states,
                                             int num_actions);

void save_rewards_json(const RewardFunction& r, const std::string& path);
RewardFunction load_rewards_json(const std::string& path, int num_states, int num_actions);

void save_candidates_json(const FeatureCandidateSet& set, const std::string& path);
FeatureCandidateSet load_candidates_json(const std::string& path);

Vec load_target_json(const std::string& path);

nlohmann::json forc_output_to_json(const ForcOutput& out, int policy_id);
nlohmann::json force_trace_to_json(const ForceResult& run, bool include_tuples = false);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace occest
