#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occest/mdp.hpp"
#include "occest/repr.hpp"
#include "occest/types.hpp"

namespace occest {

struct MdpGenParams {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  int rank = 0;
  uint64_t seed = 0;
  std::string feature_style = "simplex";  // or "identity" (requires rank == num_states)
  std::string init_style = "dirichlet";   // or "uniform"
};

// Random low-rank MDP with simplex features: mu columns are Dirichlet(1)
// distributions over states (so the l1 feature bound equals the rank) and
// each phi(x,a) is a random point in the rank-simplex, making every
// transition row a convex combination of densities. Valid by construction.
LowRankMdp generate_random_lowrank_mdp(const MdpGenParams& params);

struct PolicyGenParams {
  int count = 0;
  double det_fraction = 0.5;
  uint64_t seed = 0;
};

// Mix of random deterministic and softmax policies. With at least two
// actions, policies 0 and 1 are deterministic with disjoint greedy actions so
// the induced occupancy set is non-degenerate.
std::vector<MarkovPolicy> generate_policy_class(const PolicyGenParams& params,
                                                const LowRankMdp& m);

// Candidate feature set: the true features plus num_decoys random simplex
// feature draws per level; truth_index = 0.
FeatureCandidateSet generate_feature_candidates(const LowRankMdp& m, int num_decoys,
                                                uint64_t seed);

RewardFunction generate_random_rewards(int num_states, int num_actions, int horizon,
                                       uint64_t seed);

// The fixed small instance used by the calibrated end-to-end checks:
// 9 states, 2 actions, horizon 4, rank 3, simplex features.
LowRankMdp desk_instance();
std::vector<MarkovPolicy> desk_policy_class(const LowRankMdp& m);

}  // namespace occest
