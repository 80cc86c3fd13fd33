#pragma once

#include <functional>
#include <string>
#include <vector>

#include "occest/types.hpp"

namespace occest {

// An objective over occupancy profiles (one state vector per level), with a
// declared Lipschitz constant in the summed per-level l1 distance. Objectives
// may look at the policy (plug-in return does).
struct OccupancyObjective {
  std::string name;
  double lipschitz = 0;
  bool needs_distribution = false;  // projected onto the simplex in online mode
  std::function<double(const std::vector<Vec>&, const MarkovPolicy&)> eval;
};

// Spot-checks the declared Lipschitz constant on random perturbation pairs
// (10 per registration); throws when a pair violates it.
void lipschitz_spot_check(const OccupancyObjective& obj, int num_states, int horizon,
                          uint64_t seed);

OccupancyObjective make_return_objective(const RewardFunction& rewards, int num_states,
                                         int horizon);
OccupancyObjective make_l2_match_objective(const Vec& target, int horizon);
OccupancyObjective make_neg_entropy_objective(int num_states, int horizon, double alpha = 1e-3);

// Euclidean projection onto the probability simplex, computed by bisection on
// the water level.
Vec simplex_project(const Vec& d);

// argmax of the plug-in objective over policies, index tie-break. In online
// mode, objectives that need valid distributions act on projected estimates;
// pessimistic (offline) callers must pass online_mode = false so estimates
// stay un-projected.
int plugin_objective_select(const std::vector<std::vector<Vec>>& estimates_per_policy,
                            const OccupancyObjective& obj,
                            const std::vector<MarkovPolicy>& policies, bool online_mode,
                            std::vector<double>* values = nullptr);

}  // namespace occest
