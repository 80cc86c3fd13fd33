#pragma once

#include <string>
#include <vector>

#include "occest/dataset.hpp"
#include "occest/types.hpp"

namespace occest {

// Finite low-rank MDP. Transitions factor through left features phi[h]
// (one row per state-action pair) and density features mu[h] (one row per
// state): P_h(x'|x,a) = <phi[h].row(x*K+a), mu[h].row(x')>.
//
// Kernels are precomputed at construction. Entries in [-1e-12, 0) are clamped
// to zero and rows whose sum is within 1e-9 of 1 are renormalized; anything
// worse is left alone and shows up in validate_mdp.
struct LowRankMdp {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  int rank = 0;
  std::vector<Mat> phi;    // phi[h]: (X*K) x d
  std::vector<Mat> mu;     // mu[h]:  X x d
  Vec init_dist;           // d_0
  double mu_l1_bound = 0;  // max_h sum_x ||mu_h(x)||_1
  std::vector<Mat> trans;  // trans[h]: (X*K) x X, row-stochastic

  int sa_index(int x, int a) const { return x * num_actions + a; }
};

LowRankMdp make_low_rank_mdp(int num_states, int num_actions, int horizon, int rank,
                             std::vector<Mat> phi, std::vector<Mat> mu, Vec init_dist);

// Checks the factorization invariants on the raw features. Returns one entry
// per violated constraint, empty when the instance is valid.
std::vector<std::string> validate_mdp(const LowRankMdp& m);

// Forward flow operator: (P^pi_h d)(x') = sum_{x,a} P_h(x'|x,a) pi(a|x) d(x).
// The policy argument may be sub-normalized.
Vec bellman_flow_level(const LowRankMdp& m, int h, const Mat& pibar_level, const Vec& d);
Vec bellman_flow(const LowRankMdp& m, int h, const PseudoPolicy& pi, const Vec& d);

// d_0^pi = d_0, d_h^pi = P^pi_{h-1} d_{h-1}^pi, for h in 0..H-1.
std::vector<Occupancy> exact_occupancies(const LowRankMdp& m, const MarkovPolicy& pi);

// Recursively clipped occupancies: at each level state mass above
// cx[h] * data_dists[h] and action mass above ca[h] * data_policies[h] are
// removed before applying the flow. data_dists/data_policies/cx/ca are indexed
// by level and must cover levels 0..H-2.
std::vector<Occupancy> clipped_occupancies(const LowRankMdp& m, const MarkovPolicy& pi,
                                           const std::vector<Vec>& data_dists,
                                           const std::vector<Mat>& data_policies,
                                           const std::vector<double>& cx,
                                           const std::vector<double>& ca);

// Draws n i.i.d. (x_h, a_h, x_{h+1}) tuples: the roll-in mixture picks one
// component uniformly per episode and runs it to level h, then a_h follows
// data_policy and x_{h+1} follows the model. Deterministic given seed, and
// episode RNGs are derived per index so the parallel path matches the serial
// reference exactly.
LevelBlock sample_level_dataset(const LowRankMdp& m, int h,
                                const std::vector<MarkovPolicy>& rollin_mixture,
                                const Mat& data_policy, int n, uint64_t seed);

// Expected return sum_h sum_{x,a} d_h^pi(x) R_h(x,a) pi_h(a|x).
double policy_return(const LowRankMdp& m, const MarkovPolicy& pi, const RewardFunction& r);

double policy_return_from(const std::vector<Occupancy>& occ, const MarkovPolicy& pi,
                          const RewardFunction& r);

}  // namespace occest
