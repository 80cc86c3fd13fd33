#pragma once

#include <cstdint>
#include <vector>

#include "occest/estimators.hpp"
#include "occest/mdp.hpp"
#include "occest/types.hpp"

namespace occest {

struct ForcConfig {
  std::vector<double> cx;  // state clipping thresholds, per level
  std::vector<double> ca;  // action clipping thresholds, per level
  int n_mle = 0;           // informational; blocks carry their own splits
  int n_reg = 0;
  int restarts = 8;
  double mle_tol = 1e-8;
  double reg_tol = 1e-8;
  uint64_t seed = 0;
};

struct ForcLevelDiag {
  int level = 0;  // the level being estimated (>= 1)
  Vec dD_hat;     // estimated current-state data marginal at level-1
  Vec ddag_hat;   // estimated next-state data marginal
  Vec w_hat;      // fitted weight evaluated at every state
  Vec w_tilde;    // regression-target weight at level-1
  Mat pibar;      // clipped pseudo-policy table at level-1
  double clipped_mass = 0;
  int negative_clamps = 0;
  double fit_loss = 0;
  int fit_restart = 0;
  int candidate = -1;  // representation-learning variants only

  // filled by the oracle audits when the true model is available
  double mle_err_dD = -1;
  double mle_err_ddag = -1;
  double reg_slack = -1;
  double bayes_loss = -1;
};

struct ForcOutput {
  std::vector<Occupancy> estimates;   // levels 0..H-1
  std::vector<ForcLevelDiag> diags;   // levels 1..H-1 (empty for H=1)
};

// Offline fitted occupancy iteration with clipping for a single policy. The
// dataset must carry blocks for levels 0..H-2 with declared splits; level-0
// current-state marginal is the known initial distribution.
ForcOutput forc_estimate(const TupleDataset& ds, const MarkovPolicy& pi,
                         const std::vector<Mat>& mu, const Vec& init_dist,
                         const ForcConfig& cfg);

// Same recursion with MLE and regression replaced by exact population
// quantities (true data marginals and the Bayes-optimal weight), for
// debugging and oracle checks. dD_true/data_policies are indexed by level and
// must cover 0..H-2.
ForcOutput forc_estimate_oracle(const LowRankMdp& m, const MarkovPolicy& pi,
                                const std::vector<Vec>& dD_true,
                                const std::vector<Mat>& data_policies, const ForcConfig& cfg);

struct SampleSizes {
  double n_mle = 0;
  double n_reg = 0;
};

// Sample sizes that make the unfolded finite-sample error bound equal eps,
// with each of the two error terms budgeted eps/2 and the logarithmic factors
// instantiated at the given horizon, dimension, and failure probability.
// b_mu defaults to d, the simplex-feature value. For the union-class variants
// pass the candidate count (the largest per-level class size).
SampleSizes theoretical_sample_sizes(double eps, double delta, const ClipThresholds& thresholds,
                                     int d, int H, double b_mu = -1, int num_candidates = 1);

struct SelectResult {
  int index = 0;
  std::vector<double> values;
};

// Plug-in return maximization over clipped (pessimistic) estimates; ties go
// to the lowest policy index.
SelectResult pessimistic_policy_select(const std::vector<ForcOutput>& outputs,
                                       const RewardFunction& rewards,
                                       const std::vector<MarkovPolicy>& policies);

// Shared helpers for the level step (also used by the online loop and the
// representation-learning variants).
Vec weight_regression_target(const Vec& d_prev_hat, const Vec& dD_hat, double cx);
double state_clipped_mass(const Vec& d_prev_hat, const Vec& dD_hat, double cx);

}  // namespace occest
