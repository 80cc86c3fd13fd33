#pragma once

#include <cstdint>
#include <vector>

#include "occest/dataset.hpp"
#include "occest/forc.hpp"
#include "occest/mdp.hpp"
#include "occest/spanner.hpp"

namespace occest {

struct SpannerMode {
  bool exact = true;
  double approx_c = 2.0;
};

struct ForceConfig {
  int n_mle = 0;
  int n_reg = 0;
  int restarts = 8;
  double mle_tol = 1e-8;
  double reg_tol = 1e-8;
  uint64_t seed = 0;
  SpannerMode spanner;
};

struct ForceLevelTrace {
  int level = 0;  // target level h; data is drawn at h-1
  std::vector<int> expl;
  SpannerResult spanner;
  LevelBlock block;  // empty in oracle mode
  Vec dD_hat;
  Vec ddag_hat;
  int mle_candidate = -1;        // union variants only
  int linearize_candidate = -1;  // union variants only
  std::vector<Vec> d_tilde;      // per policy
  std::vector<Vec> theta_tilde;
  std::vector<double> lp_residuals;
  std::vector<ForcLevelDiag> policy_diags;
};

struct ForceResult {
  std::vector<std::vector<Occupancy>> estimates;  // [policy][level]
  std::vector<ForceLevelTrace> trace;
  int deployments = 0;  // number of mixture policies deployed for data collection
};

// Online policy-cover loop: per level, pick the barycentric spanner of the
// linearized estimates, roll the uniform mixture of those policies in and take
// uniform actions, then run the offline level step for every policy with
// cx = rank and ca = num_actions, and linearize. Deterministic given the seed.
ForceResult force_run(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                      const ForceConfig& cfg);

// Same loop with the estimation replaced by exact population quantities.
ForceResult force_run_oracle(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                             const ForceConfig& cfg);

struct L1Fit {
  Vec theta;
  Vec fitted;
  double residual = 0;
};

// Closest feature-linear approximation in l1 norm (epigraph LP).
L1Fit l1_linearize(const Vec& d_hat, const Mat& mu);

SelectResult online_policy_select(const std::vector<std::vector<Occupancy>>& estimates,
                                  const RewardFunction& rewards,
                                  const std::vector<MarkovPolicy>& policies);

}  // namespace occest
