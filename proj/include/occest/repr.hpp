#pragma once

#include <optional>
#include <vector>

#include "occest/forc.hpp"
#include "occest/force.hpp"

namespace occest {

// Finite candidate density-feature class, one list per level. truth_index is
// test-only metadata marking the planted true feature, if any.
struct FeatureCandidateSet {
  std::vector<std::vector<Mat>> levels;
  std::optional<int> truth_index;

  int horizon() const { return static_cast<int>(levels.size()); }
  const std::vector<Mat>& at_level(int h) const { return levels.at(h); }
};

struct UnionMleResult {
  MleResult best;
  int candidate = -1;
  std::vector<double> logliks;          // -inf for infeasible candidates
  std::vector<Vec> thetas;              // empty Vec for infeasible candidates
  std::vector<int> infeasible_witness;  // parallel to candidates; -2 = feasible
};

// MLE over the union of the candidates' linear density classes: per-candidate
// MLE, then the best log-likelihood with index tie-break (ties rounded at
// 1e-10). Throws when every candidate is infeasible, listing the witnesses.
UnionMleResult union_mle_density(const std::vector<int>& samples,
                                 const std::vector<Mat>& candidates, double tol);

struct UnionFitResult {
  FitResult fit;
  int candidate = -1;
  std::vector<double> losses;
};

// Weight fit over the union class: one fit_weight per candidate with the same
// seed, global loss argmin, index tie-break.
UnionFitResult union_fit_weight(const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                                double cap, const std::vector<Mat>& candidates, int restarts,
                                uint64_t seed, double tol,
                                const std::vector<Vec>& theta_down_inits = {});

struct JointSelectResult {
  int candidate = -1;
  std::vector<Vec> d_tilde;
  std::vector<Vec> theta;
  std::vector<double> residuals;
  double max_residual = 0;
  std::vector<double> per_candidate_max_residual;
};

// min over candidates of max over policies of the l1 linearization residual;
// every estimate is then linearized with the single selected feature.
JointSelectResult joint_feature_select(const std::vector<Vec>& estimates,
                                       const std::vector<Mat>& candidates);

// Offline estimation with union function classes. With a singleton candidate
// set this reproduces forc_estimate exactly.
ForcOutput forcrl_estimate(const TupleDataset& ds, const MarkovPolicy& pi,
                           const FeatureCandidateSet& candidates, const Vec& init_dist,
                           const ForcConfig& cfg);

// Online loop with union estimation and joint feature selection in place of
// the per-policy linearization.
ForceResult forcrle_run(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                        const FeatureCandidateSet& candidates, const ForceConfig& cfg);

ForceResult forcrle_run_oracle(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                               const FeatureCandidateSet& candidates, const ForceConfig& cfg);

}  // namespace occest
