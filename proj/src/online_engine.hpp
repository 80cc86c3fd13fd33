#pragma once

// Internal: the level loop shared by the known-feature and
// representation-learning online algorithms. Not installed.

#include <functional>

#include "occest/force.hpp"

namespace occest::detail {

struct MarginalEstimate {
  Vec density;
  Vec theta;
  int candidate = -1;
  std::vector<Vec> candidate_thetas;  // union variants: per-candidate MLE coefficients
};

struct OnlineHooks {
  // MLE of a state marginal whose density class lives at feature level flevel.
  std::function<MarginalEstimate(int flevel, const std::vector<int>& states)> marginal;
  // Weight fit for target level h; ddag carries the estimated next-state
  // marginal and the denominator initialization(s).
  std::function<FitResult(int h, const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                          double cap, uint64_t seed, const MarginalEstimate& ddag, int* candidate)>
      fit;
  // Linearize all policies' level-h estimates (feature level h-1).
  std::function<void(int h, const std::vector<Vec>& ests, std::vector<Vec>* fitted,
                     std::vector<Vec>* thetas, std::vector<double>* residuals, int* candidate)>
      linearize;
};

ForceResult run_online_engine(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                              const ForceConfig& cfg, const OnlineHooks& hooks, bool oracle_mode);

}  // namespace occest::detail
