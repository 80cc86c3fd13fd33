#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "occest/dataset.hpp"
#include "occest/types.hpp"

namespace occest {

// Density class { <mu, theta> : valid distribution, ||theta||_inf <= bound }.
struct LinearDensityClass {
  Mat feature;  // X x d
  double theta_inf_bound = 1.0;
};

struct InfeasibleDensityClass : std::runtime_error {
  int witness_state;
  InfeasibleDensityClass(const std::string& what, int witness)
      : std::runtime_error(what), witness_state(witness) {}
};

struct DataInconsistency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MleResult {
  Vec density;
  Vec theta;
  double loglik = 0;  // mean log-likelihood on the sample
};

// Constrained maximum likelihood over the linear density class, solved by
// projected gradient ascent with a penalty for the nonnegativity and
// normalization constraints. Convergence: objective improvement below tol
// over a 50-iteration window, per penalty round.
MleResult mle_density(const std::vector<int>& samples, const LinearDensityClass& cls, double tol);

// Importance-weight hypothesis: ratio of two feature-linear functions, with
// the evaluation clamped into [-cap, cap] and values where the denominator is
// below 1e-12 in magnitude defined to be 0.
struct WeightRatio {
  Vec theta_up;
  Vec theta_down;
  Mat feature;  // X x d
  double cap = 0;

  double eval(int x) const;
  Vec eval_all() const;
};

struct WeightClass {
  Mat feature;
  double cap = 0;
};

// Empirical squared loss of w_next against the per-sample targets
// w_prev(x) * pibar(a|x) / piD(a|x) on the block's regression split.
double regression_loss(const LevelBlock& block, const WeightRatio& w_next, const Vec& w_prev,
                       const Mat& pibar);

// Same loss for an arbitrary state-indexed function (used to evaluate the
// Bayes regression function on the same data).
double regression_loss_values(const LevelBlock& block, const Vec& w_next_values,
                              const Vec& w_prev, const Mat& pibar);

struct FitResult {
  WeightRatio w;
  double loss = 0;
  int restart = 0;
  std::vector<double> restart_losses;
};

// Multi-restart projected-gradient fit of the weight ratio minimizing the
// empirical regression loss. Restart 0 starts the denominator at
// theta_down_init (pass the MLE coefficients of the next-state marginal);
// later restarts perturb it. Ties break by lowest loss then restart index.
FitResult fit_weight(const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                     const WeightClass& cls, int restarts, uint64_t seed, double tol = 1e-8,
                     const Vec* theta_down_init = nullptr);

Vec clip_state_density(const Vec& d, const Vec& dD, double cx);
Mat clip_action_level(const Mat& pi, const Mat& piD, double ca);
PseudoPolicy clip_action_policy(const MarkovPolicy& pi, const MarkovPolicy& piD, double ca);

struct ExtractResult {
  Vec density;
  int negative_clamps = 0;
};

// d_hat = w * ddag_hat pointwise; negative products are clamped to 0 and
// counted.
ExtractResult extract_density(const WeightRatio& w, const Vec& ddag_hat);

}  // namespace occest
