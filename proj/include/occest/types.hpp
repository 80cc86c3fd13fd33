#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace occest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Non-stationary H-step policy. levels[h] is an X-by-K table whose rows are
// conditional action distributions.
struct MarkovPolicy {
  std::vector<Mat> levels;

  int horizon() const { return static_cast<int>(levels.size()); }
};

// Like MarkovPolicy, but rows may sum to less than 1. Produced by clipping a
// policy against a data policy.
struct PseudoPolicy {
  std::vector<Mat> levels;

  int horizon() const { return static_cast<int>(levels.size()); }
};

// A per-level state distribution (possibly sub-normalized for clipped
// occupancies).
struct Occupancy {
  int level = 0;
  Vec values;
};

// Per-level reward tables R_h(x, a) with entries in [0, 1].
struct RewardFunction {
  std::vector<Mat> levels;
};

// State and action clipping thresholds, one pair per level.
struct ClipThresholds {
  std::vector<double> cx;
  std::vector<double> ca;
};

inline double l1_norm(const Vec& v) { return v.lpNorm<1>(); }
inline double l1_dist(const Vec& a, const Vec& b) { return (a - b).lpNorm<1>(); }

inline PseudoPolicy as_pseudo(const MarkovPolicy& pi) {
  PseudoPolicy out;
  out.levels = pi.levels;
  return out;
}

inline MarkovPolicy uniform_policy(int num_states, int num_actions, int horizon) {
  MarkovPolicy pi;
  pi.levels.assign(horizon, Mat::Constant(num_states, num_actions, 1.0 / num_actions));
  return pi;
}

void check_policy(const MarkovPolicy& pi, int num_states, int num_actions, double tol = 1e-9);
void check_pseudo_policy(const PseudoPolicy& pi, int num_states, int num_actions,
                         double tol = 1e-9);

}  // namespace occest
