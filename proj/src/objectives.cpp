#include "occest/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "occest/rng.hpp"

namespace occest {

void lipschitz_spot_check(const OccupancyObjective& obj, int num_states, int horizon,
                          uint64_t seed) {
  Rng rng(mix_seed(seed, 0x11b5ULL));
  MarkovPolicy pi = uniform_policy(num_states, 2, horizon);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec> a(horizon), b(horizon);
    double dist = 0;
    for (int h = 0; h < horizon; ++h) {
      Vec base(num_states);
      for (int x = 0; x < num_states; ++x) base(x) = rng.exponential();
      base /= base.sum();
      Vec delta(num_states);
      for (int x = 0; x < num_states; ++x) delta(x) = 0.05 * rng.normal();
      a[h] = base;
      b[h] = (base + delta).cwiseMax(0.0);
      dist += (a[h] - b[h]).lpNorm<1>();
    }
    const double gap = std::abs(obj.eval(a, pi) - obj.eval(b, pi));
    if (gap > obj.lipschitz * dist + 1e-9)
      throw std::runtime_error("objective '" + obj.name +
                               "' violates its declared Lipschitz constant");
  }
}

OccupancyObjective make_return_objective(const RewardFunction& rewards, int num_states,
                                         int horizon) {
  double rmax = 0;
  for (const Mat& t : rewards.levels) rmax = std::max(rmax, t.maxCoeff());
  OccupancyObjective obj;
  obj.name = "return";
  obj.lipschitz = std::max(rmax, 1e-12);
  obj.eval = [rewards](const std::vector<Vec>& profile, const MarkovPolicy& pi) {
    double v = 0;
    for (size_t h = 0; h < profile.size(); ++h) {
      const Mat weighted = pi.levels[h].cwiseProduct(rewards.levels[h]);
      v += profile[h].dot(weighted.rowwise().sum());
    }
    return v;
  };
  lipschitz_spot_check(obj, num_states, horizon, 0xECu);
  return obj;
}

OccupancyObjective make_l2_match_objective(const Vec& target, int horizon) {
  OccupancyObjective obj;
  obj.name = "l2-match";
  obj.lipschitz = 2.0 * (1.0 + target.cwiseAbs().maxCoeff()) + 0.5;
  obj.eval = [target](const std::vector<Vec>& profile, const MarkovPolicy&) {
    return -(profile.back() - target).squaredNorm();
  };
  lipschitz_spot_check(obj, static_cast<int>(target.size()), horizon, 0xECu);
  return obj;
}

OccupancyObjective make_neg_entropy_objective(int num_states, int horizon, double alpha) {
  OccupancyObjective obj;
  obj.name = "neg-entropy";
  obj.lipschitz = 1.0 + std::log(1.0 / alpha);
  obj.needs_distribution = true;
  obj.eval = [alpha](const std::vector<Vec>& profile, const MarkovPolicy&) {
    double f = 0;
    for (const Vec& d : profile)
      for (int x = 0; x < d.size(); ++x) f -= (d(x) + alpha) * std::log(d(x) + alpha);
    return f;
  };
  lipschitz_spot_check(obj, num_states, horizon, 0xECu);
  return obj;
}

Vec simplex_project(const Vec& d) {
  // water level tau with sum max(d - tau, 0) = 1
  double lo = d.minCoeff() - 2.0;
  double hi = d.maxCoeff();
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((d.array() - mid).cwiseMax(0.0).sum() > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  Vec p = (d.array() - 0.5 * (lo + hi)).cwiseMax(0.0);
  const double s = p.sum();
  if (s > 0) p /= s;
  return p;
}

int plugin_objective_select(const std::vector<std::vector<Vec>>& estimates_per_policy,
                            const OccupancyObjective& obj,
                            const std::vector<MarkovPolicy>& policies, bool online_mode,
                            std::vector<double>* values) {
  if (estimates_per_policy.size() != policies.size() || policies.empty())
    throw std::invalid_argument("plugin_objective_select: estimates/policies mismatch");
  const bool project = online_mode && obj.needs_distribution;
  int best = 0;
  std::vector<double> vals(policies.size());
  for (size_t p = 0; p < policies.size(); ++p) {
    std::vector<Vec> profile = estimates_per_policy[p];
    if (project)
      for (Vec& d : profile) d = simplex_project(d);
    vals[p] = obj.eval(profile, policies[p]);
    if (!std::isfinite(vals[p]))
      throw std::runtime_error("objective '" + obj.name + "' is non-finite for policy " +
                               std::to_string(p));
    if (vals[p] > vals[best]) best = static_cast<int>(p);
  }
  if (values) *values = std::move(vals);
  return best;
}

}  // namespace occest
