#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "occest/force.hpp"
#include "occest/objectives.hpp"
#include "oracle_helpers.hpp"

using namespace occest;

TEST_CASE("simplex projection: idempotence, clamp-and-shift, sorted oracle") {
  Vec p(3);
  p << 0.2, 0.3, 0.5;
  CHECK(l1_dist(simplex_project(p), p) < 1e-12);

  Vec q(2);
  q << 2.0, 0.0;
  const Vec pq = simplex_project(q);
  CHECK(pq(0) == doctest::Approx(1.0));
  CHECK(pq(1) == doctest::Approx(0.0));

  for (uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    Vec v(5);
    for (int i = 0; i < 5; ++i) v(i) = rng.uniform(-2.0, 2.0);
    CHECK(l1_dist(simplex_project(v), oracle::simplex_project_sorted(v)) < 1e-12);
  }
}

TEST_CASE("projection at most doubles the distance to a true distribution") {
  for (uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed + 500);
    Vec d(6);
    for (int i = 0; i < 6; ++i) d(i) = rng.exponential();
    d /= d.sum();
    Vec noisy = d;
    for (int i = 0; i < 6; ++i) noisy(i) += rng.uniform(-0.2, 0.2);
    CHECK(l1_dist(simplex_project(noisy), d) <= 2.0 * l1_dist(noisy, d) + 1e-12);
  }
}

TEST_CASE("the return objective reduces to plug-in return selection") {
  const LowRankMdp m = desk_instance();
  const auto policies = desk_policy_class(m);
  const RewardFunction r = generate_random_rewards(m.num_states, m.num_actions, m.horizon, 7);
  const OccupancyObjective obj = make_return_objective(r, m.num_states, m.horizon);

  std::vector<std::vector<Occupancy>> est(policies.size());
  std::vector<std::vector<Vec>> profiles(policies.size());
  for (size_t p = 0; p < policies.size(); ++p) {
    est[p] = exact_occupancies(m, policies[p]);
    for (const auto& occ : est[p]) profiles[p].push_back(occ.values);
  }
  const SelectResult ret_sel = online_policy_select(est, r, policies);
  CHECK(plugin_objective_select(profiles, obj, policies, true) == ret_sel.index);
}

TEST_CASE("the l2-match objective with exact estimates picks the closest policy") {
  const LowRankMdp m = desk_instance();
  const auto policies = desk_policy_class(m);
  const Vec target = exact_occupancies(m, policies[5])[m.horizon - 1].values;
  const OccupancyObjective obj = make_l2_match_objective(target, m.horizon);

  std::vector<std::vector<Vec>> profiles(policies.size());
  int best = 0;
  double best_dist = 1e300;
  for (size_t p = 0; p < policies.size(); ++p) {
    const auto occ = exact_occupancies(m, policies[p]);
    for (const auto& o : occ) profiles[p].push_back(o.values);
    const double dist = (occ[m.horizon - 1].values - target).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(p);
    }
  }
  CHECK(plugin_objective_select(profiles, obj, policies, false) == best);
  CHECK(best == 5);
}

TEST_CASE("plug-in selection is within L*eps of the optimum under bounded perturbations") {
  const LowRankMdp m = desk_instance();
  const auto policies = desk_policy_class(m);
  const OccupancyObjective obj = make_neg_entropy_objective(m.num_states, m.horizon);

  std::vector<std::vector<Vec>> exact_profiles(policies.size());
  std::vector<double> exact_values(policies.size());
  for (size_t p = 0; p < policies.size(); ++p) {
    for (const auto& o : exact_occupancies(m, policies[p]))
      exact_profiles[p].push_back(o.values);
    exact_values[p] = obj.eval(exact_profiles[p], policies[p]);
  }
  const double best = *std::max_element(exact_values.begin(), exact_values.end());

  const double eps = 0.05;
  for (uint64_t trial = 1; trial <= 100; ++trial) {
    Rng rng(trial * 71);
    auto noisy = exact_profiles;
    for (auto& profile : noisy)
      for (Vec& d : profile) {
        Vec delta(d.size());
        for (int x = 0; x < d.size(); ++x) delta(x) = rng.uniform(-1.0, 1.0);
        delta *= (eps / (2.0 * m.horizon)) / delta.lpNorm<1>();
        d = (d + delta).cwiseMax(0.0);
      }
    const int chosen = plugin_objective_select(noisy, obj, policies, true);
    CHECK(exact_values[chosen] >= best - obj.lipschitz * eps - 1e-9);
  }
}

TEST_CASE("adding a constant to the objective leaves the argmax unchanged") {
  const LowRankMdp m = desk_instance();
  const auto policies = desk_policy_class(m);
  const OccupancyObjective base = make_neg_entropy_objective(m.num_states, m.horizon);
  OccupancyObjective shifted = base;
  shifted.eval = [&base](const std::vector<Vec>& profile, const MarkovPolicy& pi) {
    return base.eval(profile, pi) + 123.45;
  };
  std::vector<std::vector<Vec>> profiles(policies.size());
  for (size_t p = 0; p < policies.size(); ++p)
    for (const auto& o : exact_occupancies(m, policies[p])) profiles[p].push_back(o.values);
  CHECK(plugin_objective_select(profiles, base, policies, true) ==
        plugin_objective_select(profiles, shifted, policies, true));
}

TEST_CASE("the registration spot-check rejects an understated Lipschitz constant") {
  OccupancyObjective bad;
  bad.name = "bad";
  bad.lipschitz = 1e-6;
  bad.eval = [](const std::vector<Vec>& profile, const MarkovPolicy&) {
    double s = 0;
    for (const Vec& d : profile) s += 100.0 * d.sum();
    return s;
  };
  CHECK_THROWS_AS(lipschitz_spot_check(bad, 5, 3, 1), std::runtime_error);
}

TEST_CASE("a non-finite evaluator is reported with the policy") {
  const LowRankMdp m = desk_instance();
  const auto policies = desk_policy_class(m);
  OccupancyObjective nan_obj;
  nan_obj.name = "nan";
  nan_obj.lipschitz = 1.0;
  nan_obj.eval = [](const std::vector<Vec>&, const MarkovPolicy&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<std::vector<Vec>> profiles(policies.size());
  for (size_t p = 0; p < policies.size(); ++p)
    for (const auto& o : exact_occupancies(m, policies[p])) profiles[p].push_back(o.values);
  CHECK_THROWS_AS(plugin_objective_select(profiles, nan_obj, policies, false),
                  std::runtime_error);
}

TEST_CASE("pessimistic mode never projects, online mode projects when required") {
  // an objective that can tell whether its input was normalized
  OccupancyObjective mass;
  mass.name = "mass";
  mass.lipschitz = 1.0;
  mass.needs_distribution = true;
  mass.eval = [](const std::vector<Vec>& profile, const MarkovPolicy&) {
    double s = 0;
    for (const Vec& d : profile) s += d.sum();
    return s;
  };
  std::vector<std::vector<Vec>> profiles = {{Vec::Constant(4, 0.05)}};  // mass 0.2
  MarkovPolicy dummy = uniform_policy(4, 2, 1);
  std::vector<double> vals;
  plugin_objective_select(profiles, mass, {dummy}, true, &vals);
  CHECK(vals[0] == doctest::Approx(1.0));  // projected to the simplex
  plugin_objective_select(profiles, mass, {dummy}, false, &vals);
  CHECK(vals[0] == doctest::Approx(0.2));  // untouched
}
