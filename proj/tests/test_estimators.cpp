#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "occest/estimators.hpp"
#include "occest/harness.hpp"
#include "oracle_helpers.hpp"

using namespace occest;

namespace {

std::vector<int> draw_samples(const Vec& dist, int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(n);
  for (int& x : out) x = rng.categorical(dist);
  return out;
}

Mat two_simplex_columns(uint64_t seed, int num_states) {
  Rng rng(seed);
  Mat M(num_states, 2);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < num_states; ++i) M(i, j) = rng.exponential();
    M.col(j) /= M.col(j).sum();
  }
  return M;
}

// Minimal block with hand-written tuples on a given data policy.
LevelBlock make_block(std::vector<std::array<int, 3>> tuples, Mat data_policy) {
  LevelBlock b;
  b.level = 0;
  b.tuples = std::move(tuples);
  b.data_policy = std::move(data_policy);
  b.reg_split.resize(b.tuples.size());
  for (size_t i = 0; i < b.tuples.size(); ++i) b.reg_split[i] = static_cast<int>(i);
  b.mle_split = b.reg_split;
  return b;
}

}  // namespace

TEST_CASE("mle over identity features recovers the empirical distribution") {
  const Mat I = Mat::Identity(4, 4);
  const std::vector<int> samples = {0, 0, 1, 2, 2, 2, 3, 0, 1, 2};
  const MleResult r = mle_density(samples, {I, 1.0}, 1e-8);
  Vec want(4);
  want << 0.3, 0.2, 0.4, 0.1;
  CHECK((r.density - want).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(r.density.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mle over a singleton class returns the unique member") {
  Rng rng(5);
  Vec col(5);
  for (int i = 0; i < 5; ++i) col(i) = rng.exponential();
  col /= col.sum();
  Mat M(5, 1);
  M.col(0) = col;
  // samples deliberately unlike the member
  const std::vector<int> samples = {0, 0, 0, 0, 1};
  const MleResult r = mle_density(samples, {M, 1.0}, 1e-8);
  CHECK(l1_dist(r.density, col) < 1e-8);
}

TEST_CASE("rank-2 mle is as good as a 1e-3 grid search") {
  const Mat M = two_simplex_columns(17, 4);
  Vec theta_true(2);
  theta_true << 0.65, 0.35;
  const Vec dtrue = M * theta_true;
  const std::vector<int> samples = draw_samples(dtrue, 10000, 23);

  // grid oracle over theta1 in [0,1] (columns are simplex, so theta2 = 1-theta1)
  Vec counts = Vec::Zero(4);
  for (int x : samples) counts(x) += 1.0;
  double best_ll = -1e300;
  Vec best_d;
  for (int k = 0; k <= 1000; ++k) {
    const double t1 = k * 1e-3;
    const Vec d = M * (Vec(2) << t1, 1.0 - t1).finished();
    if (d.minCoeff() < 0) continue;
    double ll = 0;
    for (int x = 0; x < 4; ++x)
      if (counts(x) > 0) ll += counts(x) * std::log(std::max(d(x), 1e-300));
    if (ll > best_ll) {
      best_ll = ll;
      best_d = d;
    }
  }

  const MleResult r = mle_density(samples, {M, 1.0}, 1e-8);
  CHECK(l1_dist(r.density, dtrue) <= l1_dist(best_d, dtrue) + 2e-3);
}

TEST_CASE("mle error is non-increasing in the sample size (median over 10 seeds)") {
  const Mat M = two_simplex_columns(29, 5);
  Vec theta_true(2);
  theta_true << 0.4, 0.6;
  const Vec dtrue = M * theta_true;
  std::vector<double> med;
  for (int n : {100, 1000, 10000}) {
    std::vector<double> errs;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      const MleResult r = mle_density(draw_samples(dtrue, n, seed * 77), {M, 1.0}, 1e-8);
      errs.push_back(l1_dist(r.density, dtrue));
    }
    med.push_back(quantile(errs, 0.5));
  }
  CHECK(med[1] <= med[0] + 1e-12);
  CHECK(med[2] <= med[1] + 1e-12);
}

TEST_CASE("true data marginals are members of the linear density class") {
  for (uint64_t seed = 101; seed <= 115; ++seed) {
    const LowRankMdp m = oracle::random_instance(seed);
    const MarkovPolicy pi = oracle::random_policy(m, seed + 3);
    const auto occ = exact_occupancies(m, pi);
    for (int h = 1; h < m.horizon; ++h) {
      const Vec theta = m.mu[h - 1].colPivHouseholderQr().solve(occ[h].values);
      CHECK((m.mu[h - 1] * theta - occ[h].values).lpNorm<1>() < 1e-9);
      CHECK(theta.cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
      CHECK(occ[h].values.minCoeff() > -1e-12);
      CHECK(occ[h].values.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("mle reports infeasibility with the witness state") {
  Mat M = Mat::Zero(4, 1);
  M(0, 0) = 0.5;
  M(1, 0) = 0.5;  // states 2 and 3 can never get mass
  const std::vector<int> samples = {0, 1, 3};
  try {
    mle_density(samples, {M, 1.0}, 1e-8);
    FAIL("expected InfeasibleDensityClass");
  } catch (const InfeasibleDensityClass& e) {
    CHECK(e.witness_state == 3);
  }
}

TEST_CASE("regression loss is zero when the hypothesis matches the targets") {
  const Mat M = two_simplex_columns(31, 3);
  const Mat piD = Mat::Constant(3, 2, 0.5);
  const LevelBlock block = make_block({{0, 0, 1}, {1, 1, 2}, {2, 0, 0}}, piD);
  // targets are identically 1 when w_prev = 1 and pibar = piD
  const WeightRatio one{Vec::Ones(2), Vec::Ones(2), M, 10.0};
  CHECK(regression_loss(block, one, Vec::Ones(3), piD) == doctest::Approx(0.0));
}

TEST_CASE("constant hypothesis against zero targets costs c^2") {
  const Mat M = two_simplex_columns(33, 3);
  const Mat piD = Mat::Constant(3, 2, 0.5);
  const LevelBlock block = make_block({{0, 0, 1}, {1, 1, 2}}, piD);
  const double c = 1.7;
  const WeightRatio wc{c * Vec::Ones(2), Vec::Ones(2), M, 10.0};
  CHECK(regression_loss(block, wc, Vec::Zero(3), piD) == doctest::Approx(c * c));
}

TEST_CASE("regression loss matches a straight-line summation oracle") {
  Rng rng(35);
  const int X = 5, K = 2;
  const Mat M = two_simplex_columns(36, X);
  Mat piD(X, K);
  for (int x = 0; x < X; ++x) {
    piD(x, 0) = rng.uniform(0.2, 0.8);
    piD(x, 1) = 1.0 - piD(x, 0);
  }
  std::vector<std::array<int, 3>> tuples;
  for (int i = 0; i < 40; ++i)
    tuples.push_back({rng.uniform_int(X), rng.uniform_int(K), rng.uniform_int(X)});
  const LevelBlock block = make_block(tuples, piD);
  Vec w_prev(X);
  for (int x = 0; x < X; ++x) w_prev(x) = rng.uniform(0.0, 2.0);
  Mat pibar = 0.7 * piD;
  WeightRatio w{Vec(2), Vec(2), M, 3.0};
  w.theta_up << rng.normal(), rng.normal();
  w.theta_down << 1.0, 1.0;

  double acc = 0;
  for (const auto& t : tuples) {
    const double y = w_prev(t[0]) * pibar(t[0], t[1]) / piD(t[0], t[1]);
    const double num = M.row(t[2]).dot(w.theta_up);
    const double den = M.row(t[2]).dot(w.theta_down);
    double val = 0;
    if (std::abs(den) >= 1e-12) val = std::clamp(num / den, -3.0, 3.0);
    acc += (val - y) * (val - y);
  }
  CHECK(regression_loss(block, w, w_prev, pibar) == doctest::Approx(acc / 40.0).epsilon(1e-12));
}

TEST_CASE("regression loss flags actions the data policy cannot produce") {
  const Mat M = two_simplex_columns(37, 3);
  Mat piD = Mat::Zero(3, 2);
  piD.col(0).setOnes();
  const LevelBlock block = make_block({{0, 1, 1}}, piD);  // action 1 has probability 0
  const WeightRatio one{Vec::Ones(2), Vec::Ones(2), M, 10.0};
  CHECK_THROWS_AS(regression_loss(block, one, Vec::Ones(3), piD), DataInconsistency);
}

TEST_CASE("fit_weight with matched policies recovers the constant-1 ratio") {
  const LowRankMdp m = oracle::random_instance(41, 6, 3);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  const Mat data_policy = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  LevelBlock block = sample_level_dataset(m, 0, {unif}, data_policy, 4000, 5);
  block.split(2000, 2000, 5);

  // evaluation policy == data policy, w_prev == 1, clipping inactive
  const FitResult fit = fit_weight(block, Vec::Ones(m.num_states), data_policy,
                                   {m.mu[0], 10.0}, 8, 17);
  const Vec ddag = bellman_flow_level(m, 0, data_policy, exact_occupancies(m, unif)[0].values);
  for (int x = 0; x < m.num_states; ++x)
    if (ddag(x) > 1e-6) CHECK(std::abs(fit.w.eval(x) - 1.0) < 1e-6);
}

TEST_CASE("fit_weight recovers a planted realizable ratio with near-zero loss") {
  const LowRankMdp m = oracle::random_instance(43, 6, 3);
  Rng rng(44);
  // plant w = <mu, up> / <mu, down> with positive denominator
  Vec down(m.rank), up(m.rank);
  for (int j = 0; j < m.rank; ++j) down(j) = 1.0 + 0.2 * rng.normal();
  up = down * 0.8;
  up(0) += 0.3;
  const WeightRatio planted{up, down, m.mu[0], 50.0};

  const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  LevelBlock block = sample_level_dataset(m, 0, {unif}, piD, 2000, 45);
  // with x_next == x_prev, w_prev = planted values and pibar = piD, the target
  // equals the planted hypothesis at x_next exactly
  for (auto& t : block.tuples) t[2] = t[0];
  block.split(1000, 1000, 45);
  const Vec planted_vals = planted.eval_all();
  const FitResult fit =
      fit_weight(block, planted_vals, piD, {m.mu[0], 50.0}, 8, 46, 1e-8, &down);
  CHECK(fit.loss <= 1e-8);
}

TEST_CASE("non-finite inputs are reported as optimizer divergence with the restart index") {
  const LowRankMdp m = oracle::random_instance(48, 5, 2);
  const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  LevelBlock block = sample_level_dataset(m, 0, {unif}, piD, 200, 11);
  block.split(100, 100, 11);
  const Vec poisoned = Vec::Constant(m.num_states, std::numeric_limits<double>::quiet_NaN());
  try {
    fit_weight(block, poisoned, piD, {m.mu[0], 5.0}, 3, 12);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("restart") != std::string::npos);
  }
}

TEST_CASE("cap zero forces the zero ratio") {
  const LowRankMdp m = oracle::random_instance(47, 5, 2);
  const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  LevelBlock block = sample_level_dataset(m, 0, {unif}, piD, 400, 48);
  block.split(200, 200, 48);
  const FitResult fit = fit_weight(block, Vec::Ones(m.num_states), piD, {m.mu[0], 0.0}, 2, 49);
  CHECK(fit.w.eval_all().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the Bayes regression target is bounded by cx * ca") {
  for (uint64_t seed = 51; seed <= 60; ++seed) {
    const LowRankMdp m = oracle::random_instance(seed);
    Rng rng(seed);
    const double cx = rng.uniform(0.5, 3.0);
    const double ca = rng.uniform(0.5, 3.0);
    const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
    const Vec dD = exact_occupancies(m, unif)[0].values;
    const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
    Vec w_prev(m.num_states);
    for (int x = 0; x < m.num_states; ++x) w_prev(x) = rng.uniform(0.0, cx);
    const MarkovPolicy pi = oracle::random_policy(m, seed + 5);
    const Mat pibar = clip_action_level(pi.levels[0], piD, ca);

    const Vec ddag = bellman_flow_level(m, 0, piD, dD);
    const Vec flow = bellman_flow_level(m, 0, pibar, dD.cwiseProduct(w_prev));
    for (int x = 0; x < m.num_states; ++x)
      if (ddag(x) > 1e-300) CHECK(flow(x) / ddag(x) <= cx * ca + 1e-9);
  }
}

TEST_CASE("population loss decomposes as Bayes loss plus weighted squared distance") {
  const LowRankMdp m = oracle::random_instance(63, 5, 2);
  Rng rng(64);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  const Vec dD = exact_occupancies(m, unif)[0].values;
  const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  Vec w_prev(m.num_states);
  for (int x = 0; x < m.num_states; ++x) w_prev(x) = rng.uniform(0.0, 2.0);
  const MarkovPolicy pi = oracle::random_policy(m, 65);
  const Mat pibar = clip_action_level(pi.levels[0], piD, 2.0);

  const Vec ddag = bellman_flow_level(m, 0, piD, dD);
  const Vec flow = bellman_flow_level(m, 0, pibar, dD.cwiseProduct(w_prev));
  Vec bayes = Vec::Zero(m.num_states);
  for (int x = 0; x < m.num_states; ++x)
    if (ddag(x) > 1e-300) bayes(x) = flow(x) / ddag(x);

  const auto population_loss = [&](const Vec& w_next) {
    double acc = 0;
    for (int x = 0; x < m.num_states; ++x)
      for (int a = 0; a < m.num_actions; ++a)
        for (int xn = 0; xn < m.num_states; ++xn) {
          const double mass = dD(x) * piD(x, a) * m.trans[0](x * m.num_actions + a, xn);
          const double y = w_prev(x) * pibar(x, a) / piD(x, a);
          acc += mass * (w_next(xn) - y) * (w_next(xn) - y);
        }
    return acc;
  };

  const double bayes_loss = population_loss(bayes);
  for (int trial = 0; trial < 5; ++trial) {
    Vec w(m.num_states);
    for (int x = 0; x < m.num_states; ++x) w(x) = rng.uniform(0.0, 3.0);
    double wdist = 0;
    for (int x = 0; x < m.num_states; ++x)
      wdist += ddag(x) * (w(x) - bayes(x)) * (w(x) - bayes(x));
    CHECK(population_loss(w) == doctest::Approx(bayes_loss + wdist).epsilon(1e-9));
  }
}

TEST_CASE("clip_state_density pointwise minimum") {
  Vec d(2), dD(2);
  d << 0.6, 0.4;
  dD << 0.5, 0.5;
  const Vec c1 = clip_state_density(d, dD, 1.0);
  CHECK(c1(0) == doctest::Approx(0.5));
  CHECK(c1(1) == doctest::Approx(0.4));
  CHECK(l1_dist(clip_state_density(d, dD, 1e9), d) == 0);
  CHECK(clip_state_density(d, dD, 0.0).lpNorm<1>() == 0);
}

TEST_CASE("clip_action_level pointwise minimum") {
  Mat pi(1, 2), piD(1, 2);
  pi << 0.9, 0.1;
  piD << 0.5, 0.5;
  const Mat c = clip_action_level(pi, piD, 1.0);
  CHECK(c(0, 0) == doctest::Approx(0.5));
  CHECK(c(0, 1) == doctest::Approx(0.1));
  CHECK((clip_action_level(pi, piD, 10.0) - pi).cwiseAbs().maxCoeff() == 0);
  CHECK(clip_action_level(pi, piD, 0.0).cwiseAbs().maxCoeff() == 0);
  CHECK_THROWS_AS(clip_action_level(pi, piD, -1.0), std::invalid_argument);
}

TEST_CASE("clip_action_policy yields a valid pseudo-policy") {
  const LowRankMdp m = oracle::random_instance(67);
  const MarkovPolicy pi = oracle::random_policy(m, 68);
  const MarkovPolicy piD = oracle::random_policy(m, 69);
  const PseudoPolicy pb = clip_action_policy(pi, piD, 0.7);
  check_pseudo_policy(pb, m.num_states, m.num_actions);
}

TEST_CASE("extract_density identities and exact-ratio recovery") {
  const LowRankMdp m = oracle::random_instance(81, 6, 3);
  const MarkovPolicy pi = oracle::random_policy(m, 82);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  const Vec dD = exact_occupancies(m, unif)[0].values;
  const Vec ddag = bellman_flow_level(m, 0, piD, dD);
  const Vec dpi = exact_occupancies(m, pi)[1].values;

  // w == 1 and w == 0
  const WeightRatio one{Vec::Ones(m.rank), Vec::Ones(m.rank), m.mu[0], 10.0};
  CHECK(l1_dist(extract_density(one, ddag).density, ddag) < 1e-12);
  const WeightRatio zero{Vec::Zero(m.rank), Vec::Ones(m.rank), m.mu[0], 10.0};
  CHECK(extract_density(zero, ddag).density.lpNorm<1>() == 0.0);

  // exact ratio assembled from the feature-linear representations
  const Vec up = m.mu[0].colPivHouseholderQr().solve(dpi);
  const Vec down = m.mu[0].colPivHouseholderQr().solve(ddag);
  const WeightRatio exact_ratio{up, down, m.mu[0], 1e9};
  CHECK(ddag.minCoeff() > 1e-12);  // full support on this instance
  CHECK(l1_dist(extract_density(exact_ratio, ddag).density, dpi) < 1e-12);
}

TEST_CASE("extract_density clamps negative products and counts them") {
  Mat M(2, 1);
  M << 1.0, 1.0;
  const WeightRatio neg{-Vec::Ones(1), Vec::Ones(1), M, 5.0};
  Vec ddag(2);
  ddag << 0.5, 0.5;
  const ExtractResult r = extract_density(neg, ddag);
  CHECK(r.negative_clamps == 2);
  CHECK(r.density.lpNorm<1>() == 0.0);
}

TEST_CASE("cap choice is insensitive on covered data") {
  const LowRankMdp m = oracle::random_instance(91, 6, 3);
  const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
  const Mat piD = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  LevelBlock block = sample_level_dataset(m, 0, {unif}, piD, 4000, 92);
  block.split(2000, 2000, 92);
  const MarkovPolicy pi = oracle::random_policy(m, 93);
  const Mat pibar = clip_action_level(pi.levels[0], piD, m.num_actions);
  const Vec w_prev = Vec::Ones(m.num_states);

  const FitResult tight = fit_weight(block, w_prev, pibar, {m.mu[0], 4.0}, 8, 94);
  const FitResult loose = fit_weight(block, w_prev, pibar, {m.mu[0], 40.0}, 8, 94);
  CHECK(std::abs(tight.loss - loose.loss) < 0.05);
}
