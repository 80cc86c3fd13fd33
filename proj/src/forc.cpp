#include "occest/forc.hpp"

#include <cmath>
#include <stdexcept>

#include "occest/rng.hpp"

namespace occest {

Vec weight_regression_target(const Vec& d_prev_hat, const Vec& dD_hat, double cx) {
  Vec w = Vec::Zero(d_prev_hat.size());
  for (int x = 0; x < d_prev_hat.size(); ++x) {
    if (dD_hat(x) < 1e-12) continue;  // 0/0 convention
    w(x) = std::min(d_prev_hat(x), cx * dD_hat(x)) / dD_hat(x);
  }
  return w;
}

double state_clipped_mass(const Vec& d_prev_hat, const Vec& dD_hat, double cx) {
  return (d_prev_hat - d_prev_hat.cwiseMin(cx * dD_hat)).lpNorm<1>();
}

namespace {

std::vector<int> split_states(const LevelBlock& block, const std::vector<int>& idx, int pos) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(block.tuples[i][pos]);
  return out;
}

void check_thresholds(const ForcConfig& cfg, int H) {
  if (static_cast<int>(cfg.cx.size()) < H - 1 || static_cast<int>(cfg.ca.size()) < H - 1)
    throw std::invalid_argument("forc: threshold lists shorter than horizon-1");
}

}  // namespace

ForcOutput forc_estimate(const TupleDataset& ds, const MarkovPolicy& pi,
                         const std::vector<Mat>& mu, const Vec& init_dist,
                         const ForcConfig& cfg) {
  const int H = static_cast<int>(mu.size());
  if (pi.horizon() < H) throw std::invalid_argument("forc: policy horizon too short");
  check_thresholds(cfg, H);

  ForcOutput out;
  out.estimates.resize(H);
  out.estimates[0] = {0, init_dist};

  for (int h = 1; h < H; ++h) {
    try {
      const LevelBlock& block = ds.block(h - 1);
      if (block.mle_split.empty() || block.reg_split.empty())
        throw std::invalid_argument("block has no declared splits");

      MleResult ddag = mle_density(split_states(block, block.mle_split, 2),
                                   LinearDensityClass{mu[h - 1], 1.0}, cfg.mle_tol);
      Vec dD_hat;
      if (h - 1 == 0) {
        dD_hat = init_dist;  // known level-0 marginal
      } else {
        dD_hat = mle_density(split_states(block, block.mle_split, 0),
                             LinearDensityClass{mu[h - 2], 1.0}, cfg.mle_tol)
                     .density;
      }

      const double cx = cfg.cx[h - 1];
      const double ca = cfg.ca[h - 1];
      const Vec w_tilde = weight_regression_target(out.estimates[h - 1].values, dD_hat, cx);
      const Mat pibar = clip_action_level(pi.levels[h - 1], block.data_policy, ca);

      FitResult fit = fit_weight(block, w_tilde, pibar, WeightClass{mu[h - 1], cx * ca},
                                 cfg.restarts, mix_seed(cfg.seed, 0xF17ULL, h), cfg.reg_tol,
                                 &ddag.theta);
      ExtractResult ext = extract_density(fit.w, ddag.density);
      out.estimates[h] = {h, ext.density};

      ForcLevelDiag diag;
      diag.level = h;
      diag.dD_hat = dD_hat;
      diag.ddag_hat = ddag.density;
      diag.w_hat = fit.w.eval_all();
      diag.w_tilde = w_tilde;
      diag.pibar = pibar;
      diag.clipped_mass = state_clipped_mass(out.estimates[h - 1].values, dD_hat, cx);
      diag.negative_clamps = ext.negative_clamps;
      diag.fit_loss = fit.loss;
      diag.fit_restart = fit.restart;
      out.diags.push_back(std::move(diag));
    } catch (const std::exception& e) {
      throw std::runtime_error("forc_estimate failed at level " + std::to_string(h) + ": " +
                               e.what());
    }
  }
  return out;
}

ForcOutput forc_estimate_oracle(const LowRankMdp& m, const MarkovPolicy& pi,
                                const std::vector<Vec>& dD_true,
                                const std::vector<Mat>& data_policies, const ForcConfig& cfg) {
  const int H = m.horizon;
  check_thresholds(cfg, H);
  if (static_cast<int>(dD_true.size()) < H - 1 || static_cast<int>(data_policies.size()) < H - 1)
    throw std::invalid_argument("forc oracle: data marginal lists shorter than horizon-1");

  ForcOutput out;
  out.estimates.resize(H);
  out.estimates[0] = {0, m.init_dist};

  for (int h = 1; h < H; ++h) {
    const double cx = cfg.cx[h - 1];
    const double ca = cfg.ca[h - 1];
    const Vec& dD = dD_true[h - 1];
    const Vec ddag = bellman_flow_level(m, h - 1, data_policies[h - 1], dD);
    const Vec w_tilde = weight_regression_target(out.estimates[h - 1].values, dD, cx);
    const Mat pibar = clip_action_level(pi.levels[h - 1], data_policies[h - 1], ca);

    // Bayes-optimal weight and the resulting exact extraction
    const Vec flow = bellman_flow_level(m, h - 1, pibar, dD.cwiseProduct(w_tilde));
    Vec w_bayes = Vec::Zero(m.num_states);
    for (int x = 0; x < m.num_states; ++x)
      if (ddag(x) > 1e-300) w_bayes(x) = flow(x) / ddag(x);
    out.estimates[h] = {h, flow.cwiseMax(0.0)};

    ForcLevelDiag diag;
    diag.level = h;
    diag.dD_hat = dD;
    diag.ddag_hat = ddag;
    diag.w_hat = w_bayes;
    diag.w_tilde = w_tilde;
    diag.pibar = pibar;
    diag.clipped_mass = state_clipped_mass(out.estimates[h - 1].values, dD, cx);
    diag.fit_loss = 0;
    out.diags.push_back(std::move(diag));
  }
  return out;
}

SampleSizes theoretical_sample_sizes(double eps, double delta, const ClipThresholds& thresholds,
                                     int d, int H, double b_mu, int num_candidates) {
  if (eps <= 0 || eps >= 1 || delta <= 0 || delta >= 1)
    throw std::invalid_argument("theoretical_sample_sizes: eps and delta must be in (0,1)");
  if (static_cast<int>(thresholds.cx.size()) < H || static_cast<int>(thresholds.ca.size()) < H)
    throw std::invalid_argument("theoretical_sample_sizes: thresholds shorter than horizon");
  if (num_candidates < 1)
    throw std::invalid_argument("theoretical_sample_sizes: num_candidates must be >= 1");
  if (b_mu <= 0) b_mu = static_cast<double>(d);

  double sum_cxca = 0;
  for (int h = 0; h < H; ++h) sum_cxca += thresholds.cx[h] * thresholds.ca[h];

  SampleSizes s;
  const double mle_coef = 36.0 * sum_cxca / eps;    // 2 * 18, each term budgeted eps/2
  const double reg_coef = 1332.0 * sum_cxca / eps;  // 2 * 666
  s.n_mle = d * mle_coef * mle_coef * std::log(16.0 * H * num_candidates * b_mu / delta);
  s.n_reg = d * reg_coef * reg_coef * std::log(2.0 * H * num_candidates / delta);
  return s;
}

SelectResult pessimistic_policy_select(const std::vector<ForcOutput>& outputs,
                                       const RewardFunction& rewards,
                                       const std::vector<MarkovPolicy>& policies) {
  if (outputs.size() != policies.size() || outputs.empty())
    throw std::invalid_argument("policy select: outputs/policies mismatch");
  SelectResult res;
  res.values.resize(outputs.size());
  for (size_t p = 0; p < outputs.size(); ++p)
    res.values[p] = policy_return_from(outputs[p].estimates, policies[p], rewards);
  res.index = 0;
  for (size_t p = 1; p < outputs.size(); ++p)
    if (res.values[p] > res.values[res.index]) res.index = static_cast<int>(p);
  return res;
}

}  // namespace occest
