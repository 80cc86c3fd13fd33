#include "occest/force.hpp"

#include <stdexcept>

#include "occest/lp.hpp"
#include "occest/rng.hpp"
#include "online_engine.hpp"

namespace occest {

L1Fit l1_linearize(const Vec& d_hat, const Mat& mu) {
  const L1FitResult fit = l1_fit(mu, d_hat);
  return {fit.theta, fit.fitted, fit.residual};
}

namespace detail {

namespace {

std::vector<int> split_states(const LevelBlock& block, const std::vector<int>& idx, int pos) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(block.tuples[i][pos]);
  return out;
}

}  // namespace

ForceResult run_online_engine(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                              const ForceConfig& cfg, const OnlineHooks& hooks, bool oracle_mode) {
  if (policies.empty()) throw std::invalid_argument("force: policy class is empty");
  const int H = m.horizon;
  const int X = m.num_states;
  const int K = m.num_actions;
  const int P = static_cast<int>(policies.size());
  for (int p = 0; p < P; ++p) {
    if (policies[p].horizon() < H)
      throw std::invalid_argument("force: policy " + std::to_string(p) + " horizon too short");
    check_policy(policies[p], X, K);
  }
  const double cx = static_cast<double>(m.rank);
  const double ca = static_cast<double>(K);
  const Mat unif = Mat::Constant(X, K, 1.0 / K);

  ForceResult res;
  res.estimates.assign(P, std::vector<Occupancy>(H));
  std::vector<Vec> d_tilde(P, m.init_dist);
  for (int p = 0; p < P; ++p) res.estimates[p][0] = {0, m.init_dist};

  for (int h = 1; h < H; ++h) {
    ForceLevelTrace tr;
    tr.level = h;
    tr.spanner = cfg.spanner.exact ? exact_spanner(d_tilde)
                                   : approx_spanner(d_tilde, cfg.spanner.approx_c);
    tr.expl = tr.spanner.indices;
    if (tr.expl.empty())
      throw std::runtime_error("force: spanner selected no policies at level " +
                               std::to_string(h));

    MarginalEstimate ddag;
    Vec dD_hat;
    if (oracle_mode) {
      Vec mix = Vec::Zero(X);
      for (int i : tr.expl) mix += exact_occupancies(m, policies[i])[h - 1].values;
      mix /= static_cast<double>(tr.expl.size());
      dD_hat = mix;
      ddag.density = bellman_flow_level(m, h - 1, unif, mix);
    } else {
      std::vector<MarkovPolicy> expl_policies;
      for (int i : tr.expl) expl_policies.push_back(policies[i]);
      const uint64_t level_seed = mix_seed(cfg.seed, 0xDA7AULL, static_cast<uint64_t>(h));
      tr.block =
          sample_level_dataset(m, h - 1, expl_policies, unif, cfg.n_mle + cfg.n_reg, level_seed);
      tr.block.split(cfg.n_mle, cfg.n_reg, level_seed);
      ++res.deployments;

      ddag = hooks.marginal(h - 1, split_states(tr.block, tr.block.mle_split, 2));
      tr.mle_candidate = ddag.candidate;
      if (h - 1 == 0)
        dD_hat = m.init_dist;
      else
        dD_hat = hooks.marginal(h - 2, split_states(tr.block, tr.block.mle_split, 0)).density;
    }
    tr.dD_hat = dD_hat;
    tr.ddag_hat = ddag.density;
    tr.policy_diags.resize(P);

    // exceptions must not escape the parallel region; collect per-policy
    // errors and rethrow the lowest-index one with its context
    std::vector<Vec> level_ests(P);
    std::vector<std::string> errors(P);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < P; ++p) {
      try {
        const Vec w_tilde = weight_regression_target(res.estimates[p][h - 1].values, dD_hat, cx);
        const Mat pibar = clip_action_level(policies[p].levels[h - 1], unif, ca);
        ForcLevelDiag diag;
        diag.level = h;
        diag.dD_hat = dD_hat;
        diag.ddag_hat = ddag.density;
        diag.w_tilde = w_tilde;
        diag.pibar = pibar;
        diag.clipped_mass = state_clipped_mass(res.estimates[p][h - 1].values, dD_hat, cx);

        if (oracle_mode) {
          const Vec flow = bellman_flow_level(m, h - 1, pibar, dD_hat.cwiseProduct(w_tilde));
          Vec w_bayes = Vec::Zero(X);
          for (int x = 0; x < X; ++x)
            if (ddag.density(x) > 1e-300) w_bayes(x) = flow(x) / ddag.density(x);
          level_ests[p] = flow.cwiseMax(0.0);
          diag.w_hat = w_bayes;
        } else {
          const uint64_t fit_seed =
              mix_seed(cfg.seed, 0x9C7ULL, static_cast<uint64_t>(h), static_cast<uint64_t>(p));
          FitResult fit =
              hooks.fit(h, tr.block, w_tilde, pibar, cx * ca, fit_seed, ddag, &diag.candidate);
          ExtractResult ext = extract_density(fit.w, ddag.density);
          level_ests[p] = ext.density;
          diag.w_hat = fit.w.eval_all();
          diag.negative_clamps = ext.negative_clamps;
          diag.fit_loss = fit.loss;
          diag.fit_restart = fit.restart;
        }
        res.estimates[p][h] = {h, level_ests[p]};
        tr.policy_diags[p] = std::move(diag);
      } catch (const std::exception& e) {
        errors[p] = e.what();
      }
    }
    for (int p = 0; p < P; ++p)
      if (!errors[p].empty())
        throw std::runtime_error("force estimation failed at level " + std::to_string(h) +
                                 ", policy " + std::to_string(p) + ": " + errors[p]);

    hooks.linearize(h, level_ests, &tr.d_tilde, &tr.theta_tilde, &tr.lp_residuals,
                    &tr.linearize_candidate);
    d_tilde = tr.d_tilde;
    res.trace.push_back(std::move(tr));
  }
  return res;
}

}  // namespace detail

namespace {

detail::OnlineHooks known_feature_hooks(const LowRankMdp& m, const ForceConfig& cfg) {
  detail::OnlineHooks hooks;
  hooks.marginal = [&m, &cfg](int flevel, const std::vector<int>& states) {
    MleResult r = mle_density(states, LinearDensityClass{m.mu[flevel], 1.0}, cfg.mle_tol);
    return detail::MarginalEstimate{r.density, r.theta, -1, {}};
  };
  hooks.fit = [&m, &cfg](int h, const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                         double cap, uint64_t seed, const detail::MarginalEstimate& ddag,
                         int* candidate) {
    *candidate = -1;
    return fit_weight(block, w_prev, pibar, WeightClass{m.mu[h - 1], cap}, cfg.restarts, seed,
                      cfg.reg_tol, &ddag.theta);
  };
  hooks.linearize = [&m](int h, const std::vector<Vec>& ests, std::vector<Vec>* fitted,
                         std::vector<Vec>* thetas, std::vector<double>* residuals,
                         int* candidate) {
    const int P = static_cast<int>(ests.size());
    fitted->resize(P);
    thetas->resize(P);
    residuals->resize(P);
    *candidate = -1;
    std::vector<std::string> errors(P);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < P; ++p) {
      try {
        L1Fit fit = l1_linearize(ests[p], m.mu[h - 1]);
        (*fitted)[p] = fit.fitted;
        (*thetas)[p] = fit.theta;
        (*residuals)[p] = fit.residual;
      } catch (const std::exception& e) {
        errors[p] = e.what();
      }
    }
    for (int p = 0; p < P; ++p)
      if (!errors[p].empty())
        throw std::runtime_error("linearization failed for policy " + std::to_string(p) + ": " +
                                 errors[p]);
  };
  return hooks;
}

}  // namespace

ForceResult force_run(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                      const ForceConfig& cfg) {
  if (cfg.n_mle < 1 || cfg.n_reg < 1)
    throw std::invalid_argument("force: n_mle and n_reg must be >= 1");
  return detail::run_online_engine(m, policies, cfg, known_feature_hooks(m, cfg), false);
}

ForceResult force_run_oracle(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                             const ForceConfig& cfg) {
  return detail::run_online_engine(m, policies, cfg, known_feature_hooks(m, cfg), true);
}

SelectResult online_policy_select(const std::vector<std::vector<Occupancy>>& estimates,
                                  const RewardFunction& rewards,
                                  const std::vector<MarkovPolicy>& policies) {
  if (estimates.size() != policies.size() || estimates.empty())
    throw std::invalid_argument("policy select: estimates/policies mismatch");
  SelectResult res;
  res.values.resize(estimates.size());
  for (size_t p = 0; p < estimates.size(); ++p)
    res.values[p] = policy_return_from(estimates[p], policies[p], rewards);
  res.index = 0;
  for (size_t p = 1; p < estimates.size(); ++p)
    if (res.values[p] > res.values[res.index]) res.index = static_cast<int>(p);
  return res;
}

}  // namespace occest
