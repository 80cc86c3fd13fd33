#include "occest/repr.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "occest/lp.hpp"
#include "occest/rng.hpp"
#include "online_engine.hpp"

namespace occest {

namespace {

constexpr double kTieRound = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

UnionMleResult union_mle_density(const std::vector<int>& samples,
                                 const std::vector<Mat>& candidates, double tol) {
  if (candidates.empty()) throw std::invalid_argument("union_mle_density: no candidates");
  if (samples.empty()) throw std::invalid_argument("union_mle_density: empty sample");
  const int C = static_cast<int>(candidates.size());
  UnionMleResult res;
  res.logliks.assign(C, -kInf);
  res.thetas.resize(C);
  res.infeasible_witness.assign(C, -2);
  std::vector<MleResult> fits(C);
  std::vector<std::string> errors(C);

#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < C; ++c) {
    try {
      fits[c] = mle_density(samples, LinearDensityClass{candidates[c], 1.0}, tol);
      res.logliks[c] = fits[c].loglik;
      res.thetas[c] = fits[c].theta;
    } catch (const InfeasibleDensityClass& e) {
      res.infeasible_witness[c] = e.witness_state;
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  }
  for (int c = 0; c < C; ++c)
    if (!errors[c].empty())
      throw std::runtime_error("union_mle_density candidate " + std::to_string(c) +
                               " failed: " + errors[c]);

  for (int c = 0; c < C; ++c) {
    if (res.logliks[c] == -kInf) continue;
    if (res.candidate < 0 || res.logliks[c] > res.logliks[res.candidate] + kTieRound)
      res.candidate = c;
  }
  if (res.candidate < 0) {
    std::string msg = "union_mle_density: all candidates infeasible; witnesses:";
    for (int c = 0; c < C; ++c)
      msg += " [" + std::to_string(c) + "]=" + std::to_string(res.infeasible_witness[c]);
    throw InfeasibleDensityClass(msg, -1);
  }
  res.best = fits[res.candidate];
  return res;
}

UnionFitResult union_fit_weight(const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                                double cap, const std::vector<Mat>& candidates, int restarts,
                                uint64_t seed, double tol,
                                const std::vector<Vec>& theta_down_inits) {
  if (candidates.empty()) throw std::invalid_argument("union_fit_weight: no candidates");
  const int C = static_cast<int>(candidates.size());
  UnionFitResult res;
  res.losses.assign(C, kInf);
  std::vector<FitResult> fits(C);

  // Every candidate gets the same seed: with a singleton set this is exactly
  // the plain fit_weight call.
  std::vector<std::string> errors(C);
#pragma omp parallel for schedule(dynamic)
  for (int c = 0; c < C; ++c) {
    try {
      const Vec* init = nullptr;
      if (c < static_cast<int>(theta_down_inits.size()) && theta_down_inits[c].size() > 0)
        init = &theta_down_inits[c];
      fits[c] = fit_weight(block, w_prev, pibar, WeightClass{candidates[c], cap}, restarts, seed,
                           tol, init);
      res.losses[c] = fits[c].loss;
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  }
  for (int c = 0; c < C; ++c)
    if (!errors[c].empty())
      throw std::runtime_error("union_fit_weight candidate " + std::to_string(c) +
                               " failed: " + errors[c]);

  for (int c = 0; c < C; ++c) {
    if (res.candidate < 0 || res.losses[c] < res.losses[res.candidate] - kTieRound)
      res.candidate = c;
  }
  res.fit = fits[res.candidate];
  return res;
}

JointSelectResult joint_feature_select(const std::vector<Vec>& estimates,
                                       const std::vector<Mat>& candidates) {
  if (estimates.empty()) throw std::invalid_argument("joint_feature_select: no estimates");
  if (candidates.empty()) throw std::invalid_argument("joint_feature_select: no candidates");
  const int C = static_cast<int>(candidates.size());
  const int P = static_cast<int>(estimates.size());

  std::vector<std::vector<L1FitResult>> fits(C, std::vector<L1FitResult>(P));
  std::vector<double> worst(C, 0);
  std::vector<std::string> errors(C * P);
#pragma omp parallel for schedule(dynamic) collapse(2)
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p) {
      try {
        fits[c][p] = l1_fit(candidates[c], estimates[p]);
      } catch (const std::exception& e) {
        errors[c * P + p] = e.what();
      }
    }
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p)
      if (!errors[c * P + p].empty())
        throw std::runtime_error("joint_feature_select candidate " + std::to_string(c) +
                                 ", policy " + std::to_string(p) + ": " + errors[c * P + p]);
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < P; ++p) worst[c] = std::max(worst[c], fits[c][p].residual);

  JointSelectResult res;
  res.per_candidate_max_residual = worst;
  for (int c = 0; c < C; ++c) {
    if (res.candidate < 0 || worst[c] < worst[res.candidate] - kTieRound) res.candidate = c;
  }
  res.max_residual = worst[res.candidate];
  res.d_tilde.resize(P);
  res.theta.resize(P);
  res.residuals.resize(P);
  for (int p = 0; p < P; ++p) {
    res.d_tilde[p] = fits[res.candidate][p].fitted;
    res.theta[p] = fits[res.candidate][p].theta;
    res.residuals[p] = fits[res.candidate][p].residual;
  }
  return res;
}

namespace {

std::vector<int> split_states(const LevelBlock& block, const std::vector<int>& idx, int pos) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(block.tuples[i][pos]);
  return out;
}

detail::OnlineHooks union_hooks(const FeatureCandidateSet& cands, const ForceConfig& cfg) {
  detail::OnlineHooks hooks;
  hooks.marginal = [&cands, &cfg](int flevel, const std::vector<int>& states) {
    UnionMleResult r = union_mle_density(states, cands.at_level(flevel), cfg.mle_tol);
    detail::MarginalEstimate est;
    est.density = r.best.density;
    est.theta = r.best.theta;
    est.candidate = r.candidate;
    est.candidate_thetas = r.thetas;
    return est;
  };
  hooks.fit = [&cands, &cfg](int h, const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                             double cap, uint64_t seed, const detail::MarginalEstimate& ddag,
                             int* candidate) {
    UnionFitResult r = union_fit_weight(block, w_prev, pibar, cap, cands.at_level(h - 1),
                                        cfg.restarts, seed, cfg.reg_tol, ddag.candidate_thetas);
    *candidate = r.candidate;
    return r.fit;
  };
  hooks.linearize = [&cands](int h, const std::vector<Vec>& ests, std::vector<Vec>* fitted,
                             std::vector<Vec>* thetas, std::vector<double>* residuals,
                             int* candidate) {
    JointSelectResult r = joint_feature_select(ests, cands.at_level(h - 1));
    *fitted = r.d_tilde;
    *thetas = r.theta;
    *residuals = r.residuals;
    *candidate = r.candidate;
  };
  return hooks;
}

}  // namespace

ForcOutput forcrl_estimate(const TupleDataset& ds, const MarkovPolicy& pi,
                           const FeatureCandidateSet& candidates, const Vec& init_dist,
                           const ForcConfig& cfg) {
  const int H = candidates.horizon();
  if (pi.horizon() < H) throw std::invalid_argument("forcrl: policy horizon too short");
  if (static_cast<int>(cfg.cx.size()) < H - 1 || static_cast<int>(cfg.ca.size()) < H - 1)
    throw std::invalid_argument("forcrl: threshold lists shorter than horizon-1");

  ForcOutput out;
  out.estimates.resize(H);
  out.estimates[0] = {0, init_dist};

  for (int h = 1; h < H; ++h) {
    try {
      const LevelBlock& block = ds.block(h - 1);
      if (block.mle_split.empty() || block.reg_split.empty())
        throw std::invalid_argument("block has no declared splits");

      UnionMleResult ddag = union_mle_density(split_states(block, block.mle_split, 2),
                                              candidates.at_level(h - 1), cfg.mle_tol);
      Vec dD_hat;
      if (h - 1 == 0) {
        dD_hat = init_dist;
      } else {
        dD_hat = union_mle_density(split_states(block, block.mle_split, 0),
                                   candidates.at_level(h - 2), cfg.mle_tol)
                     .best.density;
      }

      const double cx = cfg.cx[h - 1];
      const double ca = cfg.ca[h - 1];
      const Vec w_tilde = weight_regression_target(out.estimates[h - 1].values, dD_hat, cx);
      const Mat pibar = clip_action_level(pi.levels[h - 1], block.data_policy, ca);

      UnionFitResult fit = union_fit_weight(block, w_tilde, pibar, cx * ca,
                                            candidates.at_level(h - 1), cfg.restarts,
                                            mix_seed(cfg.seed, 0xF17ULL, h), cfg.reg_tol,
                                            ddag.thetas);
      ExtractResult ext = extract_density(fit.fit.w, ddag.best.density);
      out.estimates[h] = {h, ext.density};

      ForcLevelDiag diag;
      diag.level = h;
      diag.dD_hat = dD_hat;
      diag.ddag_hat = ddag.best.density;
      diag.w_hat = fit.fit.w.eval_all();
      diag.w_tilde = w_tilde;
      diag.pibar = pibar;
      diag.clipped_mass = state_clipped_mass(out.estimates[h - 1].values, dD_hat, cx);
      diag.negative_clamps = ext.negative_clamps;
      diag.fit_loss = fit.fit.loss;
      diag.fit_restart = fit.fit.restart;
      diag.candidate = fit.candidate;
      out.diags.push_back(std::move(diag));
    } catch (const std::exception& e) {
      throw std::runtime_error("forcrl_estimate failed at level " + std::to_string(h) + ": " +
                               e.what());
    }
  }
  return out;
}

ForceResult forcrle_run(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                        const FeatureCandidateSet& candidates, const ForceConfig& cfg) {
  if (cfg.n_mle < 1 || cfg.n_reg < 1)
    throw std::invalid_argument("forcrle: n_mle and n_reg must be >= 1");
  if (candidates.horizon() < m.horizon)
    throw std::invalid_argument("forcrle: candidate set shorter than horizon");
  return detail::run_online_engine(m, policies, cfg, union_hooks(candidates, cfg), false);
}

ForceResult forcrle_run_oracle(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                               const FeatureCandidateSet& candidates, const ForceConfig& cfg) {
  if (candidates.horizon() < m.horizon)
    throw std::invalid_argument("forcrle: candidate set shorter than horizon");
  return detail::run_online_engine(m, policies, cfg, union_hooks(candidates, cfg), true);
}

}  // namespace occest
