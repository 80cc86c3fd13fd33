// End-to-end acceptance suite. Each criterion prints one pass/fail line; the
// process exits nonzero if any criterion fails. Expects to run from the
// repository root (the desk manifest path can be overridden via argv[1]).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "occest/audits.hpp"
#include "occest/generators.hpp"
#include "occest/harness.hpp"
#include "occest/json_io.hpp"
#include "occest/repr.hpp"
#include "occest/rng.hpp"
#include "occest/spanner.hpp"

using namespace occest;
namespace fs = std::filesystem;

namespace {

std::string g_manifest_path = "manifests/desk_force.json";

struct CriterionResult {
  int id;
  std::string name;
  bool pass;
  double seconds;
  std::string detail;
};

std::vector<CriterionResult> g_results;

void run_criterion(int id, const std::string& name, const std::function<bool(std::string*)>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = false;
  try {
    pass = fn(&detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_results.push_back({id, name, pass, secs, detail});
  std::printf("%s criterion %d (%s) [%.1fs]%s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              secs, detail.empty() ? "" : ": ", detail.c_str());
  std::fflush(stdout);
}

bool bit_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

LowRankMdp random_small_instance(uint64_t seed) {
  Rng rng(mix_seed(seed, 0xACC1ULL));
  MdpGenParams p;
  p.num_states = 4 + rng.uniform_int(9);  // up to 12
  p.num_actions = 2 + rng.uniform_int(2);
  p.horizon = 2 + rng.uniform_int(4);  // up to 5
  p.rank = 2 + rng.uniform_int(3);
  if (p.rank > p.num_states) p.rank = p.num_states;
  p.seed = seed * 977;
  return generate_random_lowrank_mdp(p);
}

MarkovPolicy random_policy(const LowRankMdp& m, uint64_t seed) {
  Rng rng(mix_seed(seed, 0xACC2ULL));
  MarkovPolicy pi;
  pi.levels.assign(m.horizon, Mat::Zero(m.num_states, m.num_actions));
  for (int h = 0; h < m.horizon; ++h)
    for (int x = 0; x < m.num_states; ++x) {
      Vec w(m.num_actions);
      for (int a = 0; a < m.num_actions; ++a) w(a) = rng.exponential();
      pi.levels[h].row(x) = (w / w.sum()).transpose();
    }
  return pi;
}

struct DeskSweepRun {
  uint64_t seed;
  int n;
  double max_err_clipped;                       // max over policies and levels
  double max_err_true;                          // vs exact occupancies
  std::vector<std::vector<Occupancy>> est;      // per policy
  std::vector<std::vector<Occupancy>> clipped;  // per policy
  std::vector<std::vector<Occupancy>> exact;    // per policy
  bool audits_passed;
};

// Shared FORC sweep over the desk instance for criteria 3 and 4: uniform
// roll-in and data policy, thresholds cx = rank, ca = K.
std::vector<DeskSweepRun> desk_forc_sweep(const LowRankMdp& m,
                                          const std::vector<MarkovPolicy>& policies,
                                          const std::vector<int>& n_grid, int num_seeds) {
  const MarkovPolicy unif_pi = uniform_policy(m.num_states, m.num_actions, m.horizon);
  const Mat unif = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  std::vector<Vec> dD_true;
  std::vector<Mat> piD;
  for (int lvl = 0; lvl + 1 < m.horizon; ++lvl) {
    dD_true.push_back(exact_occupancies(m, unif_pi)[lvl].values);
    piD.push_back(unif);
  }
  const std::vector<double> cx(m.horizon - 1, static_cast<double>(m.rank));
  const std::vector<double> ca(m.horizon - 1, static_cast<double>(m.num_actions));

  std::vector<DeskSweepRun> runs;
  for (int n : n_grid) {
    for (uint64_t seed = 1; seed <= static_cast<uint64_t>(num_seeds); ++seed) {
      TupleDataset ds;
      ds.horizon = m.horizon;
      for (int lvl = 0; lvl + 1 < m.horizon; ++lvl) {
        const uint64_t s = mix_seed(seed, 0x0FF1ULL, static_cast<uint64_t>(lvl));
        LevelBlock block = sample_level_dataset(m, lvl, {unif_pi}, unif, 2 * n, s);
        block.split(n, n, s);
        ds.blocks[lvl] = std::move(block);
      }
      DeskSweepRun run;
      run.seed = seed;
      run.n = n;
      run.max_err_clipped = 0;
      run.max_err_true = 0;
      run.audits_passed = true;
      for (const MarkovPolicy& pi : policies) {
        ForcConfig cfg;
        cfg.cx = cx;
        cfg.ca = ca;
        cfg.seed = seed;
        ForcOutput out = forc_estimate(ds, pi, m.mu, m.init_dist, cfg);
        const auto clp = clipped_occupancies(m, pi, dD_true, piD, cx, ca);
        const auto exa = exact_occupancies(m, pi);

        // measured optimizer slack: empirical loss of the fit minus the
        // empirical loss of the Bayes regression function on the same data
        for (ForcLevelDiag& diag : out.diags) {
          const int h = diag.level;
          const Vec ddag = bellman_flow_level(m, h - 1, piD[h - 1], dD_true[h - 1]);
          const Vec flow = bellman_flow_level(m, h - 1, diag.pibar,
                                              dD_true[h - 1].cwiseProduct(diag.w_tilde));
          Vec bayes = Vec::Zero(m.num_states);
          for (int x = 0; x < m.num_states; ++x)
            if (ddag(x) > 1e-300) bayes(x) = flow(x) / ddag(x);
          diag.bayes_loss =
              regression_loss_values(ds.block(h - 1), bayes, diag.w_tilde, diag.pibar);
          diag.reg_slack = std::max(0.0, diag.fit_loss - diag.bayes_loss);
        }
        const auto audit =
            audit_regression_recursion(m, pi, dD_true, piD, cx, ca, out.estimates, out.diags);
        for (const auto& line : audit) run.audits_passed = run.audits_passed && line.pass;

        for (int h = 0; h < m.horizon; ++h) {
          run.max_err_clipped =
              std::max(run.max_err_clipped, l1_dist(out.estimates[h].values, clp[h].values));
          run.max_err_true =
              std::max(run.max_err_true, l1_dist(out.estimates[h].values, exa[h].values));
        }
        run.est.push_back(out.estimates);
        run.clipped.push_back(clp);
        run.exact.push_back(exa);
      }
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

struct DeskForceRun {
  ForceResult run;
  std::vector<std::vector<Occupancy>> exact;
  std::vector<std::vector<Occupancy>> clipped;
  double max_err_true;
  double max_level_err;  // max over (policy, level) of per-level l1 error
};

DeskForceRun run_desk_force(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                            int n, uint64_t seed) {
  ForceConfig cfg;
  cfg.n_mle = n;
  cfg.n_reg = n;
  cfg.seed = seed;
  DeskForceRun out;
  out.run = force_run(m, policies, cfg);
  std::vector<Vec> dD_true;
  std::vector<Mat> piD;
  realized_data_distributions(m, policies, out.run, &dD_true, &piD);
  const std::vector<double> cx(m.horizon - 1, static_cast<double>(m.rank));
  const std::vector<double> ca(m.horizon - 1, static_cast<double>(m.num_actions));
  out.max_err_true = 0;
  out.max_level_err = 0;
  for (size_t p = 0; p < policies.size(); ++p) {
    out.exact.push_back(exact_occupancies(m, policies[p]));
    out.clipped.push_back(clipped_occupancies(m, policies[p], dD_true, piD, cx, ca));
    for (int h = 0; h < m.horizon; ++h) {
      const double err = l1_dist(out.run.estimates[p][h].values, out.exact[p][h].values);
      out.max_err_true = std::max(out.max_err_true, err);
      out.max_level_err = std::max(out.max_level_err, err);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_manifest_path = argv[1];

  const LowRankMdp desk = desk_instance();
  const std::vector<MarkovPolicy> desk_policies = desk_policy_class(desk);

  // ------------------------------------------------------------------ 1
  run_criterion(1, "clipped-occupancy invariants on 100 random instances", [](std::string* d) {
    int violations = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
      const LowRankMdp m = random_small_instance(seed);
      const MarkovPolicy pi = random_policy(m, seed + 1);
      const MarkovPolicy unif = uniform_policy(m.num_states, m.num_actions, m.horizon);
      const auto exact = exact_occupancies(m, pi);
      const auto unif_occ = exact_occupancies(m, unif);
      std::vector<Vec> dD;
      std::vector<Mat> piD;
      for (int h = 0; h + 1 < m.horizon; ++h) {
        dD.push_back(0.5 * exact[h].values + 0.5 * unif_occ[h].values);
        piD.push_back(0.5 * pi.levels[h] +
                      0.5 * Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions));
      }
      Rng rng(seed);
      std::vector<double> cx, ca;
      for (int h = 0; h + 1 < m.horizon; ++h) {
        cx.push_back(rng.uniform(0.2, 2.0));
        ca.push_back(rng.uniform(0.2, 2.0));
      }
      const auto clipped = clipped_occupancies(m, pi, dD, piD, cx, ca);

      // dominance
      for (int h = 0; h < m.horizon; ++h)
        if (((clipped[h].values - exact[h].values).array() > 1e-9).any()) ++violations;
      // coverage equality at ratio 2
      const std::vector<double> covering(m.horizon - 1, 2.0 + 1e-9);
      const auto covered = clipped_occupancies(m, pi, dD, piD, covering, covering);
      for (int h = 0; h < m.horizon; ++h)
        if (l1_dist(covered[h].values, exact[h].values) > 1e-9) ++violations;
      // monotonicity and the two Lipschitz claims
      std::vector<double> cx_hi = cx;
      double delta_sum = 0;
      for (double& c : cx_hi) {
        const double bump = rng.uniform(0.0, 0.5);
        c += bump;
        delta_sum += bump;
      }
      const auto hi = clipped_occupancies(m, pi, dD, piD, cx_hi, ca);
      for (int h = 0; h < m.horizon; ++h) {
        if (((clipped[h].values - hi[h].values).array() > 1e-9).any()) ++violations;
        if (l1_dist(hi[h].values, clipped[h].values) > delta_sum + 1e-9) ++violations;
        const double miss_lo = l1_dist(exact[h].values, clipped[h].values);
        const double miss_hi = l1_dist(exact[h].values, hi[h].values);
        if (std::abs(miss_hi - miss_lo) > delta_sum + 1e-9) ++violations;
      }
    }
    *d = "violations=" + std::to_string(violations);
    return violations == 0;
  });

  // ------------------------------------------------------------------ 2
  run_criterion(2, "flow-image linearity on 100 random instances", [](std::string* d) {
    double worst = 0;
    for (uint64_t seed = 200; seed < 300; ++seed) {
      const LowRankMdp m = random_small_instance(seed);
      Rng rng(seed);
      Vec dens(m.num_states);
      for (int x = 0; x < m.num_states; ++x) dens(x) = rng.uniform(-1.0, 1.0);
      const MarkovPolicy pi = random_policy(m, seed + 2);
      const int h = static_cast<int>(seed) % m.horizon;
      const Mat pibar = clip_action_level(
          pi.levels[h], Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions),
          rng.uniform(0.5, 2.0));
      const Vec out = bellman_flow_level(m, h, pibar, dens);
      const Vec theta = m.mu[h].colPivHouseholderQr().solve(out);
      worst = std::max(worst, (m.mu[h] * theta - out).norm());
    }
    std::ostringstream ss;
    ss << "worst residual " << worst;
    *d = ss.str();
    return worst < 1e-9;
  });

  // --------------------------------------------------------------- 3 & 4
  std::vector<DeskSweepRun> sweep;
  run_criterion(3, "regression-error recursion audit across the FORC sweep",
                [&](std::string* d) {
                  sweep = desk_forc_sweep(desk, desk_policies, {1000, 4000, 16000}, 10);
                  int failed = 0;
                  for (const auto& run : sweep)
                    if (!run.audits_passed) ++failed;
                  *d = std::to_string(sweep.size()) + " runs, " + std::to_string(failed) +
                       " with failed audit lines";
                  return failed == 0;
                });

  run_criterion(4, "FORC error shrinks at the expected rate", [&](std::string* d) {
    std::vector<double> lo, mid, hi;
    for (const auto& run : sweep) {
      if (run.n == 1000) lo.push_back(run.max_err_clipped);
      if (run.n == 4000) mid.push_back(run.max_err_clipped);
      if (run.n == 16000) hi.push_back(run.max_err_clipped);
    }
    if (lo.size() != 10 || mid.size() != 10 || hi.size() != 10) return false;
    const double med_lo = quantile(lo, 0.5);
    const double med_mid = quantile(mid, 0.5);
    const double med_hi = quantile(hi, 0.5);
    std::ostringstream ss;
    ss << "medians " << med_lo << " -> " << med_mid << " -> " << med_hi << ", rate bound "
       << 0.6 * med_lo + 0.02;
    *d = ss.str();
    return med_hi <= 0.6 * med_lo + 0.02 && med_mid <= med_lo && med_hi <= med_mid;
  });

  // ------------------------------------------------------------------ 5
  run_criterion(5, "spanner certificates and mixture concentrability", [](std::string* d) {
    double worst_exact = 0, worst_approx = 0, worst_cc = 0;
    for (uint64_t seed = 1; seed <= 50; ++seed) {
      Rng rng(mix_seed(seed, 0x5eedULL));
      MdpGenParams p;
      p.num_states = 5 + rng.uniform_int(6);
      p.num_actions = 2 + rng.uniform_int(2);
      p.horizon = 3;
      p.rank = 2 + rng.uniform_int(3);
      if (p.rank > p.num_states) p.rank = p.num_states;
      p.seed = seed * 733;
      const LowRankMdp m = generate_random_lowrank_mdp(p);
      std::vector<Vec> occ;
      const int count = 6 + rng.uniform_int(6);
      for (int i = 0; i < count; ++i)
        occ.push_back(exact_occupancies(m, random_policy(m, seed * 97 + i))[1].values);

      const SpannerResult ex = exact_spanner(occ);
      worst_exact = std::max(worst_exact, ex.coefficients.cwiseAbs().maxCoeff());
      const SpannerResult ap = approx_spanner(occ, 2.0);
      worst_approx = std::max(worst_approx, ap.coefficients.cwiseAbs().maxCoeff());

      Vec mix = Vec::Zero(m.num_states);
      for (int i : ex.indices) mix += occ[i];
      mix /= static_cast<double>(ex.indices.size());
      worst_cc = std::max(worst_cc, concentrability_coefficient(occ, mix) - m.rank);
    }
    std::ostringstream ss;
    ss << "max exact coef " << worst_exact << ", approx coef " << worst_approx
       << ", max CC-rank " << worst_cc;
    *d = ss.str();
    return worst_exact <= 1.0 + 1e-9 && worst_approx <= 2.0 + 1e-9 && worst_cc <= 1e-9;
  });

  // ------------------------------------------------------------------ 6
  std::vector<DeskForceRun> force_runs;
  int calibrated_n = 0;
  run_criterion(6, "FORCE end-to-end at the calibrated sample size", [&](std::string* d) {
    const ExperimentConfig manifest = load_config_file(g_manifest_path);
    calibrated_n = manifest.n_grid.at(0);
    std::vector<double> errs;
    bool audits_ok = true;
    for (uint64_t seed : manifest.seeds) {
      DeskForceRun r = run_desk_force(desk, desk_policies, calibrated_n, seed);
      errs.push_back(r.max_err_true);
      const auto miss = audit_missingness_recursion(desk, desk_policies, r.run.estimates,
                                                    r.exact, r.clipped);
      for (const auto& line : miss) audits_ok = audits_ok && line.pass;
      force_runs.push_back(std::move(r));
    }
    const double med = quantile(errs, 0.5);
    std::ostringstream ss;
    ss << "n=" << calibrated_n << ", median max err " << med << " (target 0.15), audits "
       << (audits_ok ? "ok" : "FAILED");
    *d = ss.str();
    return med <= 0.15 && audits_ok;
  });

  // ------------------------------------------------------------------ 7
  run_criterion(7, "policy optimization soundness and pessimism", [&](std::string* d) {
    if (force_runs.empty()) {
      *d = "no FORCE runs available";
      return false;
    }
    const DeskForceRun& r = force_runs.front();
    const double eps = 2.0 * desk.horizon * r.max_level_err;
    int value_violations = 0, pessimism_violations = 0;
    for (uint64_t rs = 1; rs <= 100; ++rs) {
      const RewardFunction rew =
          generate_random_rewards(desk.num_states, desk.num_actions, desk.horizon, rs * 131);
      const SelectResult sel = online_policy_select(r.run.estimates, rew, desk_policies);
      double best = -1;
      for (size_t p = 0; p < desk_policies.size(); ++p) {
        const double v = policy_return_from(r.exact[p], desk_policies[p], rew);
        const double vbar = policy_return_from(r.clipped[p], desk_policies[p], rew);
        if (vbar > v + 1e-9) ++pessimism_violations;
        best = std::max(best, v);
      }
      const double chosen = policy_return_from(r.exact[sel.index], desk_policies[sel.index], rew);
      if (chosen < best - eps - 1e-9) ++value_violations;
    }
    std::ostringstream ss;
    ss << "eps=" << eps << ", value violations " << value_violations << ", pessimism violations "
       << pessimism_violations;
    *d = ss.str();
    return value_violations == 0 && pessimism_violations == 0;
  });

  // ------------------------------------------------------------------ 8
  run_criterion(8, "representation-learning reduction and quality", [&](std::string* d) {
    FeatureCandidateSet truth_only;
    truth_only.truth_index = 0;
    truth_only.levels.resize(desk.horizon);
    for (int h = 0; h < desk.horizon; ++h) truth_only.levels[h].push_back(desk.mu[h]);

    // byte-identical reduction, online
    ForceConfig fc;
    fc.n_mle = 2000;
    fc.n_reg = 2000;
    fc.seed = 7;
    const ForceResult fa = force_run(desk, desk_policies, fc);
    const ForceResult fb = forcrle_run(desk, desk_policies, truth_only, fc);
    bool reduction_ok = true;
    for (size_t p = 0; p < desk_policies.size(); ++p)
      for (int h = 0; h < desk.horizon; ++h)
        reduction_ok =
            reduction_ok && bit_equal(fa.estimates[p][h].values, fb.estimates[p][h].values);

    // byte-identical reduction, offline
    {
      const MarkovPolicy unif = uniform_policy(desk.num_states, desk.num_actions, desk.horizon);
      const Mat unif_level =
          Mat::Constant(desk.num_states, desk.num_actions, 1.0 / desk.num_actions);
      TupleDataset ds;
      ds.horizon = desk.horizon;
      for (int lvl = 0; lvl + 1 < desk.horizon; ++lvl) {
        const uint64_t s = mix_seed(55ULL, 0x0FF1ULL, static_cast<uint64_t>(lvl));
        LevelBlock b = sample_level_dataset(desk, lvl, {unif}, unif_level, 4000, s);
        b.split(2000, 2000, s);
        ds.blocks[lvl] = std::move(b);
      }
      ForcConfig cfg;
      cfg.cx.assign(desk.horizon - 1, 3.0);
      cfg.ca.assign(desk.horizon - 1, 2.0);
      cfg.seed = 56;
      const ForcOutput oa = forc_estimate(ds, desk_policies[1], desk.mu, desk.init_dist, cfg);
      const ForcOutput ob =
          forcrl_estimate(ds, desk_policies[1], truth_only, desk.init_dist, cfg);
      for (int h = 0; h < desk.horizon; ++h)
        reduction_ok = reduction_ok && bit_equal(oa.estimates[h].values, ob.estimates[h].values);
    }

    // joint selection on oracle-exact estimates picks the truth
    const FeatureCandidateSet cands = generate_feature_candidates(desk, 3, 5);
    bool select_ok = true;
    for (int h = 1; h < desk.horizon; ++h) {
      std::vector<Vec> ests;
      for (const auto& pi : desk_policies) ests.push_back(exact_occupancies(desk, pi)[h].values);
      select_ok = select_ok && joint_feature_select(ests, cands.at_level(h - 1)).candidate == 0;
    }

    // paired-seed quality at the calibrated sample size
    std::vector<double> force_errs, rle_errs;
    for (const auto& fr : force_runs) force_errs.push_back(fr.max_err_true);
    const ExperimentConfig manifest = load_config_file(g_manifest_path);
    for (uint64_t seed : manifest.seeds) {
      ForceConfig rc;
      rc.n_mle = calibrated_n;
      rc.n_reg = calibrated_n;
      rc.seed = seed;
      const ForceResult rr = forcrle_run(desk, desk_policies, cands, rc);
      double worst = 0;
      for (size_t p = 0; p < desk_policies.size(); ++p) {
        const auto exact = exact_occupancies(desk, desk_policies[p]);
        for (int h = 0; h < desk.horizon; ++h)
          worst = std::max(worst, l1_dist(rr.estimates[p][h].values, exact[h].values));
      }
      rle_errs.push_back(worst);
    }
    const double med_force = quantile(force_errs, 0.5);
    const double med_rle = quantile(rle_errs, 0.5);

    std::ostringstream ss;
    ss << "reduction " << (reduction_ok ? "byte-identical" : "DIFFERS") << ", joint select "
       << (select_ok ? "truth" : "WRONG") << ", medians force=" << med_force
       << " forcrle=" << med_rle;
    *d = ss.str();
    return reduction_ok && select_ok && med_rle <= 2.0 * med_force;
  });

  // ------------------------------------------------------------------ 9
  run_criterion(9, "manifest reruns reproduce results byte for byte", [](std::string* d) {
    const fs::path base = fs::temp_directory_path() / "occest_acceptance_rerun";
    fs::remove_all(base);
    ExperimentConfig cfg;
    cfg.algo = "force";
    MdpGenParams mp;
    mp.num_states = 9;
    mp.num_actions = 2;
    mp.horizon = 4;
    mp.rank = 3;
    mp.seed = 20240;
    cfg.mdp_gen = mp;
    PolicyGenParams pp;
    pp.count = 4;
    pp.seed = 31;
    cfg.policy_gen = pp;
    cfg.n_grid = {600};
    cfg.seeds = {1, 2};
    cfg.out_dir = (base / "a").string();
    run_experiment(cfg);

    ExperimentConfig replay = load_config_file((base / "a" / "manifest.json").string());
    replay.out_dir = (base / "b").string();
    run_experiment(replay);

    const std::string csv_a =
        strip_wall_ms(read_text_file((base / "a" / "results.csv").string()));
    const std::string csv_b =
        strip_wall_ms(read_text_file((base / "b" / "results.csv").string()));
    bool ok = csv_a == csv_b;
    for (const auto& entry : fs::directory_iterator(base / "a" / "runs")) {
      const fs::path rel = entry.path().filename();
      ok = ok && read_text_file((entry.path() / "run.json").string()) ==
                     read_text_file((base / "b" / "runs" / rel / "run.json").string());
      ok = ok && read_text_file((entry.path() / "trace.json").string()) ==
                     read_text_file((base / "b" / "runs" / rel / "trace.json").string());
    }
    *d = ok ? "results.csv (wall_ms aside), run.json, trace.json identical" : "MISMATCH";
    return ok;
  });

  int failures = 0;
  for (const auto& r : g_results)
    if (!r.pass) ++failures;
  std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(g_results.size()) - failures,
              g_results.size());
  return failures == 0 ? 0 : 1;
}
