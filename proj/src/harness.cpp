#include "occest/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "occest/audits.hpp"
#include "occest/json_io.hpp"
#include "occest/objectives.hpp"
#include "occest/rng.hpp"

namespace occest {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool algo_is_online(const std::string& algo) { return algo == "force" || algo == "forcrle"; }

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw std::invalid_argument(what + " file does not exist: " + path);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& j_in) {
  const json& j = j_in.contains("config") && j_in.contains("hash") ? j_in["config"] : j_in;
  ExperimentConfig cfg;
  cfg.algo = j.at("algo").get<std::string>();
  if (cfg.algo != "forc" && cfg.algo != "force" && cfg.algo != "forcrl" && cfg.algo != "forcrle")
    throw std::invalid_argument("unknown algo '" + cfg.algo + "'");

  const json& mdp = j.at("mdp");
  if (mdp.contains("file")) {
    cfg.mdp_file = mdp["file"].get<std::string>();
  } else {
    const json& g = mdp.at("generator");
    MdpGenParams p;
    p.num_states = g.at("num_states");
    p.num_actions = g.at("num_actions");
    p.horizon = g.at("horizon");
    p.rank = g.at("rank");
    p.seed = g.value("seed", 0);
    p.feature_style = g.value("feature_style", "simplex");
    p.init_style = g.value("init_style", "dirichlet");
    cfg.mdp_gen = p;
  }

  const json& pol = j.at("policies");
  if (pol.contains("file")) {
    cfg.policies_file = pol["file"].get<std::string>();
  } else {
    const json& g = pol.at("generator");
    PolicyGenParams p;
    p.count = g.at("count");
    p.det_fraction = g.value("det_fraction", 0.5);
    p.seed = g.value("seed", 0);
    cfg.policy_gen = p;
  }

  if (j.contains("features")) {
    const json& f = j["features"];
    if (f.contains("file")) {
      cfg.candidates_file = f["file"].get<std::string>();
    } else if (f.contains("generator")) {
      cfg.candidate_decoys = f["generator"].value("num_decoys", 3);
      cfg.candidate_seed = f["generator"].value("seed", 5);
    }
  }

  if (j.contains("estimator")) {
    const json& e = j["estimator"];
    cfg.restarts = e.value("restarts", 8);
    cfg.mle_tol = e.value("mle_tol", 1e-8);
    cfg.reg_tol = e.value("reg_tol", 1e-8);
    cfg.cx = e.value("cx", -1.0);
    cfg.ca = e.value("ca", -1.0);
    cfg.spanner = e.value("spanner", "exact");
  }

  const json& sweep = j.at("sweep");
  cfg.n_grid = sweep.at("n_grid").get<std::vector<int>>();
  if (sweep.contains("n_reg_grid")) cfg.n_reg_grid = sweep["n_reg_grid"].get<std::vector<int>>();
  cfg.seeds = sweep.at("seeds").get<std::vector<uint64_t>>();
  cfg.objective = j.value("objective", "");
  cfg.out_dir = j.at("out_dir").get<std::string>();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["algo"] = cfg.algo;
  if (!cfg.mdp_file.empty()) {
    j["mdp"] = {{"file", cfg.mdp_file}};
  } else {
    const MdpGenParams& p = *cfg.mdp_gen;
    j["mdp"] = {{"generator",
                 {{"num_states", p.num_states},
                  {"num_actions", p.num_actions},
                  {"horizon", p.horizon},
                  {"rank", p.rank},
                  {"seed", p.seed},
                  {"feature_style", p.feature_style},
                  {"init_style", p.init_style}}}};
  }
  if (!cfg.policies_file.empty()) {
    j["policies"] = {{"file", cfg.policies_file}};
  } else {
    const PolicyGenParams& p = *cfg.policy_gen;
    j["policies"] = {{"generator",
                      {{"count", p.count}, {"det_fraction", p.det_fraction}, {"seed", p.seed}}}};
  }
  if (!cfg.candidates_file.empty()) {
    j["features"] = {{"file", cfg.candidates_file}};
  } else if (cfg.candidate_decoys) {
    j["features"] = {
        {"generator", {{"num_decoys", *cfg.candidate_decoys}, {"seed", cfg.candidate_seed}}}};
  }
  j["estimator"] = {{"restarts", cfg.restarts}, {"mle_tol", cfg.mle_tol},
                    {"reg_tol", cfg.reg_tol},   {"cx", cfg.cx},
                    {"ca", cfg.ca},             {"spanner", cfg.spanner}};
  j["sweep"] = {{"n_grid", cfg.n_grid}, {"seeds", cfg.seeds}};
  if (!cfg.n_reg_grid.empty()) j["sweep"]["n_reg_grid"] = cfg.n_reg_grid;
  j["objective"] = cfg.objective;
  j["out_dir"] = cfg.out_dir;
  return j;
}

ExperimentConfig load_config_file(const std::string& path) {
  return config_from_json(json::parse(read_text_file(path)));
}

std::string config_hash(const ExperimentConfig& cfg) {
  // the hash identifies what is computed; the output location is not part of it
  json j = config_to_json(cfg);
  j.erase("out_dir");
  return hex64(fnv1a64(j.dump()));
}

namespace {

SpannerMode parse_spanner(const std::string& s) {
  SpannerMode mode;
  if (s == "exact") return mode;
  if (s.rfind("approx:", 0) == 0) {
    mode.exact = false;
    mode.approx_c = std::stod(s.substr(7));
    return mode;
  }
  throw std::invalid_argument("bad spanner mode '" + s + "' (exact | approx:<C>)");
}

struct Instance {
  LowRankMdp mdp;
  std::vector<MarkovPolicy> policies;
  std::optional<FeatureCandidateSet> candidates;
};

Instance load_instance(const ExperimentConfig& cfg) {
  Instance inst;
  if (!cfg.mdp_file.empty()) {
    require_file(cfg.mdp_file, "mdp");
    inst.mdp = load_mdp_json(cfg.mdp_file);
  } else {
    inst.mdp = generate_random_lowrank_mdp(*cfg.mdp_gen);
  }
  if (!cfg.policies_file.empty()) {
    require_file(cfg.policies_file, "policies");
    inst.policies =
        load_policies_json(cfg.policies_file, inst.mdp.num_states, inst.mdp.num_actions);
  } else {
    inst.policies = generate_policy_class(*cfg.policy_gen, inst.mdp);
  }
  const bool needs_features = cfg.algo == "forcrl" || cfg.algo == "forcrle";
  if (!cfg.candidates_file.empty()) {
    require_file(cfg.candidates_file, "features");
    inst.candidates = load_candidates_json(cfg.candidates_file);
  } else if (cfg.candidate_decoys) {
    inst.candidates =
        generate_feature_candidates(inst.mdp, *cfg.candidate_decoys, cfg.candidate_seed);
  } else if (needs_features) {
    throw std::invalid_argument(cfg.algo + " needs a features file or generator");
  }
  return inst;
}

struct CellSpec {
  int n_mle = 0;
  int n_reg = 0;
  uint64_t seed = 0;
  std::string name;
};

struct CellOutput {
  std::vector<std::string> rows;
  json run_json;
  json trace_json;
  bool has_trace = false;
  std::string error;
};

OccupancyObjective build_objective(const std::string& spec, const LowRankMdp& m) {
  if (spec == "neg-entropy") return make_neg_entropy_objective(m.num_states, m.horizon);
  if (spec.rfind("return:", 0) == 0) {
    const std::string file = spec.substr(7);
    require_file(file, "reward");
    return make_return_objective(load_rewards_json(file, m.num_states, m.num_actions),
                                 m.num_states, m.horizon);
  }
  if (spec.rfind("l2-match:", 0) == 0) {
    const std::string file = spec.substr(9);
    require_file(file, "target");
    return make_l2_match_objective(load_target_json(file), m.horizon);
  }
  throw std::invalid_argument("unknown objective '" + spec + "'");
}

CellOutput run_cell(const ExperimentConfig& cfg, const Instance& inst, const CellSpec& cell,
                    const std::string& manifest_hash) {
  const auto t0 = std::chrono::steady_clock::now();
  const LowRankMdp& m = inst.mdp;
  const int H = m.horizon;
  const int X = m.num_states;
  const int K = m.num_actions;
  const int P = static_cast<int>(inst.policies.size());
  const bool online = algo_is_online(cfg.algo);
  const Mat unif = Mat::Constant(X, K, 1.0 / K);
  const MarkovPolicy unif_pi = uniform_policy(X, K, H);

  std::vector<std::vector<Occupancy>> exact(P);
  for (int p = 0; p < P; ++p) exact[p] = exact_occupancies(m, inst.policies[p]);

  std::vector<std::vector<Occupancy>> est(P);
  std::vector<std::vector<ForcLevelDiag>> diags(P);
  std::vector<Vec> dD_true;
  std::vector<Mat> piD;
  std::vector<double> cx_vec, ca_vec;
  std::vector<const LevelBlock*> block_at(std::max(H - 1, 0), nullptr);
  ForceResult online_run;
  TupleDataset ds;
  int deployments = 0;

  if (online) {
    ForceConfig fcfg;
    fcfg.n_mle = cell.n_mle;
    fcfg.n_reg = cell.n_reg;
    fcfg.restarts = cfg.restarts;
    fcfg.mle_tol = cfg.mle_tol;
    fcfg.reg_tol = cfg.reg_tol;
    fcfg.seed = cell.seed;
    fcfg.spanner = parse_spanner(cfg.spanner);
    online_run = cfg.algo == "force"
                     ? force_run(m, inst.policies, fcfg)
                     : forcrle_run(m, inst.policies, *inst.candidates, fcfg);
    deployments = online_run.deployments;
    for (int p = 0; p < P; ++p) {
      est[p] = online_run.estimates[p];
      diags[p].clear();
      for (const ForceLevelTrace& tr : online_run.trace) diags[p].push_back(tr.policy_diags[p]);
    }
    realized_data_distributions(m, inst.policies, online_run, &dD_true, &piD);
    for (const ForceLevelTrace& tr : online_run.trace)
      block_at[tr.level - 1] = &tr.block;
    cx_vec.assign(std::max(H - 1, 0), static_cast<double>(m.rank));
    ca_vec.assign(std::max(H - 1, 0), static_cast<double>(K));
  } else {
    const double cx = cfg.cx > 0 ? cfg.cx : static_cast<double>(m.rank);
    const double ca = cfg.ca > 0 ? cfg.ca : static_cast<double>(K);
    cx_vec.assign(std::max(H - 1, 0), cx);
    ca_vec.assign(std::max(H - 1, 0), ca);
    ds.horizon = H;
    ds.num_states = X;
    ds.num_actions = K;
    ds.seed = cell.seed;
    for (int lvl = 0; lvl + 1 < H; ++lvl) {
      const uint64_t s = mix_seed(cell.seed, 0x0FF1ULL, static_cast<uint64_t>(lvl));
      LevelBlock block =
          sample_level_dataset(m, lvl, {unif_pi}, unif, cell.n_mle + cell.n_reg, s);
      block.split(cell.n_mle, cell.n_reg, s);
      ds.blocks[lvl] = std::move(block);
    }
    for (int lvl = 0; lvl + 1 < H; ++lvl) {
      dD_true.push_back(exact_occupancies(m, unif_pi)[lvl].values);
      piD.push_back(unif);
      block_at[lvl] = &ds.blocks.at(lvl);
    }
    ForcConfig fc;
    fc.cx = cx_vec;
    fc.ca = ca_vec;
    fc.n_mle = cell.n_mle;
    fc.n_reg = cell.n_reg;
    fc.restarts = cfg.restarts;
    fc.mle_tol = cfg.mle_tol;
    fc.reg_tol = cfg.reg_tol;
    fc.seed = cell.seed;
    std::vector<std::string> errors(P);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < P; ++p) {
      try {
        ForcOutput out = cfg.algo == "forc"
                             ? forc_estimate(ds, inst.policies[p], m.mu, m.init_dist, fc)
                             : forcrl_estimate(ds, inst.policies[p], *inst.candidates,
                                               m.init_dist, fc);
        est[p] = std::move(out.estimates);
        diags[p] = std::move(out.diags);
      } catch (const std::exception& e) {
        errors[p] = e.what();
      }
    }
    for (int p = 0; p < P; ++p)
      if (!errors[p].empty())
        throw std::runtime_error("policy " + std::to_string(p) + ": " + errors[p]);
  }

  // Oracle side: clipped targets, optimizer slack, audits.
  std::vector<std::vector<Occupancy>> clipped(P);
  for (int p = 0; p < P; ++p)
    clipped[p] = clipped_occupancies(m, inst.policies[p], dD_true, piD, cx_vec, ca_vec);

  for (int p = 0; p < P; ++p) {
    for (ForcLevelDiag& diag : diags[p]) {
      const int h = diag.level;
      if (!block_at[h - 1]) continue;
      const Vec ddag = bellman_flow_level(m, h - 1, piD[h - 1], dD_true[h - 1]);
      const Vec flow =
          bellman_flow_level(m, h - 1, diag.pibar, dD_true[h - 1].cwiseProduct(diag.w_tilde));
      Vec bayes = Vec::Zero(X);
      for (int x = 0; x < X; ++x)
        if (ddag(x) > 1e-300) bayes(x) = flow(x) / ddag(x);
      diag.bayes_loss =
          regression_loss_values(*block_at[h - 1], bayes, diag.w_tilde, diag.pibar);
      diag.reg_slack = std::max(0.0, diag.fit_loss - diag.bayes_loss);
    }
  }

  std::vector<std::vector<AuditLine>> reg_audits(P);
  for (int p = 0; p < P; ++p)
    reg_audits[p] = audit_regression_recursion(m, inst.policies[p], dD_true, piD, cx_vec, ca_vec,
                                               est[p], diags[p]);
  std::vector<std::vector<bool>> dominance(P, std::vector<bool>(H, true));
  for (int p = 0; p < P; ++p)
    for (int h = 0; h < H; ++h)
      dominance[p][h] = !((clipped[p][h].values - exact[p][h].values).array() > 1e-9).any();

  std::vector<AuditLine> miss_audit;
  std::vector<AuditLine> lin_audit;
  if (online) {
    miss_audit = audit_missingness_recursion(m, inst.policies, est, exact, clipped);
    lin_audit = audit_linearization_contraction(online_run, clipped, cfg.algo == "forcrle");
  }

  // Reward-free value gaps on a few random reward draws.
  double max_gap = 0;
  double eps_bound = 0;
  bool pessimism_ok = true;
  {
    double max_err = 0;
    for (int p = 0; p < P; ++p)
      for (int h = 0; h < H; ++h)
        max_err = std::max(max_err, l1_dist(est[p][h].values, exact[p][h].values));
    eps_bound = 2.0 * H * max_err;
    for (int rseed = 0; rseed < 5; ++rseed) {
      const RewardFunction r = generate_random_rewards(X, K, H, mix_seed(0x9e37ULL, rseed));
      SelectResult sel = online_policy_select(est, r, inst.policies);
      double best_true = -1, chosen_true = 0;
      for (int p = 0; p < P; ++p) {
        const double v = policy_return_from(exact[p], inst.policies[p], r);
        const double vbar = policy_return_from(clipped[p], inst.policies[p], r);
        if (vbar > v + 1e-9) pessimism_ok = false;
        if (v > best_true) best_true = v;
        if (p == sel.index) chosen_true = v;
      }
      max_gap = std::max(max_gap, best_true - chosen_true);
    }
  }

  json objective_json;
  if (!cfg.objective.empty()) {
    const OccupancyObjective obj = build_objective(cfg.objective, m);
    std::vector<std::vector<Vec>> profiles(P);
    for (int p = 0; p < P; ++p)
      for (int h = 0; h < H; ++h) profiles[p].push_back(est[p][h].values);
    std::vector<double> values;
    const int chosen = plugin_objective_select(profiles, obj, inst.policies, online, &values);
    objective_json = {{"name", obj.name},
                      {"chosen", chosen},
                      {"lipschitz", obj.lipschitz},
                      {"values", values}};
  }

  const auto t1 = std::chrono::steady_clock::now();
  const double wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  // CSV rows, one per (policy, level).
  CellOutput out;
  for (int p = 0; p < P; ++p) {
    for (int h = 0; h < H; ++h) {
      const double err_true = l1_dist(est[p][h].values, exact[p][h].values);
      const double err_clipped = l1_dist(est[p][h].values, clipped[p][h].values);
      const double missing = l1_dist(clipped[p][h].values, exact[p][h].values);
      const double cmass = h >= 1 ? diags[p][h - 1].clipped_mass : 0.0;
      int passed = dominance[p][h] ? 1 : 0;
      if (h >= 1) {
        passed += reg_audits[p][h - 1].pass ? 1 : 0;
        if (online) {
          const AuditLine& line = miss_audit[(h - 1) * P + p];
          passed += line.pass ? 1 : 0;
        }
      }
      std::ostringstream row;
      row << cfg.algo << ',' << cell.seed << ',' << cell.n_mle << ',' << cell.n_reg << ',' << p
          << ',' << h << ',' << fmt(err_true) << ',' << fmt(err_clipped) << ',' << fmt(missing)
          << ',' << fmt(cmass) << ',' << passed << ',' << fmt(wall_ms);
      out.rows.push_back(row.str());
    }
  }

  // Per-run JSON with the audit detail.
  json audits;
  {
    json reg = json::array();
    for (int p = 0; p < P; ++p) {
      json lines = json::array();
      for (const AuditLine& l : reg_audits[p])
        lines.push_back({{"level", l.level}, {"lhs", l.lhs}, {"rhs", l.rhs}, {"pass", l.pass}});
      reg.push_back(lines);
    }
    audits["regression_recursion"] = reg;
    json dom = json::array();
    for (int p = 0; p < P; ++p) dom.push_back(dominance[p]);
    audits["dominance"] = dom;
    if (online) {
      json miss = json::array();
      for (const AuditLine& l : miss_audit)
        miss.push_back({{"level", l.level}, {"lhs", l.lhs}, {"rhs", l.rhs}, {"pass", l.pass}});
      audits["missingness_recursion"] = miss;
      json lin = json::array();
      for (const AuditLine& l : lin_audit)
        lin.push_back({{"level", l.level}, {"lhs", l.lhs}, {"rhs", l.rhs}, {"pass", l.pass}});
      audits["linearization_contraction"] = lin;
    }
  }

  json metrics = json::array();
  for (int p = 0; p < P; ++p) {
    const ErrorMetrics me = error_metrics(est[p], exact[p], clipped[p]);
    json per_policy;
    per_policy["policy_id"] = p;
    per_policy["err_true"] = me.err_true;
    per_policy["err_clipped"] = me.err_clipped;
    per_policy["missingness"] = me.missingness;
    metrics.push_back(per_policy);
  }

  json run;
  run["cell"] = cell.name;
  run["manifest"] = manifest_hash;
  run["algo"] = cfg.algo;
  run["seed"] = cell.seed;
  run["n_mle"] = cell.n_mle;
  run["n_reg"] = cell.n_reg;
  run["metrics"] = metrics;
  run["audits"] = audits;
  run["value_gap"] = {{"rewards_checked", 5},
                      {"max_gap", max_gap},
                      {"eps_bound", eps_bound},
                      {"pessimism_ok", pessimism_ok}};
  if (!objective_json.is_null()) run["objective"] = objective_json;
  if (online) run["deployments"] = deployments;
  json outputs = json::array();
  for (int p = 0; p < P; ++p) {
    ForcOutput view;
    view.estimates = est[p];
    view.diags = diags[p];
    outputs.push_back(forc_output_to_json(view, p));
  }
  run["outputs"] = outputs;
  out.run_json = std::move(run);
  if (online) {
    out.trace_json = force_trace_to_json(online_run);
    out.has_trace = true;
  }
  return out;
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_grid.empty()) throw std::invalid_argument("sweep n_grid is empty");
  if (cfg.seeds.empty()) throw std::invalid_argument("sweep seeds list is empty");
  for (int n : cfg.n_grid)
    if (n < 1) throw std::invalid_argument("sweep n must be >= 1");
  if (!cfg.n_reg_grid.empty() && cfg.n_reg_grid.size() != cfg.n_grid.size())
    throw std::invalid_argument("n_reg_grid must match n_grid in length");
  if (cfg.out_dir.empty()) throw std::invalid_argument("out_dir is empty");

  if (const char* w = std::getenv("OCCEST_WORKERS")) {
    const int workers = std::max(1, std::atoi(w));
    omp_set_num_threads(workers);
  }

  const Instance inst = load_instance(cfg);
  const std::string hash = config_hash(cfg);
  fs::create_directories(cfg.out_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "runs");

  json manifest;
  manifest["hash"] = hash;
  manifest["config"] = config_to_json(cfg);
  manifest["tool"] = "occest";
  manifest["schema_version"] = 1;
  write_text_file((fs::path(cfg.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");

  std::vector<CellSpec> cells;
  for (size_t i = 0; i < cfg.n_grid.size(); ++i) {
    for (uint64_t seed : cfg.seeds) {
      CellSpec c;
      c.n_mle = cfg.n_grid[i];
      c.n_reg = cfg.n_reg_grid.empty() ? cfg.n_grid[i] : cfg.n_reg_grid[i];
      c.seed = seed;
      c.name = cfg.algo + "_n" + std::to_string(c.n_mle) + "_s" + std::to_string(seed);
      cells.push_back(c);
    }
  }

  std::vector<CellOutput> outputs(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t c = 0; c < cells.size(); ++c) {
    try {
      outputs[c] = run_cell(cfg, inst, cells[c], hash);
    } catch (const std::exception& e) {
      outputs[c].error = e.what();
    }
  }

  std::ostringstream csv;
  csv << "# manifest=" << hash << "\n";
  csv << "algo,seed,n_mle,n_reg,policy_id,h,err_true,err_clipped,missingness,clipped_mass,"
         "audits_passed,wall_ms\n";
  std::string first_error;
  std::string failed_cell;
  for (size_t c = 0; c < cells.size(); ++c) {
    if (!outputs[c].error.empty()) {
      if (first_error.empty()) {
        first_error = outputs[c].error;
        failed_cell = cells[c].name;
      }
      continue;
    }
    for (const std::string& row : outputs[c].rows) csv << row << "\n";
    const fs::path dir = fs::path(cfg.out_dir) / "runs" / cells[c].name;
    fs::create_directories(dir);
    write_text_file((dir / "run.json").string(), outputs[c].run_json.dump(2) + "\n");
    if (outputs[c].has_trace)
      write_text_file((dir / "trace.json").string(), outputs[c].trace_json.dump(2) + "\n");

    std::ostringstream summary;
    summary << "policy_id,h,l1_err_vs_true,l1_err_vs_clipped,clipped_mass\n";
    for (const std::string& row : outputs[c].rows) {
      const auto f = split_csv(row);
      summary << f[4] << ',' << f[5] << ',' << f[6] << ',' << f[7] << ',' << f[9] << "\n";
    }
    write_text_file((dir / "summary.csv").string(), summary.str());
    if (cells.size() == 1)
      write_text_file((fs::path(cfg.out_dir) / "summary.csv").string(), summary.str());
  }
  write_text_file((fs::path(cfg.out_dir) / "results.csv").string(), csv.str());

  if (!first_error.empty())
    throw std::runtime_error("experiment cell " + failed_cell + " failed: " + first_error +
                             " (partial results flushed to " + cfg.out_dir + ")");
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * (static_cast<double>(values.size()) - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::string strip_wall_ms(const std::string& results_csv) {
  std::istringstream in(results_csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      out << line << "\n";
      continue;
    }
    const size_t pos = line.rfind(',');
    out << (pos == std::string::npos ? line : line.substr(0, pos)) << "\n";
  }
  return out.str();
}

namespace {

struct ParsedRow {
  std::string algo;
  uint64_t seed;
  int n_mle, n_reg, policy_id, h;
  double err_true, err_clipped, missingness, clipped_mass;
  int audits_passed;
};

}  // namespace

std::string emit_report(const std::string& run_dir) {
  const std::string csv = read_text_file((fs::path(run_dir) / "results.csv").string());
  std::istringstream in(csv);
  std::string line;
  std::string manifest_line;
  std::vector<ParsedRow> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      manifest_line = line;
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 12) throw std::runtime_error("malformed results row: " + line);
    ParsedRow r;
    r.algo = f[0];
    r.seed = std::stoull(f[1]);
    r.n_mle = std::stoi(f[2]);
    r.n_reg = std::stoi(f[3]);
    r.policy_id = std::stoi(f[4]);
    r.h = std::stoi(f[5]);
    r.err_true = std::stod(f[6]);
    r.err_clipped = std::stod(f[7]);
    r.missingness = std::stod(f[8]);
    r.clipped_mass = std::stod(f[9]);
    r.audits_passed = std::stoi(f[10]);
    rows.push_back(r);
  }

  // group by sweep cell (algo, n), then by seed
  struct SeedSummary {
    double err_true = 0, err_clipped = 0, missingness = 0;
    int audit_failures = 0;
  };
  std::map<std::tuple<std::string, int, int>, std::map<uint64_t, SeedSummary>> groups;
  for (const ParsedRow& r : rows) {
    SeedSummary& s = groups[{r.algo, r.n_mle, r.n_reg}][r.seed];
    s.err_true = std::max(s.err_true, r.err_true);
    s.err_clipped = std::max(s.err_clipped, r.err_clipped);
    s.missingness = std::max(s.missingness, r.missingness);
    const int expected = r.h == 0 ? 1 : (algo_is_online(r.algo) ? 3 : 2);
    s.audit_failures += std::max(0, expected - r.audits_passed);
  }

  std::ostringstream txt, rcsv;
  rcsv << "algo,n_mle,n_reg,metric,median,q25,q75,seeds\n";
  int total_failures = 0;
  std::ostringstream failure_detail;
  for (const auto& [key, per_seed] : groups) {
    for (const auto& [seed, s] : per_seed) {
      if (s.audit_failures > 0) {
        total_failures += s.audit_failures;
        failure_detail << "  " << std::get<0>(key) << " n_mle=" << std::get<1>(key)
                       << " n_reg=" << std::get<2>(key) << " seed=" << seed << ": "
                       << s.audit_failures << " failed audit line(s)\n";
      }
    }
  }
  if (total_failures > 0) {
    txt << "*** AUDIT FAILURES: " << total_failures << " failed audit line(s) ***\n"
        << failure_detail.str() << "\n";
  } else {
    txt << "all invariant audits passed\n\n";
  }
  if (!manifest_line.empty()) txt << manifest_line << "\n";

  for (const auto& [key, per_seed] : groups) {
    std::vector<double> et, ec, mi;
    for (const auto& [seed, s] : per_seed) {
      et.push_back(s.err_true);
      ec.push_back(s.err_clipped);
      mi.push_back(s.missingness);
    }
    const size_t ns = per_seed.size();
    txt << std::get<0>(key) << " n_mle=" << std::get<1>(key) << " n_reg=" << std::get<2>(key)
        << " (" << ns << " seeds)\n";
    const auto emit = [&](const char* name, std::vector<double>& v) {
      const double med = quantile(v, 0.5), lo = quantile(v, 0.25), hi = quantile(v, 0.75);
      txt << "  " << name << ": median " << fmt(med) << "  q25 " << fmt(lo) << "  q75 "
          << fmt(hi) << "\n";
      rcsv << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
           << name << ',' << fmt(med) << ',' << fmt(lo) << ',' << fmt(hi) << ',' << ns << "\n";
    };
    emit("err_true", et);
    emit("err_clipped", ec);
    emit("missingness", mi);
  }

  write_text_file((fs::path(run_dir) / "report.csv").string(), rcsv.str());
  write_text_file((fs::path(run_dir) / "report.txt").string(), txt.str());
  return txt.str();
}

}  // namespace occest
