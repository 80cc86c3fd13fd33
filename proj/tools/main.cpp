// Command-line entry point: instance generation, the four estimation
// algorithms, and report aggregation. Algorithm subcommands accept either a
// config/manifest JSON (--config) or direct flags; flags override the config.
// OCCEST_WORKERS caps the sweep worker count.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "occest/generators.hpp"
#include "occest/harness.hpp"
#include "occest/json_io.hpp"

namespace {

struct AlgoOpts {
  std::string config;
  std::string mdp;
  std::string policies;
  std::string features;
  int decoys = -1;
  uint64_t features_seed = 5;
  int n_mle = -1;
  int n_reg = -1;
  double cx = -1;
  double ca = -1;
  std::string spanner;
  int restarts = -1;
  std::vector<uint64_t> seeds;
  std::string objective;
  std::string out;
};

void add_algo_flags(CLI::App* cmd, AlgoOpts* o, bool online, bool repr) {
  cmd->add_option("--config", o->config, "experiment config or manifest JSON");
  cmd->add_option("--mdp", o->mdp, "MDP specification file");
  cmd->add_option("--policies", o->policies, "policy class file");
  if (repr) {
    cmd->add_option("--features", o->features, "candidate feature set file");
    cmd->add_option("--decoys", o->decoys, "generate truth + this many decoy features");
    cmd->add_option("--features-seed", o->features_seed, "decoy generator seed");
  }
  cmd->add_option("--n-mle", o->n_mle, "MLE split size per level");
  cmd->add_option("--n-reg", o->n_reg, "regression split size per level");
  if (!online) {
    cmd->add_option("--cx", o->cx, "state clipping threshold (default: rank)");
    cmd->add_option("--ca", o->ca, "action clipping threshold (default: num actions)");
  } else {
    cmd->add_option("--spanner", o->spanner, "exact | approx:<C>");
  }
  cmd->add_option("--restarts", o->restarts, "weight-fit restarts");
  cmd->add_option("--seed,--seeds", o->seeds, "seed(s); several seeds sweep");
  cmd->add_option("--objective", o->objective,
                  "return:<reward-file> | l2-match:<target-file> | neg-entropy");
  cmd->add_option("--out", o->out, "output directory");
}

int run_algo(const std::string& algo, const AlgoOpts& o) {
  occest::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = occest::load_config_file(o.config);
  cfg.algo = algo;
  if (!o.mdp.empty()) {
    cfg.mdp_file = o.mdp;
    cfg.mdp_gen.reset();
  }
  if (!o.policies.empty()) {
    cfg.policies_file = o.policies;
    cfg.policy_gen.reset();
  }
  if (!o.features.empty()) {
    cfg.candidates_file = o.features;
    cfg.candidate_decoys.reset();
  }
  if (o.decoys >= 0) {
    cfg.candidate_decoys = o.decoys;
    cfg.candidate_seed = o.features_seed;
    cfg.candidates_file.clear();
  }
  if (o.n_mle > 0) cfg.n_grid = {o.n_mle};
  if (o.n_reg > 0) cfg.n_reg_grid = {o.n_reg};
  if (o.cx > 0) cfg.cx = o.cx;
  if (o.ca > 0) cfg.ca = o.ca;
  if (!o.spanner.empty()) cfg.spanner = o.spanner;
  if (o.restarts > 0) cfg.restarts = o.restarts;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.objective.empty()) cfg.objective = o.objective;
  if (!o.out.empty()) cfg.out_dir = o.out;

  occest::run_experiment(cfg);
  std::cout << "wrote " << cfg.out_dir << " (manifest " << occest::config_hash(cfg) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occupancy estimation in finite low-rank MDPs"};
  app.require_subcommand(1);

  // gen-mdp
  occest::MdpGenParams mp;
  std::string gm_out = "mdp.json";
  auto* gm = app.add_subcommand("gen-mdp", "generate a random low-rank MDP");
  gm->add_option("--states", mp.num_states, "number of states")->required();
  gm->add_option("--actions", mp.num_actions, "number of actions")->required();
  gm->add_option("--horizon", mp.horizon, "horizon")->required();
  gm->add_option("--rank", mp.rank, "feature dimension")->required();
  gm->add_option("--seed", mp.seed, "generator seed");
  gm->add_option("--feature-style", mp.feature_style, "simplex | identity");
  gm->add_option("--init-style", mp.init_style, "dirichlet | uniform");
  gm->add_option("--out", gm_out, "output file");

  // gen-policies
  occest::PolicyGenParams pp;
  std::string gp_mdp, gp_out = "policies.json";
  auto* gp = app.add_subcommand("gen-policies", "generate a random policy class");
  gp->add_option("--mdp", gp_mdp, "MDP file")->required();
  gp->add_option("--count", pp.count, "number of policies")->required();
  gp->add_option("--det-fraction", pp.det_fraction, "fraction of deterministic policies");
  gp->add_option("--seed", pp.seed, "generator seed");
  gp->add_option("--out", gp_out, "output file");

  AlgoOpts forc_o, force_o, forcrl_o, forcrle_o;
  auto* c_forc = app.add_subcommand("forc", "offline occupancy estimation with clipping");
  add_algo_flags(c_forc, &forc_o, false, false);
  auto* c_force = app.add_subcommand("force", "online policy-cover construction");
  add_algo_flags(c_force, &force_o, true, false);
  auto* c_forcrl =
      app.add_subcommand("forcrl", "offline estimation with representation learning");
  add_algo_flags(c_forcrl, &forcrl_o, false, true);
  auto* c_forcrle =
      app.add_subcommand("forcrle", "online policy cover with representation learning");
  add_algo_flags(c_forcrle, &forcrle_o, true, true);

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "aggregate a finished run directory");
  rep->add_option("--run-dir", report_dir, "experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gm->parsed()) {
      occest::save_mdp_json(occest::generate_random_lowrank_mdp(mp), gm_out);
      std::cout << "wrote " << gm_out << "\n";
      return 0;
    }
    if (gp->parsed()) {
      const occest::LowRankMdp m = occest::load_mdp_json(gp_mdp);
      occest::save_policies_json(occest::generate_policy_class(pp, m), gp_out);
      std::cout << "wrote " << gp_out << "\n";
      return 0;
    }
    if (c_forc->parsed()) return run_algo("forc", forc_o);
    if (c_force->parsed()) return run_algo("force", force_o);
    if (c_forcrl->parsed()) return run_algo("forcrl", forcrl_o);
    if (c_forcrle->parsed()) return run_algo("forcrle", forcrle_o);
    if (rep->parsed()) {
      std::cout << occest::emit_report(report_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
