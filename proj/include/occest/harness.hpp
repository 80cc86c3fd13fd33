#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "occest/generators.hpp"
#include "occest/types.hpp"

namespace occest {

// Experiment description: instance sources, algorithm selection, sweep axes.
// Loadable from a single JSON config (or a manifest produced by a previous
// run), with CLI flags overriding individual fields.
struct ExperimentConfig {
  std::string algo;  // forc | force | forcrl | forcrle

  std::string mdp_file;
  std::optional<MdpGenParams> mdp_gen;
  std::string policies_file;
  std::optional<PolicyGenParams> policy_gen;
  std::string candidates_file;
  std::optional<int> candidate_decoys;
  uint64_t candidate_seed = 5;

  int restarts = 8;
  double mle_tol = 1e-8;
  double reg_tol = 1e-8;
  double cx = -1;  // offline thresholds; -1 means rank / num_actions
  double ca = -1;
  std::string spanner = "exact";  // "exact" or "approx:<C>"

  std::vector<int> n_grid;      // per cell: n_mle (and n_reg unless overridden)
  std::vector<int> n_reg_grid;  // optional, parallel to n_grid
  std::vector<uint64_t> seeds;

  std::string objective;  // "", "return:<file>", "l2-match:<file>", "neg-entropy"
  std::string out_dir;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config_file(const std::string& path);  // config or manifest
uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const ExperimentConfig& cfg);

// Executes the sweep: one cell per (n, seed), in parallel up to the
// OCCEST_WORKERS environment variable. Writes manifest.json, results.csv
// (first line carries the manifest hash), and runs/<cell>/run.json plus a
// trace for online algorithms. Aborts with context on any cell failure after
// flushing completed cells.
void run_experiment(const ExperimentConfig& cfg);

// Aggregates a finished run directory: medians and quartiles across seeds per
// sweep cell, audit failures flagged. Writes report.csv and report.txt under
// the directory and returns the text.
std::string emit_report(const std::string& run_dir);

// results.csv with the wall_ms column blanked; reruns of a manifest must
// match byte-for-byte on this view (wall-clock time is the one permitted
// difference).
std::string strip_wall_ms(const std::string& results_csv);

double quantile(std::vector<double> values, double q);  // type-7 interpolation

}  // namespace occest
