#pragma once

#include <vector>

#include "occest/forc.hpp"
#include "occest/force.hpp"
#include "occest/mdp.hpp"

namespace occest {

// Oracle-side checks: every quantity is computed exactly from the true model,
// so these certify the inequalities the estimators are supposed to satisfy on
// each run.

struct AuditLine {
  int level = 0;
  double lhs = 0;
  double rhs = 0;
  bool pass = false;
};

struct ErrorMetrics {
  // per level: ||d_hat - d||_1, ||d_hat - dbar||_1, ||dbar - d||_1
  std::vector<double> err_true;
  std::vector<double> err_clipped;
  std::vector<double> missingness;
};

ErrorMetrics error_metrics(const std::vector<Occupancy>& est, const std::vector<Occupancy>& exact,
                           const std::vector<Occupancy>& clipped);

// Per-level recursion audit of the regression error: the l1 gap to the
// clipped target grows by at most the data-estimation terms plus the weighted
// l2 distance of the fitted weight from the Bayes regression function, plus
// the measured optimizer slack.
std::vector<AuditLine> audit_regression_recursion(const LowRankMdp& m, const MarkovPolicy& pi,
                                                  const std::vector<Vec>& dD_true,
                                                  const std::vector<Mat>& data_policies,
                                                  const std::vector<double>& cx,
                                                  const std::vector<double>& ca,
                                                  const std::vector<Occupancy>& est,
                                                  std::vector<ForcLevelDiag>& diags,
                                                  double tol = 1e-9);

// Per-level recursion audit of the missingness error in the online loop:
// growth is bounded by 4 * rank * the worst regression error at the previous
// level over the policy class.
std::vector<AuditLine> audit_missingness_recursion(
    const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
    const std::vector<std::vector<Occupancy>>& est,
    const std::vector<std::vector<Occupancy>>& exact,
    const std::vector<std::vector<Occupancy>>& clipped, double tol = 1e-9);

// dbar <= d entrywise.
bool audit_dominance(const std::vector<Occupancy>& clipped, const std::vector<Occupancy>& exact,
                     double tol = 1e-9);

// ||d_tilde - d_hat||_1 <= ||d_hat - dbar||_1 whenever dbar is feature-linear.
// Under joint linearization the selected feature is shared, so the bound is
// the worst ||d_hat - dbar||_1 over the policy class instead (pass joint).
std::vector<AuditLine> audit_linearization_contraction(
    const ForceResult& run, const std::vector<std::vector<Occupancy>>& clipped,
    bool joint = false, double tol = 1e-8);

// Realized data distributions of an online run, from the trace's exploratory
// sets: data_dists[h] is the exact mixture marginal at level h (0..H-2) and
// data_policies[h] the uniform action policy.
void realized_data_distributions(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                                 const ForceResult& run, std::vector<Vec>* data_dists,
                                 std::vector<Mat>* data_policies);

}  // namespace occest
