#include "occest/audits.hpp"

#include <cmath>
#include <stdexcept>

namespace occest {

ErrorMetrics error_metrics(const std::vector<Occupancy>& est, const std::vector<Occupancy>& exact,
                           const std::vector<Occupancy>& clipped) {
  ErrorMetrics me;
  for (size_t h = 0; h < est.size(); ++h) {
    me.err_true.push_back(l1_dist(est[h].values, exact[h].values));
    me.err_clipped.push_back(l1_dist(est[h].values, clipped[h].values));
    me.missingness.push_back(l1_dist(clipped[h].values, exact[h].values));
  }
  return me;
}

std::vector<AuditLine> audit_regression_recursion(const LowRankMdp& m, const MarkovPolicy& pi,
                                                  const std::vector<Vec>& dD_true,
                                                  const std::vector<Mat>& data_policies,
                                                  const std::vector<double>& cx,
                                                  const std::vector<double>& ca,
                                                  const std::vector<Occupancy>& est,
                                                  std::vector<ForcLevelDiag>& diags,
                                                  double tol) {
  const std::vector<Occupancy> clipped =
      clipped_occupancies(m, pi, dD_true, data_policies, cx, ca);

  std::vector<AuditLine> lines;
  for (ForcLevelDiag& diag : diags) {
    const int h = diag.level;
    const Vec& dD = dD_true[h - 1];
    const Vec ddag = bellman_flow_level(m, h - 1, data_policies[h - 1], dD);

    diag.mle_err_dD = l1_dist(diag.dD_hat, dD);
    diag.mle_err_ddag = l1_dist(diag.ddag_hat, ddag);

    // Bayes regression function for the run's actual target and pseudo-policy
    const Vec flow = bellman_flow_level(m, h - 1, diag.pibar, dD.cwiseProduct(diag.w_tilde));
    Vec bayes = Vec::Zero(m.num_states);
    for (int x = 0; x < m.num_states; ++x)
      if (ddag(x) > 1e-300) bayes(x) = flow(x) / ddag(x);

    double wsq = 0;
    for (int x = 0; x < m.num_states; ++x) {
      const double r = diag.w_hat(x) - bayes(x);
      wsq += ddag(x) * r * r;
    }

    AuditLine line;
    line.level = h;
    line.lhs = l1_dist(est[h].values, clipped[h].values);
    line.rhs = l1_dist(est[h - 1].values, clipped[h - 1].values) +
               2.0 * cx[h - 1] * diag.mle_err_dD + cx[h - 1] * ca[h - 1] * diag.mle_err_ddag +
               std::sqrt(2.0) * std::sqrt(wsq) + std::max(0.0, diag.reg_slack) + tol;
    line.pass = line.lhs <= line.rhs;
    lines.push_back(line);
  }
  return lines;
}

std::vector<AuditLine> audit_missingness_recursion(
    const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
    const std::vector<std::vector<Occupancy>>& est,
    const std::vector<std::vector<Occupancy>>& exact,
    const std::vector<std::vector<Occupancy>>& clipped, double tol) {
  const int P = static_cast<int>(policies.size());
  std::vector<AuditLine> lines;
  for (int h = 1; h < m.horizon; ++h) {
    double worst_prev_reg = 0;
    for (int p = 0; p < P; ++p)
      worst_prev_reg =
          std::max(worst_prev_reg, l1_dist(est[p][h - 1].values, clipped[p][h - 1].values));
    for (int p = 0; p < P; ++p) {
      AuditLine line;
      line.level = h;
      line.lhs = l1_dist(clipped[p][h].values, exact[p][h].values);
      line.rhs = l1_dist(clipped[p][h - 1].values, exact[p][h - 1].values) +
                 4.0 * m.rank * worst_prev_reg + tol;
      line.pass = line.lhs <= line.rhs;
      lines.push_back(line);
    }
  }
  return lines;
}

bool audit_dominance(const std::vector<Occupancy>& clipped, const std::vector<Occupancy>& exact,
                     double tol) {
  for (size_t h = 0; h < clipped.size(); ++h)
    if (((clipped[h].values - exact[h].values).array() > tol).any()) return false;
  return true;
}

std::vector<AuditLine> audit_linearization_contraction(
    const ForceResult& run, const std::vector<std::vector<Occupancy>>& clipped, bool joint,
    double tol) {
  std::vector<AuditLine> lines;
  for (const ForceLevelTrace& tr : run.trace) {
    double worst = 0;
    if (joint) {
      for (size_t p = 0; p < tr.d_tilde.size(); ++p)
        worst = std::max(worst,
                         l1_dist(run.estimates[p][tr.level].values, clipped[p][tr.level].values));
    }
    for (size_t p = 0; p < tr.d_tilde.size(); ++p) {
      AuditLine line;
      line.level = tr.level;
      line.lhs = l1_dist(tr.d_tilde[p], run.estimates[p][tr.level].values);
      const double bound =
          joint ? worst
                : l1_dist(run.estimates[p][tr.level].values, clipped[p][tr.level].values);
      line.rhs = bound + tol;
      line.pass = line.lhs <= line.rhs;
      lines.push_back(line);
    }
  }
  return lines;
}

void realized_data_distributions(const LowRankMdp& m, const std::vector<MarkovPolicy>& policies,
                                 const ForceResult& run, std::vector<Vec>* data_dists,
                                 std::vector<Mat>* data_policies) {
  const Mat unif = Mat::Constant(m.num_states, m.num_actions, 1.0 / m.num_actions);
  data_dists->assign(m.horizon - 1, Vec::Zero(m.num_states));
  data_policies->assign(m.horizon - 1, unif);
  for (const ForceLevelTrace& tr : run.trace) {
    const int h = tr.level - 1;
    Vec mix = Vec::Zero(m.num_states);
    for (int i : tr.expl) mix += exact_occupancies(m, policies[i])[h].values;
    (*data_dists)[h] = mix / static_cast<double>(tr.expl.size());
  }
}

}  // namespace occest
