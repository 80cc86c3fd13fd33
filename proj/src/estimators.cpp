#include "occest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "occest/lp.hpp"
#include "occest/rng.hpp"

namespace occest {

namespace {

constexpr double kDenomFloor = 1e-12;

Vec state_counts(const std::vector<int>& samples, int num_states) {
  Vec cnt = Vec::Zero(num_states);
  for (int x : samples) {
    if (x < 0 || x >= num_states) throw std::invalid_argument("sample state out of range");
    cnt(x) += 1.0;
  }
  return cnt;
}

// max t  s.t.  (M theta)_x >= t on observed states, (M theta)_x >= 0 on all,
// 1'M theta = 1, |theta_j| <= bound. Returns false when the class is empty.
bool mle_feasible_start(const Mat& M, const std::vector<char>& observed, double bound, Vec* theta,
                        double* tstar) {
  const int X = static_cast<int>(M.rows());
  const int d = static_cast<int>(M.cols());
  // columns: tp(d) tm(d) t(1) s(X) u(d) v(d) w(1)
  const int cols = 2 * d + 1 + X + 2 * d + 1;
  const int rows = X + 1 + 2 * d + 1;
  Mat A = Mat::Zero(rows, cols);
  Vec b = Vec::Zero(rows);
  for (int x = 0; x < X; ++x) {
    A.block(x, 0, 1, d) = M.row(x);
    A.block(x, d, 1, d) = -M.row(x);
    if (observed[x]) A(x, 2 * d) = -1.0;
    A(x, 2 * d + 1 + x) = -1.0;
  }
  const Eigen::RowVectorXd colsum = M.colwise().sum();
  A.block(X, 0, 1, d) = colsum;
  A.block(X, d, 1, d) = -colsum;
  b(X) = 1.0;
  for (int j = 0; j < d; ++j) {
    A(X + 1 + j, j) = 1.0;
    A(X + 1 + j, 2 * d + 1 + X + j) = 1.0;
    b(X + 1 + j) = bound;
    A(X + 1 + d + j, d + j) = 1.0;
    A(X + 1 + d + j, 2 * d + 1 + X + d + j) = 1.0;
    b(X + 1 + d + j) = bound;
  }
  A(X + 1 + 2 * d, 2 * d) = 1.0;
  A(X + 1 + 2 * d, cols - 1) = 1.0;
  b(X + 1 + 2 * d) = 1.0;  // t <= 1

  Vec c = Vec::Zero(cols);
  c(2 * d) = -1.0;  // maximize t
  LpResult res = solve_standard_lp(A, b, c);
  if (res.status != LpStatus::Optimal) return false;
  *theta = res.x.head(d) - res.x.segment(d, d);
  *tstar = res.x(2 * d);
  return true;
}

// max (M theta)_x0 over the class; used only to certify infeasibility.
double max_state_mass(const Mat& M, int x0, double bound) {
  const int X = static_cast<int>(M.rows());
  const int d = static_cast<int>(M.cols());
  const int cols = 2 * d + X + 2 * d;
  const int rows = X + 1 + 2 * d;
  Mat A = Mat::Zero(rows, cols);
  Vec b = Vec::Zero(rows);
  for (int x = 0; x < X; ++x) {
    A.block(x, 0, 1, d) = M.row(x);
    A.block(x, d, 1, d) = -M.row(x);
    A(x, 2 * d + x) = -1.0;
  }
  const Eigen::RowVectorXd colsum = M.colwise().sum();
  A.block(X, 0, 1, d) = colsum;
  A.block(X, d, 1, d) = -colsum;
  b(X) = 1.0;
  for (int j = 0; j < d; ++j) {
    A(X + 1 + j, j) = 1.0;
    A(X + 1 + j, 2 * d + X + j) = 1.0;
    b(X + 1 + j) = bound;
    A(X + 1 + d + j, d + j) = 1.0;
    A(X + 1 + d + j, 2 * d + X + d + j) = 1.0;
    b(X + 1 + d + j) = bound;
  }
  Vec c = Vec::Zero(cols);
  c.segment(0, d) = -M.row(x0).transpose();
  c.segment(d, d) = M.row(x0).transpose();
  LpResult res = solve_standard_lp(A, b, c);
  if (res.status != LpStatus::Optimal) return 0;
  return -res.objective;
}

struct MleObjective {
  const Mat& M;
  const Vec& phat;
  const std::vector<char>& observed;
  double lambda;

  double value(const Vec& v) const {
    double f = 0;
    for (int x = 0; x < v.size(); ++x) {
      if (observed[x]) {
        if (v(x) <= 0) return -std::numeric_limits<double>::infinity();
        f += phat(x) * std::log(v(x));
      }
      if (v(x) < 0) f -= lambda * v(x) * v(x);
    }
    return f;
  }

  Vec gradient(const Vec& v) const {
    Vec gv = Vec::Zero(v.size());
    for (int x = 0; x < v.size(); ++x) {
      if (observed[x]) gv(x) += phat(x) / std::max(v(x), 1e-300);
      if (v(x) < 0) gv(x) -= 2.0 * lambda * v(x);
    }
    return M.transpose() * gv;
  }
};

// Gradient ascent with the normalization constraint handled exactly: every
// candidate is clamped to the theta box and rescaled onto 1'M theta = 1 (a
// ray projection, which preserves the nonnegativity cone). Nonnegativity off
// the observed states is penalized; observed states stay positive because the
// line search rejects steps that lose them. Stops when the objective improves
// by less than tol over a 50-step window.
void pgd_ascend(const MleObjective& obj, const Eigen::RowVectorXd& colsum, double bound,
                double tol, int max_iters, Vec* theta) {
  constexpr int window = 50;
  const auto project = [&](Vec cand) -> bool {
    for (int rep = 0; rep < 2; ++rep) {
      cand = cand.cwiseMax(-bound).cwiseMin(bound);
      const double s = colsum.dot(cand);
      if (s <= 1e-12) return false;
      cand /= s;
    }
    *theta = cand;
    return true;
  };
  Vec saved = *theta;
  if (!project(saved)) return;

  double step = 1e-2;
  Vec v = obj.M * (*theta);
  double f = obj.value(v);
  double window_base = f;
  int since_check = 0;
  for (int it = 0; it < max_iters; ++it) {
    const Vec g = obj.gradient(v);
    // ascent direction of theta -> f(theta / (colsum . theta)) on the slice
    const Vec dir = g - g.dot(*theta) * colsum.transpose();
    bool accepted = false;
    double eta = step;
    const Vec base = *theta;
    for (int bt = 0; bt < 60; ++bt) {
      if (project(base + eta * dir)) {
        const Vec vc = obj.M * (*theta);
        const double fc = obj.value(vc);
        if (fc > f) {
          v = vc;
          f = fc;
          step = eta * 1.5;
          accepted = true;
          break;
        }
      }
      eta *= 0.5;
    }
    if (!accepted) {
      *theta = base;
      return;
    }
    if (++since_check >= window) {
      if (f - window_base < tol) return;
      window_base = f;
      since_check = 0;
    }
  }
}

}  // namespace

MleResult mle_density(const std::vector<int>& samples, const LinearDensityClass& cls, double tol) {
  if (samples.empty()) throw std::invalid_argument("mle_density: empty sample");
  const Mat& M = cls.feature;
  const int X = static_cast<int>(M.rows());
  const double n = static_cast<double>(samples.size());
  const Vec cnt = state_counts(samples, X);
  const Vec phat = cnt / n;
  std::vector<char> observed(X, 0);
  for (int x = 0; x < X; ++x) observed[x] = cnt(x) > 0;

  Vec theta;
  double tstar = 0;
  if (!mle_feasible_start(M, observed, cls.theta_inf_bound, &theta, &tstar))
    throw InfeasibleDensityClass("mle_density: density class is empty", -1);
  if (tstar <= kDenomFloor) {
    for (int x = 0; x < X; ++x) {
      if (observed[x] && max_state_mass(M, x, cls.theta_inf_bound) <= kDenomFloor)
        throw InfeasibleDensityClass(
            "mle_density: no class member assigns positive mass to observed state " +
                std::to_string(x),
            x);
    }
  }

  const Eigen::RowVectorXd colsum = M.colwise().sum();
  for (double lambda : {1e4, 1e8}) {
    MleObjective obj{M, phat, observed, lambda};
    pgd_ascend(obj, colsum, cls.theta_inf_bound, tol, 4000, &theta);
  }
  {
    // The likelihood is flat near the optimum; a tight polish round pins the
    // parameters, not just the objective value.
    MleObjective obj{M, phat, observed, 1e8};
    pgd_ascend(obj, colsum, cls.theta_inf_bound, std::min(tol * 1e-6, 1e-14), 20000, &theta);
  }

  Vec v = (M * theta).cwiseMax(0.0);
  const double s = v.sum();
  if (s <= 0) throw InfeasibleDensityClass("mle_density: optimizer collapsed to zero mass", -1);
  v /= s;
  theta /= s;

  double ll = 0;
  for (int x = 0; x < X; ++x)
    if (observed[x]) ll += phat(x) * std::log(std::max(v(x), 1e-300));
  return {v, theta, ll};
}

double WeightRatio::eval(int x) const {
  const double den = feature.row(x).dot(theta_down);
  if (std::abs(den) < kDenomFloor) return 0;
  const double num = feature.row(x).dot(theta_up);
  return std::clamp(num / den, -cap, cap);
}

Vec WeightRatio::eval_all() const {
  Vec out(feature.rows());
  for (int x = 0; x < feature.rows(); ++x) out(x) = eval(x);
  return out;
}

double regression_loss(const LevelBlock& block, const WeightRatio& w_next, const Vec& w_prev,
                       const Mat& pibar) {
  return regression_loss_values(block, w_next.eval_all(), w_prev, pibar);
}

double regression_loss_values(const LevelBlock& block, const Vec& w_next_values,
                              const Vec& w_prev, const Mat& pibar) {
  if (block.reg_split.empty()) throw std::invalid_argument("regression_loss: empty reg split");
  double acc = 0;
  for (int i : block.reg_split) {
    const auto& t = block.tuples[i];
    const double pd = block.data_policy(t[0], t[1]);
    if (pd <= 0)
      throw DataInconsistency("regression_loss: data policy assigns zero probability to observed "
                              "action at state " +
                              std::to_string(t[0]));
    const double y = w_prev(t[0]) * pibar(t[0], t[1]) / pd;
    const double r = w_next_values(t[2]) - y;
    acc += r * r;
  }
  return acc / static_cast<double>(block.reg_split.size());
}

namespace {

// The empirical loss depends on the hypothesis only through its values at the
// observed next states, so the regression split is compressed to per-state
// visit counts and mean targets once per fit.
struct RegView {
  Vec n1;            // visits of each state as x_next
  Vec ghat;          // mean target per next state
  double c0 = 0;     // sum y^2 - sum n1 ghat^2
  double n = 0;
};

RegView build_reg_view(const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                       int num_states) {
  if (block.reg_split.empty()) throw std::invalid_argument("fit_weight: empty reg split");
  RegView view;
  view.n1 = Vec::Zero(num_states);
  Vec g = Vec::Zero(num_states);
  double ysq = 0;
  for (int i : block.reg_split) {
    const auto& t = block.tuples[i];
    const double pd = block.data_policy(t[0], t[1]);
    if (pd <= 0)
      throw DataInconsistency("fit_weight: data policy assigns zero probability to observed "
                              "action at state " +
                              std::to_string(t[0]));
    const double y = w_prev(t[0]) * pibar(t[0], t[1]) / pd;
    view.n1(t[2]) += 1.0;
    g(t[2]) += y;
    ysq += y * y;
  }
  view.ghat = Vec::Zero(num_states);
  double weighted_sq = 0;
  for (int x = 0; x < num_states; ++x) {
    if (view.n1(x) > 0) {
      view.ghat(x) = g(x) / view.n1(x);
      weighted_sq += view.n1(x) * view.ghat(x) * view.ghat(x);
    }
  }
  view.c0 = ysq - weighted_sq;
  view.n = static_cast<double>(block.reg_split.size());
  return view;
}

struct FitWork {
  const Mat& M;
  const RegView& view;
  double cap;

  double loss(const Vec& up, const Vec& dn) const {
    double acc = 0;
    for (int x = 0; x < M.rows(); ++x) {
      if (view.n1(x) == 0) continue;
      const double den = M.row(x).dot(dn);
      double w = 0;
      if (std::abs(den) >= kDenomFloor) w = std::clamp(M.row(x).dot(up) / den, -cap, cap);
      const double r = w - view.ghat(x);
      acc += view.n1(x) * r * r;
    }
    return (acc + view.c0) / view.n;
  }

  void gradient(const Vec& up, const Vec& dn, Vec* gup, Vec* gdn) const {
    gup->setZero();
    gdn->setZero();
    for (int x = 0; x < M.rows(); ++x) {
      if (view.n1(x) == 0) continue;
      const double den = M.row(x).dot(dn);
      if (std::abs(den) < kDenomFloor) continue;
      const double raw = M.row(x).dot(up) / den;
      if (std::abs(raw) > cap) continue;  // clamped region: flat
      const double coef = 2.0 * view.n1(x) * (raw - view.ghat(x)) / view.n;
      *gup += (coef / den) * M.row(x).transpose();
      *gdn -= (coef * raw / den) * M.row(x).transpose();
    }
  }
};

// Weighted least squares for the numerator given a fixed denominator,
// ignoring the clamp. Rows with unsupported denominator are dropped.
Vec numerator_ls(const Mat& M, const RegView& view, const Vec& dn) {
  const int d = static_cast<int>(M.cols());
  Mat ata = 1e-10 * Mat::Identity(d, d);
  Vec atb = Vec::Zero(d);
  for (int x = 0; x < M.rows(); ++x) {
    if (view.n1(x) == 0) continue;
    const double den = M.row(x).dot(dn);
    if (std::abs(den) < kDenomFloor) continue;
    const Vec row = M.row(x).transpose() / den;
    ata += view.n1(x) * row * row.transpose();
    atb += view.n1(x) * view.ghat(x) * row;
  }
  return ata.ldlt().solve(atb);
}

struct RestartOutcome {
  Vec up, dn;
  double loss = std::numeric_limits<double>::infinity();
  bool diverged = false;
};

RestartOutcome run_restart(const FitWork& work, const Vec& dn_init, int restart, uint64_t seed,
                           double tol) {
  RestartOutcome out;
  Vec dn = dn_init;
  if (restart > 0) {
    Rng rng(mix_seed(seed, 0x72737472ULL, static_cast<uint64_t>(restart)));
    for (int j = 0; j < dn.size(); ++j) dn(j) = dn(j) * (1.0 + 0.3 * rng.normal()) + 0.05 * rng.normal();
  }
  const double dn_scale = std::max(dn.norm(), 1e-6);
  Vec up = numerator_ls(work.M, work.view, dn);

  double f = work.loss(up, dn);
  if (!std::isfinite(f)) {
    out.diverged = true;
    return out;
  }
  Vec gup(up.size()), gdn(dn.size());
  double step = 1e-2;
  const int window = 50;
  double window_base = f;
  int since_check = 0;
  for (int it = 0; it < 3000; ++it) {
    work.gradient(up, dn, &gup, &gdn);
    bool accepted = false;
    double eta = step;
    for (int bt = 0; bt < 60; ++bt) {
      Vec up_c = up - eta * gup;
      Vec dn_c = dn - eta * gdn;
      const double fc = work.loss(up_c, dn_c);
      if (!std::isfinite(fc)) {
        out.diverged = true;
        return out;
      }
      if (fc < f) {
        up = std::move(up_c);
        dn = std::move(dn_c);
        f = fc;
        step = eta * 1.5;
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
    // the ratio is invariant to a common rescaling; keep the parameters tame
    const double s = dn.norm();
    if (s > 1e-12) {
      up *= dn_scale / s;
      dn *= dn_scale / s;
    }
    if (++since_check >= window) {
      if (window_base - f < tol) break;
      window_base = f;
      since_check = 0;
    }
  }
  out.up = std::move(up);
  out.dn = std::move(dn);
  out.loss = f;
  return out;
}

}  // namespace

FitResult fit_weight(const LevelBlock& block, const Vec& w_prev, const Mat& pibar,
                     const WeightClass& cls, int restarts, uint64_t seed, double tol,
                     const Vec* theta_down_init) {
  if (restarts < 1) throw std::invalid_argument("fit_weight: restarts must be >= 1");
  if (!std::isfinite(cls.cap) || cls.cap < 0)
    throw std::invalid_argument("fit_weight: cap must be finite and nonnegative");
  const int X = static_cast<int>(cls.feature.rows());
  const RegView view = build_reg_view(block, w_prev, pibar, X);
  const FitWork work{cls.feature, view, cls.cap};

  Vec dn0;
  if (theta_down_init && theta_down_init->size() == cls.feature.cols()) {
    dn0 = *theta_down_init;
  } else {
    // fall back to fitting the empirical next-state frequencies
    Vec freq = view.n1 / view.n;
    dn0 = (cls.feature.transpose() * cls.feature + 1e-10 * Mat::Identity(cls.feature.cols(),
                                                                         cls.feature.cols()))
              .ldlt()
              .solve(cls.feature.transpose() * freq);
  }

  std::vector<RestartOutcome> outcomes(restarts);
#pragma omp parallel for schedule(static) if (restarts > 1)
  for (int r = 0; r < restarts; ++r) outcomes[r] = run_restart(work, dn0, r, seed, tol);

  int best = -1;
  for (int r = 0; r < restarts; ++r) {
    if (outcomes[r].diverged)
      throw std::runtime_error("fit_weight: optimizer divergence at restart " + std::to_string(r));
    if (best < 0 || outcomes[r].loss < outcomes[best].loss) best = r;
  }

  FitResult fit;
  fit.w = WeightRatio{outcomes[best].up, outcomes[best].dn, cls.feature, cls.cap};
  fit.loss = outcomes[best].loss;
  fit.restart = best;
  fit.restart_losses.resize(restarts);
  for (int r = 0; r < restarts; ++r) fit.restart_losses[r] = outcomes[r].loss;
  return fit;
}

Vec clip_state_density(const Vec& d, const Vec& dD, double cx) {
  return d.cwiseMin(cx * dD);
}

Mat clip_action_level(const Mat& pi, const Mat& piD, double ca) {
  if (ca < 0) throw std::invalid_argument("clip_action_level: ca must be >= 0");
  return pi.cwiseMin(ca * piD);
}

PseudoPolicy clip_action_policy(const MarkovPolicy& pi, const MarkovPolicy& piD, double ca) {
  if (pi.levels.size() != piD.levels.size())
    throw std::invalid_argument("clip_action_policy: horizon mismatch");
  PseudoPolicy out;
  out.levels.reserve(pi.levels.size());
  for (size_t h = 0; h < pi.levels.size(); ++h)
    out.levels.push_back(clip_action_level(pi.levels[h], piD.levels[h], ca));
  return out;
}

ExtractResult extract_density(const WeightRatio& w, const Vec& ddag_hat) {
  if ((ddag_hat.array() < 0).any())
    throw std::invalid_argument("extract_density: ddag_hat must be nonnegative");
  ExtractResult out;
  out.density = Vec::Zero(ddag_hat.size());
  for (int x = 0; x < ddag_hat.size(); ++x) {
    const double v = w.eval(x) * ddag_hat(x);
    if (v < 0) {
      ++out.negative_clamps;
    } else {
      out.density(x) = v;
    }
  }
  return out;
}

}  // namespace occest
