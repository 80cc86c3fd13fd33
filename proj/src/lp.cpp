#include "occest/lp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace occest {

namespace {

constexpr double kPivotEps = 1e-9;

// Runs simplex iterations on an explicit tableau. T has m+1 rows: the last
// row is the (negated-objective) cost row. basis[i] is the variable basic in
// row i. Returns false on iteration limit.
bool simplex_iterate(Mat& T, std::vector<int>& basis, int num_vars, int max_iters,
                     bool* unbounded) {
  const int m = static_cast<int>(T.rows()) - 1;
  *unbounded = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    // Bland: entering variable is the lowest index with negative reduced cost
    int enter = -1;
    for (int j = 0; j < num_vars; ++j) {
      if (T(m, j) < -kPivotEps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;  // optimal

    int leave = -1;
    double best_ratio = 0;
    for (int i = 0; i < m; ++i) {
      if (T(i, enter) > kPivotEps) {
        const double ratio = T(i, num_vars) / T(i, enter);
        if (leave < 0 || ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) {
      *unbounded = true;
      return true;
    }

    // pivot
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = T(i, enter);
      if (f != 0) T.row(i) -= f * T.row(leave);
    }
    basis[leave] = enter;
  }
  return false;
}

}  // namespace

LpResult solve_standard_lp(const Mat& A_in, const Vec& b_in, const Vec& c, int max_iters) {
  const int m = static_cast<int>(A_in.rows());
  const int n = static_cast<int>(A_in.cols());
  Mat A = A_in;
  Vec b = b_in;
  for (int i = 0; i < m; ++i) {
    if (b(i) < 0) {
      A.row(i) *= -1;
      b(i) = -b(i);
    }
  }

  // Phase 1: minimize the sum of artificial variables.
  const int total = n + m;
  Mat T = Mat::Zero(m + 1, total + 1);
  T.block(0, 0, m, n) = A;
  T.block(0, n, m, m) = Mat::Identity(m, m);
  T.col(total).head(m) = b;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;
  // cost row: sum of artificials, expressed in terms of nonbasic variables
  for (int j = 0; j < n; ++j) T(m, j) = -A.col(j).sum();
  T(m, total) = -b.sum();

  bool unbounded = false;
  if (!simplex_iterate(T, basis, total, max_iters, &unbounded))
    return {LpStatus::IterationLimit, Vec::Zero(n), 0};
  const double phase1 = -T(m, total);
  if (phase1 > 1e-7) return {LpStatus::Infeasible, Vec::Zero(n), 0};

  // Drive leftover artificials out of the basis where possible.
  for (int i = 0; i < m; ++i) {
    if (basis[i] >= n) {
      int enter = -1;
      for (int j = 0; j < n; ++j) {
        if (std::abs(T(i, j)) > kPivotEps) {
          enter = j;
          break;
        }
      }
      if (enter >= 0) {
        T.row(i) /= T(i, enter);
        for (int r = 0; r <= m; ++r) {
          if (r == i) continue;
          const double f = T(r, enter);
          if (f != 0) T.row(r) -= f * T.row(i);
        }
        basis[i] = enter;
      }
      // otherwise the row is redundant; leaving the artificial at zero is fine
    }
  }

  // Phase 2: original objective on the working columns only.
  Mat T2 = Mat::Zero(m + 1, n + 1);
  T2.block(0, 0, m, n) = T.block(0, 0, m, n);
  T2.col(n).head(m) = T.col(total).head(m);
  for (int j = 0; j < n; ++j) T2(m, j) = c(j);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n && T2(m, basis[i]) != 0) T2.row(m) -= T2(m, basis[i]) * T2.row(i);
  }

  if (!simplex_iterate(T2, basis, n, max_iters, &unbounded))
    return {LpStatus::IterationLimit, Vec::Zero(n), 0};
  if (unbounded) return {LpStatus::Unbounded, Vec::Zero(n), 0};

  Vec x = Vec::Zero(n);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) x(basis[i]) = T2(i, n);
  }
  return {LpStatus::Optimal, x, c.dot(x)};
}

namespace {

// Standard-form encoding of min 1't, t >= |M theta - y|, with theta = tp - tm.
// Column layout: [tp(k) tm(k) t(X) s1(X) s2(X) extra...]. Optionally adds a
// residual-budget row (sum t + slack = budget) and box rows tp_j + u_j = B,
// tm_j + v_j = B used by the face-centering passes.
struct EpigraphLp {
  Mat A;
  Vec b;
  int k, X, cols;

  EpigraphLp(const Mat& M, const Vec& y, bool with_budget, double budget, double box) {
    k = static_cast<int>(M.cols());
    X = static_cast<int>(M.rows());
    const int rows = 2 * X + (with_budget ? 1 + 2 * k : 0);
    cols = 2 * k + 3 * X + (with_budget ? 1 + 2 * k : 0);
    A = Mat::Zero(rows, cols);
    b = Vec::Zero(rows);
    //  M tp - M tm - t + s1 = y
    // -M tp + M tm - t + s2 = -y
    A.block(0, 0, X, k) = M;
    A.block(0, k, X, k) = -M;
    A.block(X, 0, X, k) = -M;
    A.block(X, k, X, k) = M;
    A.block(0, 2 * k, X, X) = -Mat::Identity(X, X);
    A.block(X, 2 * k, X, X) = -Mat::Identity(X, X);
    A.block(0, 2 * k + X, X, X) = Mat::Identity(X, X);
    A.block(X, 2 * k + 2 * X, X, X) = Mat::Identity(X, X);
    b.head(X) = y;
    b.segment(X, X) = -y;
    if (with_budget) {
      const int r0 = 2 * X;
      const int c0 = 2 * k + 3 * X;
      for (int x = 0; x < X; ++x) A(r0, 2 * k + x) = 1.0;
      A(r0, c0) = 1.0;
      b(r0) = budget;
      for (int j = 0; j < k; ++j) {
        A(r0 + 1 + j, j) = 1.0;
        A(r0 + 1 + j, c0 + 1 + j) = 1.0;
        b(r0 + 1 + j) = box;
        A(r0 + 1 + k + j, k + j) = 1.0;
        A(r0 + 1 + k + j, c0 + 1 + k + j) = 1.0;
        b(r0 + 1 + k + j) = box;
      }
    }
  }

  Vec theta_of(const Vec& x) const { return x.head(k) - x.segment(k, k); }
};

}  // namespace

L1FitResult l1_fit(const Mat& M, const Vec& y) {
  if (M.rows() != y.size()) throw std::invalid_argument("l1_fit: dimension mismatch");
  const int k = static_cast<int>(M.cols());

  EpigraphLp lp(M, y, false, 0, 0);
  Vec c = Vec::Zero(lp.cols);
  c.segment(2 * k, lp.X).setOnes();
  LpResult primary = solve_standard_lp(lp.A, lp.b, c);
  if (primary.status != LpStatus::Optimal)
    throw std::runtime_error("l1_fit: epigraph LP did not solve to optimality");
  const double rstar = primary.objective;
  Vec theta = lp.theta_of(primary.x);

  // Center degenerate ties: constrain the residual to the optimum and take
  // the midpoint between the min- and max-coefficient-sum optimal solutions.
  // An essentially-zero optimum needs no centering.
  if (rstar <= 1e-12) {
    L1FitResult out;
    out.theta = theta;
    out.fitted = M * theta;
    out.residual = (out.fitted - y).lpNorm<1>();
    return out;
  }
  const double budget = rstar * (1.0 + 1e-9) + 1e-12;
  const double box = 1e6 + 10.0 * theta.cwiseAbs().maxCoeff();
  EpigraphLp lpc(M, y, true, budget, box);
  Vec cdir = Vec::Zero(lpc.cols);
  cdir.head(k).setOnes();
  cdir.segment(k, k) = -Vec::Ones(k);
  LpResult lo = solve_standard_lp(lpc.A, lpc.b, cdir);
  LpResult hi = solve_standard_lp(lpc.A, lpc.b, Vec(-cdir));
  if (lo.status == LpStatus::Optimal && hi.status == LpStatus::Optimal)
    theta = 0.5 * (lpc.theta_of(lo.x) + lpc.theta_of(hi.x));

  L1FitResult out;
  out.theta = theta;
  out.fitted = M * theta;
  out.residual = (out.fitted - y).lpNorm<1>();
  return out;
}

}  // namespace occest
