#pragma once

#include "occest/types.hpp"

namespace occest {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::Optimal;
  Vec x;
  double objective = 0;
};

// Minimize c'x subject to Ax = b, x >= 0. Dense two-phase simplex with
// Bland's rule. Intended for the small problems that arise here (a few dozen
// rows); not a general-purpose solver.
LpResult solve_standard_lp(const Mat& A, const Vec& b, const Vec& c, int max_iters = 50000);

struct L1FitResult {
  Vec theta;
  Vec fitted;       // M * theta
  double residual;  // ||M*theta - y||_1, optimal
};

// argmin_theta ||M*theta - y||_1 via the epigraph linear program. Among
// optimal solutions the midpoint of the two coefficient-sum extremes is
// returned, so degenerate ties resolve to the center of the optimal face.
L1FitResult l1_fit(const Mat& M, const Vec& y);

}  // namespace occest
