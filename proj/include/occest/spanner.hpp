#pragma once

#include <vector>

#include "occest/types.hpp"

namespace occest {

struct SpannerResult {
  std::vector<int> indices;   // selected members, at most the set's rank
  double coefficient_bound;   // certified bound C on expansion coefficients
  Mat coefficients;           // N x |indices|: expansion of each input member
  double volume = 0;          // |det(B B^T)|^(1/2) of the selected rows
  int swaps = 0;              // approximate variant only
};

// Volume-maximizing subset of size min(|set|, effective rank) by exhaustive
// search; every member then expands over it with coefficients in [-1, 1].
// Refuses sets larger than 20 (use approx_spanner).
SpannerResult exact_spanner(const std::vector<Vec>& vectors, double rank_tol = 1e-9);

// Awerbuch-Kleinberg style swap algorithm: greedily build a basis, then swap
// in any member whose expansion coefficient exceeds C until none does. Each
// swap grows the volume by a factor > C, which bounds the number of swaps.
SpannerResult approx_spanner(const std::vector<Vec>& vectors, double C = 2.0,
                             double rank_tol = 1e-9);

// max over the given occupancies of max_x d(x)/reference(x), with 0/0 = 0 and
// +infinity when some d(x) > 0 where the reference vanishes.
double concentrability_coefficient(const std::vector<Vec>& occupancies, const Vec& reference);

}  // namespace occest
