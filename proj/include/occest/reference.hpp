#pragma once

// Serial reference implementations of the parallel kernels. Tests check the
// production kernels against these, and the benchmark target compares their
// throughput.

#include "occest/dataset.hpp"
#include "occest/mdp.hpp"
#include "occest/spanner.hpp"

namespace occest::reference {

// Literal triple sum over (x, a, x').
Vec bellman_flow(const LowRankMdp& m, int h, const Mat& pibar_level, const Vec& d);

// Sequential episode loop with the same per-episode seed derivation as the
// parallel sampler, so outputs are identical.
LevelBlock sample_level_dataset(const LowRankMdp& m, int h,
                                const std::vector<MarkovPolicy>& rollin_mixture,
                                const Mat& data_policy, int n, uint64_t seed);

// Single-threaded exhaustive subset search.
SpannerResult exact_spanner(const std::vector<Vec>& vectors, double rank_tol = 1e-9);

}  // namespace occest::reference
