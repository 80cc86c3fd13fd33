// Throughput comparison of the OpenMP kernels against their serial reference
// implementations, with an output check on each pair.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "occest/generators.hpp"
#include "occest/reference.hpp"
#include "occest/rng.hpp"
#include "occest/spanner.hpp"

using namespace occest;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* kernel, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-22s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   max|diff| %.3g\n",
              kernel, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  // Bellman flow on a large dense instance.
  {
    MdpGenParams p;
    p.num_states = 600;
    p.num_actions = 4;
    p.horizon = 2;
    p.rank = 24;
    p.seed = 99;
    const LowRankMdp m = generate_random_lowrank_mdp(p);
    const Mat pibar = Mat::Constant(p.num_states, p.num_actions, 1.0 / p.num_actions);
    Rng rng(7);
    Vec d(p.num_states);
    for (int x = 0; x < p.num_states; ++x) d(x) = rng.exponential();
    d /= d.sum();

    auto t0 = std::chrono::steady_clock::now();
    Vec serial;
    for (int rep = 0; rep < 20; ++rep) serial = reference::bellman_flow(m, 0, pibar, d);
    const double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    Vec parallel;
    for (int rep = 0; rep < 20; ++rep) parallel = bellman_flow_level(m, 0, pibar, d);
    const double parallel_ms = ms_since(t0);
    report("bellman_flow", serial_ms, parallel_ms, (serial - parallel).cwiseAbs().maxCoeff());
  }

  // Tuple sampling.
  {
    MdpGenParams p;
    p.num_states = 40;
    p.num_actions = 4;
    p.horizon = 6;
    p.rank = 8;
    p.seed = 41;
    const LowRankMdp m = generate_random_lowrank_mdp(p);
    const MarkovPolicy unif = uniform_policy(p.num_states, p.num_actions, p.horizon);
    const Mat data_policy = Mat::Constant(p.num_states, p.num_actions, 1.0 / p.num_actions);
    const int n = 400000;

    auto t0 = std::chrono::steady_clock::now();
    const LevelBlock serial = reference::sample_level_dataset(m, 4, {unif}, data_policy, n, 3);
    const double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const LevelBlock parallel = sample_level_dataset(m, 4, {unif}, data_policy, n, 3);
    const double parallel_ms = ms_since(t0);
    int diff = 0;
    for (int i = 0; i < n; ++i)
      if (serial.tuples[i] != parallel.tuples[i]) ++diff;
    report("sample_level_dataset", serial_ms, parallel_ms, static_cast<double>(diff));
  }

  // Exhaustive spanner search.
  {
    Rng rng(123);
    const int N = 19, X = 60, r = 8;
    Mat basis(r, X);
    for (int i = 0; i < r; ++i)
      for (int x = 0; x < X; ++x) basis(i, x) = rng.normal();
    std::vector<Vec> vecs(N);
    for (int i = 0; i < N; ++i) {
      Vec coef(r);
      for (int j = 0; j < r; ++j) coef(j) = rng.normal();
      vecs[i] = basis.transpose() * coef;
    }

    auto t0 = std::chrono::steady_clock::now();
    const SpannerResult serial = reference::exact_spanner(vecs);
    const double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const SpannerResult parallel = exact_spanner(vecs);
    const double parallel_ms = ms_since(t0);
    double diff = std::abs(serial.volume - parallel.volume);
    for (size_t i = 0; i < serial.indices.size(); ++i)
      diff += std::abs(serial.indices[i] - parallel.indices[i]);
    report("exact_spanner", serial_ms, parallel_ms, diff);
  }

  return 0;
}
