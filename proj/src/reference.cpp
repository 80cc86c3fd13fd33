#include "occest/reference.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "occest/rng.hpp"

namespace occest::reference {

Vec bellman_flow(const LowRankMdp& m, int h, const Mat& pibar_level, const Vec& d) {
  if (h < 0 || h >= m.horizon) throw std::out_of_range("reference flow: level out of range");
  Vec out = Vec::Zero(m.num_states);
  for (int xp = 0; xp < m.num_states; ++xp) {
    double acc = 0;
    for (int x = 0; x < m.num_states; ++x)
      for (int a = 0; a < m.num_actions; ++a)
        acc += m.trans[h](m.sa_index(x, a), xp) * pibar_level(x, a) * d(x);
    out(xp) = acc;
  }
  return out;
}

LevelBlock sample_level_dataset(const LowRankMdp& m, int h,
                                const std::vector<MarkovPolicy>& rollin_mixture,
                                const Mat& data_policy, int n, uint64_t seed) {
  LevelBlock block;
  block.level = h;
  block.data_policy = data_policy;
  block.tuples.resize(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, 0x74757065ULL, static_cast<uint64_t>(i)));
    const int comp =
        rollin_mixture.size() > 1 ? rng.uniform_int(static_cast<int>(rollin_mixture.size())) : 0;
    int x = rng.categorical(m.init_dist);
    for (int l = 0; l < h; ++l) {
      const int a = rng.categorical(rollin_mixture[comp].levels[l].row(x));
      x = rng.categorical(m.trans[l].row(m.sa_index(x, a)));
    }
    const int a = rng.categorical(data_policy.row(x));
    const int xn = rng.categorical(m.trans[h].row(m.sa_index(x, a)));
    block.tuples[i] = {x, a, xn};
  }
  return block;
}

namespace {

void next_combination(std::vector<int>& comb, int n) {
  const int r = static_cast<int>(comb.size());
  int i = r - 1;
  while (i >= 0 && comb[i] == n - r + i) --i;
  if (i < 0) {
    comb.clear();
    return;
  }
  ++comb[i];
  for (int j = i + 1; j < r; ++j) comb[j] = comb[j - 1] + 1;
}

}  // namespace

SpannerResult exact_spanner(const std::vector<Vec>& vectors, double rank_tol) {
  if (vectors.empty()) throw std::invalid_argument("reference spanner: empty set");
  const int N = static_cast<int>(vectors.size());
  const int X = static_cast<int>(vectors[0].size());
  Mat V(N, X);
  for (int i = 0; i < N; ++i) V.row(i) = vectors[i].transpose();
  Eigen::JacobiSVD<Mat> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  int r = 0;
  if (svd.singularValues().size() > 0 && svd.singularValues()(0) > 0)
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > rank_tol * svd.singularValues()(0)) ++r;
  const Mat coords = V * svd.matrixV().leftCols(r);

  SpannerResult res;
  res.coefficient_bound = 1.0;
  if (r == 0) {
    res.coefficients = Mat::Zero(N, 0);
    return res;
  }

  std::vector<int> comb(r), best;
  for (int i = 0; i < r; ++i) comb[i] = i;
  double best_vol = -1;
  while (!comb.empty()) {
    Mat B(r, r);
    for (int i = 0; i < r; ++i) B.row(i) = coords.row(comb[i]);
    const double vol = std::abs(B.determinant());
    if (vol > best_vol) {
      best_vol = vol;
      best = comb;
    }
    next_combination(comb, N);
  }

  Mat B(r, r);
  for (int i = 0; i < r; ++i) B.row(i) = coords.row(best[i]);
  Eigen::PartialPivLU<Mat> lu(B.transpose());
  res.indices = best;
  res.volume = best_vol;
  res.coefficients = Mat(N, r);
  for (int i = 0; i < N; ++i)
    res.coefficients.row(i) = lu.solve(coords.row(i).transpose()).transpose();
  return res;
}

}  // namespace occest::reference
