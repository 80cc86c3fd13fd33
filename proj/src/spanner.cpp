#include "occest/spanner.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace occest {

namespace {

// Rank-revealing reduction: every vector is expressed in an orthonormal basis
// of the set's span, so subset volumes become plain determinants.
struct Reduced {
  Mat coords;  // N x r
  int rank = 0;
};

Reduced reduce(const std::vector<Vec>& vectors, double rank_tol) {
  if (vectors.empty()) throw std::invalid_argument("spanner: empty vector set");
  const int N = static_cast<int>(vectors.size());
  const int X = static_cast<int>(vectors[0].size());
  Mat V(N, X);
  for (int i = 0; i < N; ++i) {
    if (vectors[i].size() != X) throw std::invalid_argument("spanner: ragged vector set");
    V.row(i) = vectors[i].transpose();
  }
  Eigen::JacobiSVD<Mat> svd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  int r = 0;
  if (sv.size() > 0 && sv(0) > 0) {
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > rank_tol * sv(0)) ++r;
  }
  Reduced red;
  red.rank = r;
  red.coords = V * svd.matrixV().leftCols(r);
  return red;
}

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

long long count_combinations(int n, int r) {
  long long c = 1;
  for (int i = 0; i < r; ++i) c = c * (n - i) / (i + 1);
  return c;
}

Mat rows_of(const Mat& coords, const std::vector<int>& idx) {
  Mat B(static_cast<int>(idx.size()), coords.cols());
  for (size_t i = 0; i < idx.size(); ++i) B.row(static_cast<int>(i)) = coords.row(idx[i]);
  return B;
}

// Least-squares expansion of every member over the selected rows.
Mat expansion_coefficients(const Mat& coords, const std::vector<int>& idx) {
  const Mat B = rows_of(coords, idx);  // m x r
  Mat G = B * B.transpose();
  Eigen::LDLT<Mat> fac(G);
  Mat coef(coords.rows(), idx.size());
  for (int i = 0; i < coords.rows(); ++i)
    coef.row(i) = fac.solve(B * coords.row(i).transpose()).transpose();
  return coef;
}

SpannerResult finish(const Mat& coords, std::vector<int> idx, double bound, double volume,
                     int swaps) {
  SpannerResult res;
  res.coefficients = expansion_coefficients(coords, idx);
  res.indices = std::move(idx);
  res.coefficient_bound = bound;
  res.volume = volume;
  res.swaps = swaps;
  return res;
}

}  // namespace

SpannerResult exact_spanner(const std::vector<Vec>& vectors, double rank_tol) {
  const int N = static_cast<int>(vectors.size());
  if (N > 20)
    throw std::invalid_argument(
        "exact_spanner: set too large for exhaustive search, use approx_spanner");
  const Reduced red = reduce(vectors, rank_tol);
  const int r = red.rank;
  if (r == 0) {
    SpannerResult res;
    res.coefficient_bound = 1.0;
    res.coefficients = Mat::Zero(N, 0);
    return res;
  }

  const long long total = count_combinations(N, r);
  std::vector<double> volumes(static_cast<size_t>(total));
  std::vector<std::vector<int>> combos(static_cast<size_t>(total));
  {
    std::vector<int> comb(r);
    for (int i = 0; i < r; ++i) comb[i] = i;
    for (long long k = 0; k < total; ++k) {
      combos[static_cast<size_t>(k)] = comb;
      next_combination(comb, N);
    }
  }
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < total; ++k)
    volumes[static_cast<size_t>(k)] =
        std::abs(rows_of(red.coords, combos[static_cast<size_t>(k)]).determinant());

  long long best = 0;
  for (long long k = 1; k < total; ++k)
    if (volumes[static_cast<size_t>(k)] > volumes[static_cast<size_t>(best)]) best = k;

  return finish(red.coords, combos[static_cast<size_t>(best)], 1.0,
                volumes[static_cast<size_t>(best)], 0);
}

SpannerResult approx_spanner(const std::vector<Vec>& vectors, double C, double rank_tol) {
  if (C <= 1.0) throw std::invalid_argument("approx_spanner: C must be > 1");
  const Reduced red = reduce(vectors, rank_tol);
  const int N = static_cast<int>(vectors.size());
  const int r = red.rank;
  if (r == 0) {
    SpannerResult res;
    res.coefficient_bound = C;
    res.coefficients = Mat::Zero(N, 0);
    return res;
  }

  // Greedy basis: start from the identity and replace one row at a time by
  // the member maximizing the determinant magnitude.
  Mat B = Mat::Identity(r, r);
  std::vector<int> idx(r, -1);
  for (int row = 0; row < r; ++row) {
    double best_vol = -1;
    int best_i = 0;
    for (int i = 0; i < N; ++i) {
      Mat tmp = B;
      tmp.row(row) = red.coords.row(i);
      const double vol = std::abs(tmp.determinant());
      if (vol > best_vol) {
        best_vol = vol;
        best_i = i;
      }
    }
    B.row(row) = red.coords.row(best_i);
    idx[row] = best_i;
  }

  const int max_swaps =
      static_cast<int>(10.0 * r * r * std::log(std::max(2.0, static_cast<double>(r))) /
                       std::log(C)) +
      10;
  int swaps = 0;
  while (true) {
    bool swapped = false;
    for (int i = 0; i < N && !swapped; ++i) {
      const Vec c = B.transpose().partialPivLu().solve(red.coords.row(i).transpose());
      int j_best = -1;
      double c_best = C;
      for (int j = 0; j < r; ++j) {
        if (std::abs(c(j)) > c_best) {
          c_best = std::abs(c(j));
          j_best = j;
        }
      }
      if (j_best >= 0) {
        B.row(j_best) = red.coords.row(i);
        idx[j_best] = i;
        swapped = true;
        if (++swaps > max_swaps)
          throw std::runtime_error(
              "approx_spanner: swap limit exceeded (numerical rank trouble?)");
      }
    }
    if (!swapped) break;
  }

  return finish(red.coords, idx, C, std::abs(B.determinant()), swaps);
}

double concentrability_coefficient(const std::vector<Vec>& occupancies, const Vec& reference) {
  if ((reference.array() < 0).any())
    throw std::invalid_argument("concentrability: reference must be nonnegative");
  double cc = 0;
  for (const Vec& d : occupancies) {
    for (int x = 0; x < d.size(); ++x) {
      if (reference(x) <= 0) {
        if (d(x) > 0) return std::numeric_limits<double>::infinity();
      } else {
        cc = std::max(cc, d(x) / reference(x));
      }
    }
  }
  return cc;
}

}  // namespace occest
