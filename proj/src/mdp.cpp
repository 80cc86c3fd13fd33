#include "occest/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "occest/rng.hpp"

namespace occest {

void check_policy(const MarkovPolicy& pi, int num_states, int num_actions, double tol) {
  for (size_t h = 0; h < pi.levels.size(); ++h) {
    const Mat& t = pi.levels[h];
    if (t.rows() != num_states || t.cols() != num_actions)
      throw std::invalid_argument("policy table shape mismatch at level " + std::to_string(h));
    if ((t.array() < -1e-12).any())
      throw std::invalid_argument("negative policy entry at level " + std::to_string(h));
    for (int x = 0; x < num_states; ++x) {
      if (std::abs(t.row(x).sum() - 1.0) > tol)
        throw std::invalid_argument("policy row does not sum to 1 at level " + std::to_string(h) +
                                    ", state " + std::to_string(x));
    }
  }
}

void check_pseudo_policy(const PseudoPolicy& pi, int num_states, int num_actions, double tol) {
  for (size_t h = 0; h < pi.levels.size(); ++h) {
    const Mat& t = pi.levels[h];
    if (t.rows() != num_states || t.cols() != num_actions)
      throw std::invalid_argument("pseudo-policy table shape mismatch at level " +
                                  std::to_string(h));
    if ((t.array() < -1e-12).any())
      throw std::invalid_argument("negative pseudo-policy entry at level " + std::to_string(h));
    for (int x = 0; x < num_states; ++x) {
      if (t.row(x).sum() > 1.0 + tol)
        throw std::invalid_argument("pseudo-policy row exceeds 1 at level " + std::to_string(h) +
                                    ", state " + std::to_string(x));
    }
  }
}

LowRankMdp make_low_rank_mdp(int num_states, int num_actions, int horizon, int rank,
                             std::vector<Mat> phi, std::vector<Mat> mu, Vec init_dist) {
  if (num_states < 1 || num_actions < 1 || horizon < 1 || rank < 1)
    throw std::invalid_argument("MDP dimensions must be positive");
  if (static_cast<int>(phi.size()) != horizon || static_cast<int>(mu.size()) != horizon)
    throw std::invalid_argument("phi/mu must have one entry per level");
  if (init_dist.size() != num_states)
    throw std::invalid_argument("init_dist has wrong length");

  LowRankMdp m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.horizon = horizon;
  m.rank = rank;
  m.phi = std::move(phi);
  m.mu = std::move(mu);
  m.init_dist = std::move(init_dist);

  m.mu_l1_bound = 0;
  for (int h = 0; h < horizon; ++h) {
    if (m.phi[h].rows() != num_states * num_actions || m.phi[h].cols() != rank)
      throw std::invalid_argument("phi shape mismatch at level " + std::to_string(h));
    if (m.mu[h].rows() != num_states || m.mu[h].cols() != rank)
      throw std::invalid_argument("mu shape mismatch at level " + std::to_string(h));
    m.mu_l1_bound = std::max(m.mu_l1_bound, m.mu[h].cwiseAbs().sum());
  }

  m.trans.resize(horizon);
  for (int h = 0; h < horizon; ++h) {
    Mat p = m.phi[h] * m.mu[h].transpose();  // (X*K) x X
    for (int r = 0; r < p.rows(); ++r) {
      for (int c = 0; c < p.cols(); ++c) {
        if (p(r, c) < 0 && p(r, c) >= -1e-12) p(r, c) = 0;
      }
      const double s = p.row(r).sum();
      if (std::abs(s - 1.0) <= 1e-9 && s > 0) p.row(r) /= s;
    }
    m.trans[h] = std::move(p);
  }
  return m;
}

std::vector<std::string> validate_mdp(const LowRankMdp& m) {
  std::vector<std::string> report;
  char buf[160];

  const double init_sum = m.init_dist.sum();
  if ((m.init_dist.array() < -1e-12).any()) report.push_back("init_dist has a negative entry");
  if (std::abs(init_sum - 1.0) > 1e-9) {
    std::snprintf(buf, sizeof(buf), "init_dist sums to %.12g (expected 1)", init_sum);
    report.push_back(buf);
  }

  for (int h = 0; h < m.horizon; ++h) {
    if (m.phi[h].cwiseAbs().maxCoeff() > 1.0 + 1e-9) {
      std::snprintf(buf, sizeof(buf), "phi inf-norm exceeds 1 at level h=%d", h);
      report.push_back(buf);
    }
    for (int x = 0; x < m.num_states; ++x) {
      for (int a = 0; a < m.num_actions; ++a) {
        const Eigen::RowVectorXd row = m.phi[h].row(m.sa_index(x, a)) * m.mu[h].transpose();
        double row_sum = 0;
        for (int xp = 0; xp < m.num_states; ++xp) {
          const double v = row(xp);
          row_sum += v;
          if (v < -1e-12) {
            std::snprintf(buf, sizeof(buf),
                          "negative transition probability %.3e at (h=%d,x=%d,a=%d)->%d", v, h, x,
                          a, xp);
            report.push_back(buf);
          }
        }
        if (std::abs(row_sum - 1.0) > 1e-9) {
          std::snprintf(buf, sizeof(buf), "transition row sums to %.12g at (h=%d,x=%d,a=%d)",
                        row_sum, h, x, a);
          report.push_back(buf);
        }
      }
    }
  }
  return report;
}

Vec bellman_flow_level(const LowRankMdp& m, int h, const Mat& pibar_level, const Vec& d) {
  if (h < 0 || h >= m.horizon) throw std::out_of_range("bellman_flow: level out of range");
  if (d.size() != m.num_states) throw std::invalid_argument("bellman_flow: bad density length");
  if (!d.allFinite()) throw std::invalid_argument("bellman_flow: density not finite");

  const int X = m.num_states;
  const int K = m.num_actions;

  // weight per (x,a) row, then one dot product per destination state
  Vec w(X * K);
  for (int x = 0; x < X; ++x)
    for (int a = 0; a < K; ++a) w(x * K + a) = pibar_level(x, a) * d(x);

  const Mat& P = m.trans[h];
  Vec out(X);
#pragma omp parallel for schedule(static) if (X > 64)
  for (int xp = 0; xp < X; ++xp) out(xp) = P.col(xp).dot(w);
  return out;
}

Vec bellman_flow(const LowRankMdp& m, int h, const PseudoPolicy& pi, const Vec& d) {
  if (h < 0 || h >= static_cast<int>(pi.levels.size()))
    throw std::out_of_range("bellman_flow: level out of range for policy");
  return bellman_flow_level(m, h, pi.levels[h], d);
}

std::vector<Occupancy> exact_occupancies(const LowRankMdp& m, const MarkovPolicy& pi) {
  std::vector<Occupancy> occ(m.horizon);
  occ[0] = {0, m.init_dist};
  for (int h = 1; h < m.horizon; ++h)
    occ[h] = {h, bellman_flow_level(m, h - 1, pi.levels[h - 1], occ[h - 1].values)};
  return occ;
}

std::vector<Occupancy> clipped_occupancies(const LowRankMdp& m, const MarkovPolicy& pi,
                                           const std::vector<Vec>& data_dists,
                                           const std::vector<Mat>& data_policies,
                                           const std::vector<double>& cx,
                                           const std::vector<double>& ca) {
  const int need = m.horizon - 1;
  if (static_cast<int>(cx.size()) < need || static_cast<int>(ca.size()) < need ||
      static_cast<int>(data_dists.size()) < need || static_cast<int>(data_policies.size()) < need)
    throw std::invalid_argument("clipped_occupancies: threshold/data lists shorter than horizon-1");
  for (int h = 0; h < need; ++h)
    if (cx[h] < 0 || ca[h] < 0)
      throw std::invalid_argument("clipped_occupancies: thresholds must be nonnegative");

  std::vector<Occupancy> occ(m.horizon);
  occ[0] = {0, m.init_dist};
  for (int h = 1; h < m.horizon; ++h) {
    const int hp = h - 1;
    const Vec clipped = occ[hp].values.cwiseMin(cx[hp] * data_dists[hp]);
    const Mat pibar = pi.levels[hp].cwiseMin(ca[hp] * data_policies[hp]);
    occ[h] = {h, bellman_flow_level(m, hp, pibar, clipped)};
  }
  return occ;
}

namespace {

std::array<int, 3> sample_one_tuple(const LowRankMdp& m, int h,
                                    const std::vector<MarkovPolicy>& mix, const Mat& data_policy,
                                    Rng& rng) {
  const int comp = mix.size() > 1 ? rng.uniform_int(static_cast<int>(mix.size())) : 0;
  int x = rng.categorical(m.init_dist);
  for (int l = 0; l < h; ++l) {
    const int a = rng.categorical(mix[comp].levels[l].row(x));
    x = rng.categorical(m.trans[l].row(m.sa_index(x, a)));
  }
  const int a = rng.categorical(data_policy.row(x));
  const int xn = rng.categorical(m.trans[h].row(m.sa_index(x, a)));
  return {x, a, xn};
}

}  // namespace

LevelBlock sample_level_dataset(const LowRankMdp& m, int h,
                                const std::vector<MarkovPolicy>& rollin_mixture,
                                const Mat& data_policy, int n, uint64_t seed) {
  if (h < 0 || h >= m.horizon) throw std::out_of_range("sample_level_dataset: level out of range");
  if (n < 1) throw std::invalid_argument("sample_level_dataset: n must be >= 1");
  if (rollin_mixture.empty())
    throw std::invalid_argument("sample_level_dataset: empty roll-in mixture");

  LevelBlock block;
  block.level = h;
  block.data_policy = data_policy;
  block.tuples.resize(n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, 0x74757065ULL, static_cast<uint64_t>(i)));
    block.tuples[i] = sample_one_tuple(m, h, rollin_mixture, data_policy, rng);
  }
  return block;
}

double policy_return_from(const std::vector<Occupancy>& occ, const MarkovPolicy& pi,
                          const RewardFunction& r) {
  double v = 0;
  for (size_t h = 0; h < occ.size(); ++h) {
    const Mat weighted = pi.levels[h].cwiseProduct(r.levels[h]);
    v += occ[h].values.dot(weighted.rowwise().sum());
  }
  return v;
}

double policy_return(const LowRankMdp& m, const MarkovPolicy& pi, const RewardFunction& r) {
  return policy_return_from(exact_occupancies(m, pi), pi, r);
}

}  // namespace occest
