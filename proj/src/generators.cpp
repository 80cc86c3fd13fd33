#include "occest/generators.hpp"

#include <stdexcept>

#include "occest/rng.hpp"

namespace occest {

namespace {

Vec dirichlet(Rng& rng, int n) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.exponential();
  return v / v.sum();
}

std::vector<Mat> random_simplex_mu(Rng& rng, int num_states, int rank, int horizon) {
  std::vector<Mat> mu(horizon);
  for (int h = 0; h < horizon; ++h) {
    mu[h] = Mat(num_states, rank);
    for (int j = 0; j < rank; ++j) mu[h].col(j) = dirichlet(rng, num_states);
  }
  return mu;
}

}  // namespace

LowRankMdp generate_random_lowrank_mdp(const MdpGenParams& p) {
  if (p.rank > p.num_states)
    throw std::invalid_argument("generate_random_lowrank_mdp: rank must be <= num_states");
  if (p.feature_style != "simplex" && p.feature_style != "identity")
    throw std::invalid_argument("generate_random_lowrank_mdp: unknown feature style '" +
                                p.feature_style + "'");
  if (p.feature_style == "identity" && p.rank != p.num_states)
    throw std::invalid_argument("identity features require rank == num_states");

  Rng rng(mix_seed(p.seed, 0x6d647047ULL));
  std::vector<Mat> mu;
  if (p.feature_style == "identity") {
    mu.assign(p.horizon, Mat::Identity(p.num_states, p.rank));
  } else {
    mu = random_simplex_mu(rng, p.num_states, p.rank, p.horizon);
  }
  std::vector<Mat> phi(p.horizon);
  for (int h = 0; h < p.horizon; ++h) {
    phi[h] = Mat(p.num_states * p.num_actions, p.rank);
    for (int r = 0; r < phi[h].rows(); ++r) phi[h].row(r) = dirichlet(rng, p.rank).transpose();
  }
  Vec init;
  if (p.init_style == "uniform") {
    init = Vec::Constant(p.num_states, 1.0 / p.num_states);
  } else {
    init = dirichlet(rng, p.num_states);
  }
  return make_low_rank_mdp(p.num_states, p.num_actions, p.horizon, p.rank, std::move(phi),
                           std::move(mu), std::move(init));
}

std::vector<MarkovPolicy> generate_policy_class(const PolicyGenParams& p, const LowRankMdp& m) {
  if (p.count < 1) throw std::invalid_argument("generate_policy_class: count must be >= 1");
  Rng rng(mix_seed(p.seed, 0x706f6cULL));
  const int X = m.num_states;
  const int K = m.num_actions;
  const int H = m.horizon;
  const int num_det = static_cast<int>(p.det_fraction * p.count + 0.5);

  std::vector<MarkovPolicy> out;
  out.reserve(p.count);
  for (int i = 0; i < p.count; ++i) {
    MarkovPolicy pi;
    pi.levels.assign(H, Mat::Zero(X, K));
    const bool deterministic = i < num_det;
    for (int h = 0; h < H; ++h) {
      for (int x = 0; x < X; ++x) {
        if (deterministic) {
          pi.levels[h](x, rng.uniform_int(K)) = 1.0;
        } else {
          Vec logits(K);
          for (int a = 0; a < K; ++a) logits(a) = rng.normal();
          Vec w = (logits.array() - logits.maxCoeff()).exp();
          pi.levels[h].row(x) = (w / w.sum()).transpose();
        }
      }
    }
    out.push_back(std::move(pi));
  }

  // Guarantee one deterministic pair with disjoint greedy actions.
  if (K >= 2 && p.count >= 2) {
    for (int h = 0; h < H; ++h) {
      out[0].levels[h].setZero();
      out[1].levels[h].setZero();
      for (int x = 0; x < X; ++x) {
        const int a = rng.uniform_int(K);
        out[0].levels[h](x, a) = 1.0;
        out[1].levels[h](x, (a + 1) % K) = 1.0;
      }
    }
  }
  return out;
}

FeatureCandidateSet generate_feature_candidates(const LowRankMdp& m, int num_decoys,
                                                uint64_t seed) {
  FeatureCandidateSet set;
  set.truth_index = 0;
  set.levels.resize(m.horizon);
  Rng rng(mix_seed(seed, 0xFEA7ULL));
  std::vector<std::vector<Mat>> decoys(num_decoys);
  for (int k = 0; k < num_decoys; ++k)
    decoys[k] = random_simplex_mu(rng, m.num_states, m.rank, m.horizon);
  for (int h = 0; h < m.horizon; ++h) {
    set.levels[h].push_back(m.mu[h]);
    for (int k = 0; k < num_decoys; ++k) set.levels[h].push_back(decoys[k][h]);
  }
  return set;
}

RewardFunction generate_random_rewards(int num_states, int num_actions, int horizon,
                                       uint64_t seed) {
  Rng rng(mix_seed(seed, 0x72657761ULL));
  RewardFunction r;
  r.levels.resize(horizon);
  for (int h = 0; h < horizon; ++h) {
    r.levels[h] = Mat(num_states, num_actions);
    for (int x = 0; x < num_states; ++x)
      for (int a = 0; a < num_actions; ++a) r.levels[h](x, a) = rng.uniform();
  }
  return r;
}

LowRankMdp desk_instance() {
  MdpGenParams p;
  p.num_states = 9;
  p.num_actions = 2;
  p.horizon = 4;
  p.rank = 3;
  p.seed = 20240ULL;
  return generate_random_lowrank_mdp(p);
}

std::vector<MarkovPolicy> desk_policy_class(const LowRankMdp& m) {
  PolicyGenParams p;
  p.count = 8;
  p.det_fraction = 0.5;
  p.seed = 31ULL;
  return generate_policy_class(p, m);
}

}  // namespace occest
