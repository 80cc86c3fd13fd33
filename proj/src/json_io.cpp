#include "occest/json_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace occest {

using nlohmann::json;

nlohmann::json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vec vec_from_json(const json& j) {
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << contents;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_mdp_json(const LowRankMdp& m, const std::string& path) {
  json j;
  j["num_states"] = m.num_states;
  j["num_actions"] = m.num_actions;
  j["horizon"] = m.horizon;
  j["rank"] = m.rank;
  json phi = json::array();
  for (int h = 0; h < m.horizon; ++h) {
    json lv = json::array();
    for (int x = 0; x < m.num_states; ++x) {
      json per_state = json::array();
      for (int a = 0; a < m.num_actions; ++a)
        per_state.push_back(vec_to_json(m.phi[h].row(m.sa_index(x, a)).transpose()));
      lv.push_back(per_state);
    }
    phi.push_back(lv);
  }
  j["phi"] = phi;
  json mu = json::array();
  for (int h = 0; h < m.horizon; ++h) {
    json lv = json::array();
    for (int x = 0; x < m.num_states; ++x) lv.push_back(vec_to_json(m.mu[h].row(x).transpose()));
    mu.push_back(lv);
  }
  j["mu"] = mu;
  j["init_dist"] = vec_to_json(m.init_dist);
  write_text_file(path, j.dump(2) + "\n");
}

LowRankMdp load_mdp_json(const std::string& path) {
  json j = json::parse(read_text_file(path));
  const int X = j.at("num_states");
  const int K = j.at("num_actions");
  const int H = j.at("horizon");
  const int d = j.at("rank");
  std::vector<Mat> phi(H), mu(H);
  for (int h = 0; h < H; ++h) {
    phi[h] = Mat(X * K, d);
    for (int x = 0; x < X; ++x)
      for (int a = 0; a < K; ++a)
        phi[h].row(x * K + a) = vec_from_json(j.at("phi")[h][x][a]).transpose();
    mu[h] = Mat(X, d);
    for (int x = 0; x < X; ++x) mu[h].row(x) = vec_from_json(j.at("mu")[h][x]).transpose();
  }
  return make_low_rank_mdp(X, K, H, d, std::move(phi), std::move(mu),
                           vec_from_json(j.at("init_dist")));
}

void save_policies_json(const std::vector<MarkovPolicy>& policies, const std::string& path) {
  json j;
  json arr = json::array();
  for (const MarkovPolicy& pi : policies) {
    json pol = json::array();
    for (const Mat& level : pi.levels) {
      json lv = json::array();
      for (int x = 0; x < level.rows(); ++x) lv.push_back(vec_to_json(level.row(x).transpose()));
      pol.push_back(lv);
    }
    arr.push_back(pol);
  }
  j["policies"] = arr;
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<MarkovPolicy> load_policies_json(const std::string& path, int num_states,
                                             int num_actions) {
  json j = json::parse(read_text_file(path));
  std::vector<MarkovPolicy> out;
  for (const auto& pol : j.at("policies")) {
    MarkovPolicy pi;
    for (const auto& lv : pol) {
      Mat level(num_states, num_actions);
      for (int x = 0; x < num_states; ++x) level.row(x) = vec_from_json(lv[x]).transpose();
      pi.levels.push_back(level);
    }
    check_policy(pi, num_states, num_actions);
    out.push_back(std::move(pi));
  }
  return out;
}

void save_rewards_json(const RewardFunction& r, const std::string& path) {
  json arr = json::array();
  for (const Mat& level : r.levels) {
    json lv = json::array();
    for (int x = 0; x < level.rows(); ++x) lv.push_back(vec_to_json(level.row(x).transpose()));
    arr.push_back(lv);
  }
  write_text_file(path, json{{"rewards", arr}}.dump(2) + "\n");
}

RewardFunction load_rewards_json(const std::string& path, int num_states, int num_actions) {
  json j = json::parse(read_text_file(path));
  RewardFunction r;
  for (const auto& lv : j.at("rewards")) {
    Mat level(num_states, num_actions);
    for (int x = 0; x < num_states; ++x) level.row(x) = vec_from_json(lv[x]).transpose();
    if (level.minCoeff() < 0 || level.maxCoeff() > 1)
      throw std::runtime_error("rewards must lie in [0,1]");
    r.levels.push_back(level);
  }
  return r;
}

void save_candidates_json(const FeatureCandidateSet& set, const std::string& path) {
  json levels = json::array();
  for (const auto& cands : set.levels) {
    json per_level;
    json list = json::array();
    for (const Mat& mu : cands) {
      json rows = json::array();
      for (int x = 0; x < mu.rows(); ++x) rows.push_back(vec_to_json(mu.row(x).transpose()));
      list.push_back(rows);
    }
    per_level["candidates"] = list;
    levels.push_back(per_level);
  }
  json j{{"levels", levels}};
  if (set.truth_index) j["truth_index"] = *set.truth_index;
  write_text_file(path, j.dump(2) + "\n");
}

FeatureCandidateSet load_candidates_json(const std::string& path) {
  json j = json::parse(read_text_file(path));
  FeatureCandidateSet set;
  if (j.contains("truth_index")) set.truth_index = j["truth_index"].get<int>();
  for (const auto& per_level : j.at("levels")) {
    std::vector<Mat> cands;
    for (const auto& rows : per_level.at("candidates")) {
      const int X = static_cast<int>(rows.size());
      const int d = static_cast<int>(rows[0].size());
      Mat mu(X, d);
      for (int x = 0; x < X; ++x) mu.row(x) = vec_from_json(rows[x]).transpose();
      cands.push_back(std::move(mu));
    }
    set.levels.push_back(std::move(cands));
  }
  return set;
}

Vec load_target_json(const std::string& path) {
  json j = json::parse(read_text_file(path));
  return vec_from_json(j.at("target"));
}

json forc_output_to_json(const ForcOutput& out, int policy_id) {
  json j;
  j["policy_id"] = policy_id;
  json levels = json::array();
  for (size_t h = 0; h < out.estimates.size(); ++h) {
    json lv;
    lv["h"] = static_cast<int>(h);
    lv["d_hat"] = vec_to_json(out.estimates[h].values);
    if (h >= 1 && h - 1 < out.diags.size()) {
      const ForcLevelDiag& d = out.diags[h - 1];
      lv["clipped_mass"] = d.clipped_mass;
      lv["negative_clamps"] = d.negative_clamps;
      lv["fit_loss"] = d.fit_loss;
      if (d.candidate >= 0) lv["candidate"] = d.candidate;
      if (d.mle_err_dD >= 0) lv["mle_err"] = d.mle_err_dD;
      if (d.mle_err_ddag >= 0) lv["mle_err_next"] = d.mle_err_ddag;
      if (d.reg_slack >= 0) lv["reg_slack"] = d.reg_slack;
    }
    levels.push_back(lv);
  }
  j["per_level"] = levels;
  return j;
}

json force_trace_to_json(const ForceResult& run, bool include_tuples) {
  json j;
  j["deployments"] = run.deployments;
  json levels = json::array();
  for (const ForceLevelTrace& tr : run.trace) {
    json lv;
    lv["h"] = tr.level;
    lv["expl"] = tr.expl;
    lv["spanner_volume"] = tr.spanner.volume;
    lv["spanner_coefficient_bound"] = tr.spanner.coefficient_bound;
    lv["dD_hat"] = vec_to_json(tr.dD_hat);
    lv["ddag_hat"] = vec_to_json(tr.ddag_hat);
    if (tr.mle_candidate >= 0) lv["mle_candidate"] = tr.mle_candidate;
    if (tr.linearize_candidate >= 0) lv["linearize_candidate"] = tr.linearize_candidate;
    lv["lp_residuals"] = tr.lp_residuals;
    json tilde = json::array();
    for (const Vec& v : tr.d_tilde) tilde.push_back(vec_to_json(v));
    lv["d_tilde"] = tilde;
    lv["n_tuples"] = tr.block.size();
    if (include_tuples) {
      json tuples = json::array();
      for (const auto& t : tr.block.tuples) tuples.push_back({t[0], t[1], t[2]});
      lv["tuples"] = tuples;
    }
    levels.push_back(lv);
  }
  j["levels"] = levels;
  return j;
}

}  // namespace occest
