#include "occest/dataset.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "occest/rng.hpp"

namespace occest {

using nlohmann::json;

void LevelBlock::split(int n_mle, int n_reg, uint64_t seed) {
  if (n_mle < 1 || n_reg < 1) throw std::invalid_argument("split sizes must be >= 1");
  if (n_mle + n_reg > size())
    throw std::invalid_argument("split sizes exceed block size at level " + std::to_string(level));
  std::vector<int> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0x73706c69ULL, static_cast<uint64_t>(level)));
  for (int i = size() - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(idx[i], idx[j]);
  }
  mle_split.assign(idx.begin(), idx.begin() + n_mle);
  reg_split.assign(idx.begin() + n_mle, idx.begin() + n_mle + n_reg);
}

const LevelBlock& TupleDataset::block(int h) const {
  auto it = blocks.find(h);
  if (it == blocks.end())
    throw std::invalid_argument("dataset has no block for level " + std::to_string(h));
  return it->second;
}

void save_dataset_jsonl(const TupleDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");

  json header;
  header["type"] = "header";
  header["horizon"] = ds.horizon;
  header["num_states"] = ds.num_states;
  header["num_actions"] = ds.num_actions;
  header["seed"] = ds.seed;
  json levels = json::array();
  for (const auto& [h, block] : ds.blocks) {
    json lv;
    lv["h"] = h;
    lv["n"] = block.size();
    std::vector<std::vector<double>> table(block.data_policy.rows());
    for (int x = 0; x < block.data_policy.rows(); ++x)
      for (int a = 0; a < block.data_policy.cols(); ++a)
        table[x].push_back(block.data_policy(x, a));
    lv["data_policy"] = table;
    lv["mle_split"] = block.mle_split;
    lv["reg_split"] = block.reg_split;
    levels.push_back(lv);
  }
  header["levels"] = levels;
  out << header.dump() << "\n";

  for (const auto& [h, block] : ds.blocks)
    for (const auto& t : block.tuples)
      out << json{{"h", h}, {"x", t[0]}, {"a", t[1]}, {"x_next", t[2]}}.dump() << "\n";
}

TupleDataset load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path);
  json header = json::parse(line);
  if (header.value("type", "") != "header")
    throw std::runtime_error("dataset file missing header record");

  TupleDataset ds;
  ds.horizon = header["horizon"];
  ds.num_states = header["num_states"];
  ds.num_actions = header["num_actions"];
  ds.seed = header["seed"];
  for (const auto& lv : header["levels"]) {
    LevelBlock block;
    block.level = lv["h"];
    const auto& table = lv["data_policy"];
    block.data_policy = Mat(ds.num_states, ds.num_actions);
    for (int x = 0; x < ds.num_states; ++x)
      for (int a = 0; a < ds.num_actions; ++a) block.data_policy(x, a) = table[x][a];
    block.mle_split = lv["mle_split"].get<std::vector<int>>();
    block.reg_split = lv["reg_split"].get<std::vector<int>>();
    ds.blocks[block.level] = std::move(block);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    const int h = rec["h"];
    ds.blocks.at(h).tuples.push_back({rec["x"], rec["a"], rec["x_next"]});
  }
  return ds;
}

}  // namespace occest
