#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "occest/types.hpp"

namespace occest {

// One level of tuple data: (x_h, a_h, x_{h+1}) samples plus the known
// last-step data policy and the MLE/regression split.
struct LevelBlock {
  int level = 0;
  std::vector<std::array<int, 3>> tuples;
  Mat data_policy;  // X x K
  std::vector<int> mle_split;
  std::vector<int> reg_split;

  int size() const { return static_cast<int>(tuples.size()); }

  // Uniform random split without replacement; indices are drawn from the
  // block's own seed so reruns are identical.
  void split(int n_mle, int n_reg, uint64_t seed);
};

struct TupleDataset {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  uint64_t seed = 0;
  std::map<int, LevelBlock> blocks;

  bool has_block(int h) const { return blocks.count(h) > 0; }
  const LevelBlock& block(int h) const;
};

// JSON-lines serialization: a header record carrying the data-policy tables
// and split indices, then one record per tuple {h, x, a, x_next}.
void save_dataset_jsonl(const TupleDataset& ds, const std::string& path);
TupleDataset load_dataset_jsonl(const std::string& path);

}  // namespace occest
