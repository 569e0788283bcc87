#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcmgnn/common.hpp"
#include "dcmgnn/graph.hpp"

namespace dcmgnn {

inline const std::vector<int> kDefaultKs{5, 10, 20, 40};

// Item indices by descending score, ties by ascending index, with `exclude`
// removed first. At most `limit` items are returned (0 = all).
std::vector<NodeId> rank_items(const Vector& scores, std::span<const NodeId> exclude, std::size_t limit = 0);
// Scores are dot products of the user's row with every item row of `final`.
std::vector<NodeId> rank_items(const Matrix& final, NodeId num_users, NodeId user, std::span<const NodeId> exclude,
                               std::size_t limit = 0);

// |top-k ∩ test| / |test|.
double recall_at_k(std::span<const NodeId> ranked, std::span<const NodeId> test_items, int k);
// Binary-gain DCG@k over the ideal DCG of min(|test|, k) hits.
double ndcg_at_k(std::span<const NodeId> ranked, std::span<const NodeId> test_items, int k);

struct UserMetrics {
  NodeId user = 0;
  std::vector<double> recall;  // one per k
  std::vector<double> ndcg;
};

struct RankingResult {
  std::vector<int> ks;
  std::vector<UserMetrics> users;  // users with at least one test item, ascending id
  std::vector<double> recall;      // mean over users, one per k
  std::vector<double> ndcg;

  int k_index(int k) const;  // -1 when k was not evaluated
};

// Full ranking over the item catalogue for every user with test items;
// training target positives are excluded from each user's ranking.
RankingResult evaluate(const Matrix& final, const MultiplexBipartiteGraph& graph, const DatasetSplit& split,
                       std::vector<int> ks = kDefaultKs);

struct SparsityGroup {
  std::string label;
  int lower = 0;
  int upper = 0;  // exclusive; -1 = unbounded
  std::size_t users = 0;
  std::optional<double> recall;  // absent for empty groups
  std::optional<double> ndcg;
};

// Users bucketed by their number of training interactions over all
// relations: [0,4) [4,5) [5,6) [6,7) [7,10) [10,60) and an overflow bucket
// [60,inf) so the groups always partition the evaluated users. Metrics are
// the means of R@k / N@k within the group.
std::vector<SparsityGroup> sparsity_groups(const RankingResult& result, const MultiplexBipartiteGraph& train_graph,
                                           int k = 10);

}  // namespace dcmgnn
