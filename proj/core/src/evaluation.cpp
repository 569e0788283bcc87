#include "dcmgnn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcmgnn/parallel.hpp"

namespace dcmgnn {

std::vector<NodeId> rank_items(const Vector& scores, std::span<const NodeId> exclude, std::size_t limit) {
  std::vector<char> skip(static_cast<std::size_t>(scores.size()), 0);
  for (const auto e : exclude) {
    if (e >= 0 && e < scores.size()) skip[static_cast<std::size_t>(e)] = 1;
  }
  std::vector<NodeId> items;
  items.reserve(skip.size());
  for (NodeId i = 0; i < static_cast<NodeId>(skip.size()); ++i) {
    if (!skip[static_cast<std::size_t>(i)]) items.push_back(i);
  }
  const auto before = [&scores](NodeId a, NodeId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (limit == 0 || limit >= items.size()) {
    std::sort(items.begin(), items.end(), before);
  } else {
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(limit), items.end(), before);
    items.resize(limit);
  }
  return items;
}

std::vector<NodeId> rank_items(const Matrix& final, NodeId num_users, NodeId user, std::span<const NodeId> exclude,
                               std::size_t limit) {
  const Eigen::Index items = final.rows() - num_users;
  const Vector scores = final.bottomRows(items) * final.row(user).transpose();
  return rank_items(scores, exclude, limit);
}

double recall_at_k(std::span<const NodeId> ranked, std::span<const NodeId> test_items, int k) {
  if (k < 1) throw Error("recall_at_k: k must be at least 1");
  if (test_items.empty()) throw Error("recall_at_k: empty test set");
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) {
    if (std::find(test_items.begin(), test_items.end(), ranked[i]) != test_items.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

double ndcg_at_k(std::span<const NodeId> ranked, std::span<const NodeId> test_items, int k) {
  if (k < 1) throw Error("ndcg_at_k: k must be at least 1");
  if (test_items.empty()) throw Error("ndcg_at_k: empty test set");
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    if (std::find(test_items.begin(), test_items.end(), ranked[i]) != test_items.end()) {
      dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
  }
  double idcg = 0.0;
  const auto ideal = std::min<std::size_t>(test_items.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

int RankingResult::k_index(int k) const {
  const auto it = std::find(ks.begin(), ks.end(), k);
  return it == ks.end() ? -1 : static_cast<int>(it - ks.begin());
}

RankingResult evaluate(const Matrix& final, const MultiplexBipartiteGraph& graph, const DatasetSplit& split,
                       std::vector<int> ks) {
  if (ks.empty()) throw Error("evaluate: no cutoffs requested");
  if (final.rows() != graph.num_nodes()) throw ShapeError("evaluate: embedding rows do not match the graph");
  const auto nu = static_cast<std::size_t>(graph.num_users());
  std::vector<std::vector<NodeId>> test(nu), train(nu);
  for (const auto& e : split.test_edges) test[static_cast<std::size_t>(e.user)].push_back(e.item);
  for (const auto& e : split.train_edges[static_cast<std::size_t>(graph.schema().target_index())]) {
    train[static_cast<std::size_t>(e.user)].push_back(e.item);
  }

  RankingResult result;
  result.ks = std::move(ks);
  for (std::size_t u = 0; u < nu; ++u) {
    if (!test[u].empty()) result.users.push_back(UserMetrics{static_cast<NodeId>(u), {}, {}});
  }
  const int kmax = *std::max_element(result.ks.begin(), result.ks.end());
  const Matrix item_rows = final.bottomRows(graph.num_items());
  parallel_for(result.users.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& um = result.users[i];
      const auto u = static_cast<std::size_t>(um.user);
      const Vector scores = item_rows * final.row(um.user).transpose();
      const auto ranked = rank_items(scores, train[u], static_cast<std::size_t>(kmax));
      for (const int k : result.ks) {
        um.recall.push_back(recall_at_k(ranked, test[u], k));
        um.ndcg.push_back(ndcg_at_k(ranked, test[u], k));
      }
    }
  });
  result.recall.assign(result.ks.size(), 0.0);
  result.ndcg.assign(result.ks.size(), 0.0);
  for (const auto& um : result.users) {
    for (std::size_t j = 0; j < result.ks.size(); ++j) {
      result.recall[j] += um.recall[j];
      result.ndcg[j] += um.ndcg[j];
    }
  }
  if (!result.users.empty()) {
    for (std::size_t j = 0; j < result.ks.size(); ++j) {
      result.recall[j] /= static_cast<double>(result.users.size());
      result.ndcg[j] /= static_cast<double>(result.users.size());
    }
  }
  return result;
}

std::vector<SparsityGroup> sparsity_groups(const RankingResult& result, const MultiplexBipartiteGraph& train_graph,
                                           int k) {
  const int ki = result.k_index(k);
  if (ki < 0) throw Error("sparsity_groups: k=" + std::to_string(k) + " was not evaluated");
  std::vector<std::int64_t> interactions(static_cast<std::size_t>(train_graph.num_users()), 0);
  for (int r = 0; r < train_graph.schema().size(); ++r) {
    for (const auto& e : train_graph.edges(r)) ++interactions[static_cast<std::size_t>(e.user)];
  }
  constexpr int kBounds[] = {0, 4, 5, 6, 7, 10, 60, -1};
  std::vector<SparsityGroup> groups;
  for (std::size_t g = 0; g + 1 < std::size(kBounds); ++g) {
    SparsityGroup group;
    group.lower = kBounds[g];
    group.upper = kBounds[g + 1];
    group.label = "[" + std::to_string(group.lower) + "," + (group.upper < 0 ? "inf" : std::to_string(group.upper)) + ")";
    groups.push_back(group);
  }
  std::vector<double> rsum(groups.size(), 0.0), nsum(groups.size(), 0.0);
  for (const auto& um : result.users) {
    const auto c = interactions[static_cast<std::size_t>(um.user)];
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (c >= groups[g].lower && (groups[g].upper < 0 || c < groups[g].upper)) {
        ++groups[g].users;
        rsum[g] += um.recall[static_cast<std::size_t>(ki)];
        nsum[g] += um.ndcg[static_cast<std::size_t>(ki)];
        break;
      }
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].users == 0) continue;
    groups[g].recall = rsum[g] / static_cast<double>(groups[g].users);
    groups[g].ndcg = nsum[g] / static_cast<double>(groups[g].users);
  }
  return groups;
}

}  // namespace dcmgnn
