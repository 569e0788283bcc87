#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dcmgnn/common.hpp"
#include "dcmgnn/sparse.hpp"

namespace dcmgnn {

inline constexpr int kMaxRelations = 8;

// Relation names, the target relation and the canonical behavior order.
// Bit r of a pattern mask refers to relations[r].
class RelationSchema {
 public:
  RelationSchema() = default;
  // An empty `canonical_order` means `relations` with the target moved last.
  RelationSchema(std::vector<std::string> relations, std::string target,
                 std::vector<std::string> canonical_order = {});

  const std::vector<std::string>& relations() const { return relations_; }
  const std::string& target() const { return target_; }
  const std::vector<std::string>& canonical_order() const { return canonical_order_; }

  int size() const { return static_cast<int>(relations_.size()); }
  int target_index() const { return target_index_; }
  // Index of `name` in relations(), or -1.
  int find(const std::string& name) const;
  int index_of(const std::string& name) const;  // throws SchemaError

  bool operator==(const RelationSchema&) const = default;

 private:
  std::vector<std::string> relations_;
  std::string target_;
  std::vector<std::string> canonical_order_;
  int target_index_ = -1;
};

// One user-item interaction. `item` is the item's own index in [0, num_items).
struct Edge {
  NodeId user = 0;
  NodeId item = 0;
  auto operator<=>(const Edge&) const = default;
};

// Users occupy node ids [0, num_users), items [num_users, num_nodes).
class MultiplexBipartiteGraph {
 public:
  MultiplexBipartiteGraph() = default;
  MultiplexBipartiteGraph(RelationSchema schema, NodeId num_users, NodeId num_items,
                          std::vector<std::vector<Edge>> edges);

  const RelationSchema& schema() const { return schema_; }
  NodeId num_users() const { return num_users_; }
  NodeId num_items() const { return num_items_; }
  NodeId num_nodes() const { return num_users_ + num_items_; }
  NodeId item_node(NodeId item) const { return num_users_ + item; }

  // Sorted, duplicate-free edge list of relation r.
  const std::vector<Edge>& edges(int relation) const { return edges_.at(relation); }
  // Symmetric binary N x N adjacency of relation r.
  const Csr& adjacency(int relation) const { return adjacency_.at(relation); }
  std::size_t num_edges() const;

  bool has_edge(int relation, NodeId user, NodeId item) const;
  std::int64_t degree(int relation, NodeId node) const;

  // External ids in first-seen order; empty when the graph was built in memory.
  std::vector<std::string> user_names;
  std::vector<std::string> item_names;

 private:
  RelationSchema schema_;
  NodeId num_users_ = 0;
  NodeId num_items_ = 0;
  std::vector<std::vector<Edge>> edges_;
  std::vector<Csr> adjacency_;
};

struct DatasetSplit {
  std::vector<std::vector<Edge>> train_edges;  // per relation
  std::vector<Edge> test_edges;                // target relation only
  std::uint64_t seed = 0;
  double ratio = 0.75;
};

// Reads `user<TAB>item<TAB>relation` lines. Columns after the third (node
// attributes) are accepted and ignored.
MultiplexBipartiteGraph load_interactions(const std::filesystem::path& path,
                                          const RelationSchema& schema);

// Directory layout: meta.txt (key=value), users.txt, items.txt and one
// `<relation>.edges` file of `user<TAB>item` index pairs per relation.
void save_graph(const MultiplexBipartiteGraph& graph, const std::filesystem::path& dir);
MultiplexBipartiteGraph load_graph(const std::filesystem::path& dir);

// Holds out (1 - ratio) of the target edges; auxiliary edges all stay in train.
DatasetSplit split_train_test(const MultiplexBipartiteGraph& graph, double ratio, std::uint64_t seed);

// The graph restricted to the training edges of `split`.
MultiplexBipartiteGraph train_graph(const MultiplexBipartiteGraph& graph, const DatasetSplit& split);

std::int64_t degree(const MultiplexBipartiteGraph& graph, int relation, NodeId node);

}  // namespace dcmgnn
