#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcmgnn/common.hpp"
#include "dcmgnn/graph.hpp"
#include "dcmgnn/sparse.hpp"

namespace dcmgnn {

// Exact set of relations present on a user-item pair. Bit r stands for
// schema.relations()[r].
struct PatternMask {
  std::uint32_t bits = 0;

  bool has(int relation) const { return (bits >> relation) & 1U; }
  int count() const;
  // Pattern slot in enumerate_patterns() order.
  int index() const { return static_cast<int>(bits) - 1; }
  // One character per relation, relation 0 first: "101" = relations 0 and 2.
  std::string to_string(int num_relations) const;
  // Relation names joined with '&', e.g. "view&buy".
  std::string name(const RelationSchema& schema) const;

  auto operator<=>(const PatternMask&) const = default;
};

int pattern_count(int num_relations);

// All 2^|R| - 1 nonzero masks in binary counting order.
std::vector<PatternMask> enumerate_patterns(const RelationSchema& schema);

struct BehaviorPatternMatrix {
  PatternMask mask;
  std::vector<Edge> edges;  // sorted user-item pairs carrying exactly `mask`
  Csr matrix;               // symmetric binary N x N
};

// Pairs present in every relation of the mask and absent from every other one.
BehaviorPatternMatrix build_bbp_matrix(const MultiplexBipartiteGraph& graph, PatternMask mask);
std::vector<BehaviorPatternMatrix> build_all_bbp(const MultiplexBipartiteGraph& graph);

// Every interacting pair of the graph labelled with its pattern, in the form
// the model consumes: the union adjacency, the pattern slot of each stored
// entry, and the per-node pattern counts (row sums of each pattern matrix).
struct PatternIndex {
  Csr union_adjacency;
  std::vector<NodeId> entry_pattern;  // one slot per stored entry
  Matrix counts;                      // N x pattern_count
  std::vector<std::vector<Edge>> pattern_edges;
};

PatternIndex build_pattern_index(const MultiplexBipartiteGraph& graph);

// Unnormalized pattern weights: local ones go through softmax, global ones
// through softplus.
struct PatternWeights {
  Vector local_logits;
  Vector global_logits;

  static PatternWeights uniform(int patterns);
};

Vector softmax(const Vector& logits);
Vector softplus(const Vector& logits);

// sum_p softmax(local)_p * pattern_p, optionally followed by D^{-1/2} . D^{-1/2}.
Csr aggregate_local(const std::vector<BehaviorPatternMatrix>& patterns, const PatternWeights& weights,
                    bool normalize = true);

// Mean of layers 1..L of repeated propagation with `adj`.
Matrix propagate_local(const Csr& adj, const Matrix& base, int layers);

// N x P matrix of per-node pattern counts with column p scaled by softplus(global_p).
Matrix build_global_matrix(const std::vector<BehaviorPatternMatrix>& patterns, const PatternWeights& weights);

enum class GlobalNorm { Row, Symmetric };

// norm(B B^T) as a dense matrix. Row: each row divided by its sum.
// Symmetric: D^{-1/2} S D^{-1/2}. Zero rows stay zero.
Matrix build_global_similarity(const Matrix& b, GlobalNorm norm = GlobalNorm::Row);

// Final layer of repeated propagation with a dense similarity matrix.
Matrix propagate_global(const Matrix& adj_glo, const Matrix& base, int layers);

// Same result as propagate_global(build_global_similarity(b, norm), ...) without
// forming the N x N matrix: each layer costs O(N * P * d).
Matrix propagate_global_factored(const Matrix& b, const Matrix& base, int layers, GlobalNorm norm = GlobalNorm::Row);

// Average of the local and global views.
Matrix ebp_embeddings(const Matrix& local, const Matrix& global);

}  // namespace dcmgnn
