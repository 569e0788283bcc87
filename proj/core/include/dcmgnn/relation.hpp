#pragma once

#include <span>
#include <vector>

#include "dcmgnn/common.hpp"
#include "dcmgnn/graph.hpp"
#include "dcmgnn/sparse.hpp"

namespace dcmgnn {

// D^{-1/2} A_r D^{-1/2} for one relation.
Csr normalized_adjacency(const MultiplexBipartiteGraph& graph, int relation);

// Sum of layers 0..L of LightGCN propagation on one relation. Isolated nodes
// keep their layer-0 row.
Matrix lightgcn_propagate(const MultiplexBipartiteGraph& graph, int relation, const Matrix& base, int layers);
Matrix lightgcn_propagate(const Csr& normalized, const Matrix& base, int layers);

struct RelationEmbeddings {
  std::vector<Matrix> per_relation;
  Matrix aggregated;
};

// Elementwise sum of the per-relation tables.
Matrix aggregate_relations(std::span<const Matrix> tables);

RelationEmbeddings relation_embeddings(const MultiplexBipartiteGraph& graph, const Matrix& base, int layers);

}  // namespace dcmgnn
