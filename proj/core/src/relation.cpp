#include "dcmgnn/relation.hpp"

namespace dcmgnn {

Csr normalized_adjacency(const MultiplexBipartiteGraph& graph, int relation) {
  Csr a = graph.adjacency(relation);
  const std::vector<double> ones(a.nnz(), 1.0);
  a.values = symmetric_normalize(a, ones);
  return a;
}

Matrix lightgcn_propagate(const Csr& normalized, const Matrix& base, int layers) {
  if (layers < 1) throw Error("lightgcn_propagate: at least one layer required");
  if (base.rows() != normalized.cols) throw ShapeError("lightgcn_propagate: embedding rows do not match node count");
  Matrix h = base;
  Matrix acc = base;
  for (int l = 0; l < layers; ++l) {
    h = spmm(normalized, h);
    acc += h;
  }
  return acc;
}

Matrix lightgcn_propagate(const MultiplexBipartiteGraph& graph, int relation, const Matrix& base, int layers) {
  return lightgcn_propagate(normalized_adjacency(graph, relation), base, layers);
}

Matrix aggregate_relations(std::span<const Matrix> tables) {
  if (tables.empty()) throw ShapeError("aggregate_relations: no tables");
  Matrix out = tables[0];
  for (std::size_t i = 1; i < tables.size(); ++i) {
    require_same_shape(out, tables[i], "aggregate_relations");
    out += tables[i];
  }
  return out;
}

RelationEmbeddings relation_embeddings(const MultiplexBipartiteGraph& graph, const Matrix& base, int layers) {
  RelationEmbeddings out;
  for (int r = 0; r < graph.schema().size(); ++r) {
    out.per_relation.push_back(lightgcn_propagate(graph, r, base, layers));
  }
  out.aggregated = aggregate_relations(out.per_relation);
  return out;
}

}  // namespace dcmgnn
