#include "dcmgnn/patterns.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iterator>

namespace dcmgnn {
namespace {

Csr symmetric_edge_matrix(const MultiplexBipartiteGraph& graph, const std::vector<Edge>& edges) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    pairs.emplace_back(e.user, graph.item_node(e.item));
    pairs.emplace_back(graph.item_node(e.item), e.user);
  }
  return Csr::from_pairs(graph.num_nodes(), graph.num_nodes(), std::move(pairs));
}

Vector pattern_row_counts(const Csr& m) {
  Vector c(m.rows);
  for (std::int64_t r = 0; r < m.rows; ++r) {
    c[r] = static_cast<double>(m.row_ptr[r + 1] - m.row_ptr[r]);
  }
  return c;
}

}  // namespace

int PatternMask::count() const { return std::popcount(bits); }

std::string PatternMask::to_string(int num_relations) const {
  std::string s(static_cast<std::size_t>(num_relations), '0');
  for (int r = 0; r < num_relations; ++r) {
    if (has(r)) s[static_cast<std::size_t>(r)] = '1';
  }
  return s;
}

std::string PatternMask::name(const RelationSchema& schema) const {
  std::string s;
  for (int r = 0; r < schema.size(); ++r) {
    if (!has(r)) continue;
    if (!s.empty()) s += '&';
    s += schema.relations()[r];
  }
  return s;
}

int pattern_count(int num_relations) { return (1 << num_relations) - 1; }

std::vector<PatternMask> enumerate_patterns(const RelationSchema& schema) {
  std::vector<PatternMask> out;
  const int n = pattern_count(schema.size());
  out.reserve(static_cast<std::size_t>(n));
  for (int b = 1; b <= n; ++b) out.push_back(PatternMask{static_cast<std::uint32_t>(b)});
  return out;
}

BehaviorPatternMatrix build_bbp_matrix(const MultiplexBipartiteGraph& graph, PatternMask mask) {
  const int nrel = graph.schema().size();
  if (mask.bits == 0 || mask.bits > static_cast<std::uint32_t>(pattern_count(nrel))) {
    throw SchemaError("pattern mask must be a nonzero subset of the relations");
  }
  std::vector<Edge> current;
  bool first = true;
  for (int r = 0; r < nrel; ++r) {
    if (!mask.has(r)) continue;
    const auto& edges = graph.edges(r);
    if (first) {
      current = edges;
      first = false;
      continue;
    }
    std::vector<Edge> next;
    std::set_intersection(current.begin(), current.end(), edges.begin(), edges.end(), std::back_inserter(next));
    current = std::move(next);
  }
  for (int r = 0; r < nrel; ++r) {
    if (mask.has(r)) continue;
    const auto& edges = graph.edges(r);
    std::vector<Edge> next;
    std::set_difference(current.begin(), current.end(), edges.begin(), edges.end(), std::back_inserter(next));
    current = std::move(next);
  }
  BehaviorPatternMatrix out;
  out.mask = mask;
  out.matrix = symmetric_edge_matrix(graph, current);
  out.edges = std::move(current);
  return out;
}

std::vector<BehaviorPatternMatrix> build_all_bbp(const MultiplexBipartiteGraph& graph) {
  std::vector<BehaviorPatternMatrix> out;
  for (const auto mask : enumerate_patterns(graph.schema())) out.push_back(build_bbp_matrix(graph, mask));
  return out;
}

PatternIndex build_pattern_index(const MultiplexBipartiteGraph& graph) {
  const int nrel = graph.schema().size();
  const int npat = pattern_count(nrel);
  std::vector<std::pair<Edge, int>> tagged;
  for (int r = 0; r < nrel; ++r) {
    for (const auto& e : graph.edges(r)) tagged.emplace_back(e, r);
  }
  std::sort(tagged.begin(), tagged.end());

  PatternIndex index;
  index.pattern_edges.resize(static_cast<std::size_t>(npat));
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<std::pair<std::pair<NodeId, NodeId>, int>> entry_tags;
  for (std::size_t i = 0; i < tagged.size();) {
    std::uint32_t bits = 0;
    std::size_t j = i;
    for (; j < tagged.size() && tagged[j].first == tagged[i].first; ++j) bits |= 1U << tagged[j].second;
    const Edge e = tagged[i].first;
    const int slot = static_cast<int>(bits) - 1;
    index.pattern_edges[static_cast<std::size_t>(slot)].push_back(e);
    const NodeId item = graph.item_node(e.item);
    entry_tags.push_back({{e.user, item}, slot});
    entry_tags.push_back({{item, e.user}, slot});
    i = j;
  }
  std::sort(entry_tags.begin(), entry_tags.end());
  pairs.reserve(entry_tags.size());
  for (const auto& [p, slot] : entry_tags) pairs.push_back(p);
  index.union_adjacency = Csr::from_pairs(graph.num_nodes(), graph.num_nodes(), std::move(pairs));
  // from_pairs keeps the sorted order, so entries line up with entry_tags.
  index.entry_pattern.reserve(entry_tags.size());
  index.counts = Matrix::Zero(graph.num_nodes(), npat);
  for (std::size_t k = 0; k < entry_tags.size(); ++k) {
    const auto& [p, slot] = entry_tags[k];
    index.entry_pattern.push_back(slot);
    index.counts(p.first, slot) += 1.0;
  }
  return index;
}

PatternWeights PatternWeights::uniform(int patterns) {
  return PatternWeights{Vector::Zero(patterns), Vector::Zero(patterns)};
}

Vector softmax(const Vector& logits) {
  Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Vector softplus(const Vector& logits) {
  return logits.unaryExpr([](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); });
}

Csr aggregate_local(const std::vector<BehaviorPatternMatrix>& patterns, const PatternWeights& weights,
                    bool normalize) {
  if (patterns.empty()) throw ShapeError("aggregate_local: no pattern matrices");
  if (weights.local_logits.size() != static_cast<Eigen::Index>(patterns.size())) {
    throw ShapeError("aggregate_local: one weight per pattern expected");
  }
  const Vector alpha = softmax(weights.local_logits);
  const auto n = patterns.front().matrix.rows;
  std::vector<std::pair<std::pair<NodeId, NodeId>, double>> entries;
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const auto& m = patterns[p].matrix;
    for (std::int64_t r = 0; r < m.rows; ++r) {
      for (auto k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
        entries.push_back({{static_cast<NodeId>(r), m.col[k]}, alpha[static_cast<Eigen::Index>(p)] * m.value(k)});
      }
    }
  }
  std::sort(entries.begin(), entries.end());
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) pairs.push_back(e.first);
  Csr out = Csr::from_pairs(n, n, std::move(pairs));
  out.values.assign(out.nnz(), 0.0);
  for (const auto& [rc, v] : entries) out.values[static_cast<std::size_t>(out.find(rc.first, rc.second))] += v;
  if (normalize) out.values = symmetric_normalize(out, out.values);
  return out;
}

Matrix propagate_local(const Csr& adj, const Matrix& base, int layers) {
  if (layers < 1) throw Error("propagate_local: at least one layer required");
  Matrix h = base;
  Matrix acc = Matrix::Zero(base.rows(), base.cols());
  for (int l = 0; l < layers; ++l) {
    h = spmm(adj, h);
    acc += h;
  }
  return acc / static_cast<double>(layers);
}

Matrix build_global_matrix(const std::vector<BehaviorPatternMatrix>& patterns, const PatternWeights& weights) {
  if (patterns.empty()) throw ShapeError("build_global_matrix: no pattern matrices");
  if (weights.global_logits.size() != static_cast<Eigen::Index>(patterns.size())) {
    throw ShapeError("build_global_matrix: one weight per pattern expected");
  }
  const Vector lambda = softplus(weights.global_logits);
  Matrix b(patterns.front().matrix.rows, static_cast<Eigen::Index>(patterns.size()));
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const auto col = static_cast<Eigen::Index>(p);
    b.col(col) = pattern_row_counts(patterns[p].matrix) * lambda[col];
  }
  return b;
}

Matrix build_global_similarity(const Matrix& b, GlobalNorm norm) {
  Matrix s = b * b.transpose();
  const Vector rs = s.rowwise().sum();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (rs[i] <= 0.0) {
      s.row(i).setZero();
      continue;
    }
    if (norm == GlobalNorm::Row) {
      s.row(i) /= rs[i];
    } else {
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        s(i, j) = rs[j] > 0.0 ? s(i, j) / std::sqrt(rs[i] * rs[j]) : 0.0;
      }
    }
  }
  return s;
}

Matrix propagate_global(const Matrix& adj_glo, const Matrix& base, int layers) {
  if (layers < 1) throw Error("propagate_global: at least one layer required");
  if (adj_glo.cols() != base.rows()) throw ShapeError("propagate_global: inner dimension mismatch");
  Matrix h = base;
  for (int l = 0; l < layers; ++l) h = adj_glo * h;
  return h;
}

Matrix propagate_global_factored(const Matrix& b, const Matrix& base, int layers, GlobalNorm norm) {
  if (layers < 1) throw Error("propagate_global: at least one layer required");
  if (b.rows() != base.rows()) throw ShapeError("propagate_global_factored: row count mismatch");
  // Row sums of B B^T are B (B^T 1).
  const Vector s = b * b.colwise().sum().transpose();
  const double exponent = norm == GlobalNorm::Row ? -1.0 : -0.5;
  const Vector left = s.unaryExpr([exponent](double v) { return v > 0 ? std::pow(v, exponent) : 0.0; });
  const Vector right = norm == GlobalNorm::Row ? Vector::Ones(s.size()) : left;
  Matrix h = base;
  for (int l = 0; l < layers; ++l) {
    const Matrix p = b.transpose() * (right.asDiagonal() * h);
    h = left.asDiagonal() * (b * p);
  }
  return h;
}

Matrix ebp_embeddings(const Matrix& local, const Matrix& global) {
  require_same_shape(local, global, "ebp_embeddings");
  return 0.5 * (local + global);
}

}  // namespace dcmgnn
