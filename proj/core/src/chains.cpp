#include "dcmgnn/chains.hpp"

#include <algorithm>
#include <set>

namespace dcmgnn {

std::string RelationChain::name(const RelationSchema& schema) const {
  std::string s;
  for (std::size_t i = 0; i < relations.size(); ++i) {
    if (i) s += "->";
    s += schema.relations()[static_cast<std::size_t>(relations[i])];
  }
  return s;
}

std::vector<RelationChain> enumerate_chains(const RelationSchema& schema, const std::vector<std::string>& order) {
  std::vector<int> sequence;
  const auto& names = order.empty() ? schema.canonical_order() : order;
  for (const auto& n : names) sequence.push_back(schema.index_of(n));
  if (static_cast<int>(sequence.size()) != schema.size() ||
      std::set<int>(sequence.begin(), sequence.end()).size() != sequence.size()) {
    throw SchemaError("chain order must list every relation exactly once");
  }

  std::vector<RelationChain> chains;
  const int target = schema.target_index();
  for (const auto mask : enumerate_patterns(schema)) {
    if (!mask.has(target) || mask.count() < 2) continue;
    RelationChain chain;
    chain.source_mask = mask;
    for (const int r : sequence) {
      if (mask.has(r)) chain.relations.push_back(r);
    }
    chains.push_back(std::move(chain));
  }
  return chains;
}

std::vector<Matrix> chain_forward(const RelationChain& chain, const ChainTransforms& transforms,
                                  std::span<const Matrix> relation_tables, NodeId num_users) {
  if (chain.length() < 1) throw ShapeError("chain_forward: empty chain");
  const auto steps = static_cast<std::size_t>(chain.length() - 1);
  if (transforms.user.size() != steps || transforms.item.size() != steps) {
    throw ShapeError("chain_forward: one user and one item transform per step expected");
  }
  const auto first = static_cast<std::size_t>(chain.relations.front());
  if (first >= relation_tables.size()) throw ShapeError("chain_forward: missing relation table");
  std::vector<Matrix> out{relation_tables[first]};
  const Eigen::Index d = out.front().cols();
  const Eigen::Index users = num_users;
  const Eigen::Index items = out.front().rows() - users;
  for (std::size_t j = 0; j < steps; ++j) {
    const auto& wu = transforms.user[j];
    const auto& wv = transforms.item[j];
    if (wu.rows() != d || wu.cols() != d || wv.rows() != d || wv.cols() != d) {
      throw ShapeError("chain_forward: transform must be d x d");
    }
    const Matrix& cur = out.back();
    Matrix next(cur.rows(), d);
    next.topRows(users) = cur.topRows(users) * wu.transpose();
    next.bottomRows(items) = cur.bottomRows(items) * wv.transpose();
    out.push_back(std::move(next));
  }
  return out;
}

Matrix chain_embedding(const std::vector<std::vector<Matrix>>& steps) {
  Matrix out;
  for (const auto& chain : steps) {
    for (const auto& s : chain) {
      if (out.size() == 0) {
        out = s;
      } else {
        require_same_shape(out, s, "chain_embedding");
        out += s;
      }
    }
  }
  return out;
}

Matrix final_embedding(const Matrix& ebp, const Matrix& relation, const Matrix& chain) {
  require_same_shape(ebp, relation, "final_embedding");
  require_same_shape(ebp, chain, "final_embedding");
  return (ebp + relation + chain) / 3.0;
}

}  // namespace dcmgnn
