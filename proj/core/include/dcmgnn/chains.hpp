#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcmgnn/common.hpp"
#include "dcmgnn/graph.hpp"
#include "dcmgnn/patterns.hpp"

namespace dcmgnn {

// Relations of one target-containing pattern, in behavior order.
struct RelationChain {
  std::vector<int> relations;  // schema relation indices
  PatternMask source_mask;

  int length() const { return static_cast<int>(relations.size()); }
  std::string name(const RelationSchema& schema) const;  // e.g. "view->cart->buy"
};

// One chain per pattern that contains the target and at least one more
// relation, in mask order. Relations inside a chain follow the schema's
// canonical order, or `order` when given (any permutation of the relations;
// the target may sit anywhere, which is how reordered-chain studies are run).
std::vector<RelationChain> enumerate_chains(const RelationSchema& schema, const std::vector<std::string>& order = {});

// Per-step d x d transforms of one chain, applied as e_next = W e.
struct ChainTransforms {
  std::vector<Matrix> user;
  std::vector<Matrix> item;
};

// Steps 1..|chain|: step 1 is the relation-specific table of the first
// relation, each later step applies the user transform to user rows and the
// item transform to item rows.
std::vector<Matrix> chain_forward(const RelationChain& chain, const ChainTransforms& transforms,
                                  std::span<const Matrix> relation_tables, NodeId num_users);

// Sum over every chain and step.
Matrix chain_embedding(const std::vector<std::vector<Matrix>>& steps);

// Mean of the explicit-pattern, multi-relation and chain views.
Matrix final_embedding(const Matrix& ebp, const Matrix& relation, const Matrix& chain);

}  // namespace dcmgnn
