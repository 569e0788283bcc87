#pragma once

#include <map>
#include <span>
#include <vector>

#include "dcmgnn/chains.hpp"
#include "dcmgnn/common.hpp"
#include "dcmgnn/graph.hpp"

namespace dcmgnn {

struct ContrastConfig {
  double tau = 0.1;
  double mu = 1.0;  // scale of the duplicated loss block in chain features
  double leaky_slope = 0.01;
};

// Linear projection to a scalar followed by LeakyReLU.
struct EncoderParams {
  Vector weight;
  double bias = 0.0;
};

// Relation-based InfoNCE over a user batch: every user's `anchor` row is pulled
// towards its own `other` row and pushed from the other users' rows. Cosine
// similarity, temperature tau, summed over the batch. Rows with zero norm
// have similarity 0 and are counted in *zero_rows.
double infonce_loss(const Matrix& anchor, const Matrix& other, std::span<const NodeId> users, double tau,
                    int* zero_rows = nullptr);

// [mu * (sum of contrastive losses of the chain's auxiliary relations)] * 1_d,
// then the chain row, then the final row. `rcl_losses` is keyed by relation.
Vector chain_knowledge(const RelationChain& chain, const RelationSchema& schema,
                       const std::map<int, double>& rcl_losses, const Vector& chain_row,
                       const Vector& final_row, double mu);

// loss * [relation row, final row]. The target relation has no such feature.
Vector relation_knowledge(int relation, const RelationSchema& schema, double rcl_loss, const Vector& relation_row,
                          const Vector& final_row);

double encode_weight(const Vector& features, const EncoderParams& params, double leaky_slope);

// n * softmax(raw): uniform inputs map to all ones.
std::vector<double> normalize_weights(std::span<const double> raw);

}  // namespace dcmgnn
