#include "dcmgnn/contrastive.hpp"

#include <algorithm>
#include <cmath>

namespace dcmgnn {

double infonce_loss(const Matrix& anchor, const Matrix& other, std::span<const NodeId> users, double tau,
                    int* zero_rows) {
  if (users.empty()) throw Error("infonce_loss: empty batch");
  if (!(tau > 0.0)) throw Error("infonce_loss: temperature must be positive");
  require_same_shape(anchor, other, "infonce_loss");
  const auto n = static_cast<Eigen::Index>(users.size());
  auto unit_rows = [&](const Matrix& table) {
    Matrix out(n, table.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = table.row(users[static_cast<std::size_t>(i)]);
      const double norm = row.norm();
      if (norm > 0.0) {
        out.row(i) = row / norm;
      } else {
        out.row(i).setZero();
        if (zero_rows != nullptr) ++*zero_rows;
      }
    }
    return out;
  };
  const Matrix a = unit_rows(anchor);
  const Matrix b = unit_rows(other);
  const Matrix logits = (a * b.transpose()) / tau;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss += lse - logits(i, i);
  }
  return loss;
}

Vector chain_knowledge(const RelationChain& chain, const RelationSchema& schema,
                       const std::map<int, double>& rcl_losses, const Vector& chain_row,
                       const Vector& final_row, double mu) {
  if (chain_row.size() != final_row.size()) throw ShapeError("chain_knowledge: row size mismatch");
  double total = 0.0;
  for (const int r : chain.relations) {
    if (r == schema.target_index()) continue;
    const auto it = rcl_losses.find(r);
    if (it == rcl_losses.end()) {
      throw Error("chain_knowledge: missing contrastive loss for relation '" + schema.relations()[r] + "'");
    }
    total += it->second;
  }
  const auto d = chain_row.size();
  Vector out(3 * d);
  out.head(d).setConstant(total * mu);
  out.segment(d, d) = chain_row;
  out.tail(d) = final_row;
  return out;
}

Vector relation_knowledge(int relation, const RelationSchema& schema, double rcl_loss, const Vector& relation_row,
                          const Vector& final_row) {
  if (relation == schema.target_index()) throw Error("relation_knowledge: the target relation has no contrastive loss");
  if (relation_row.size() != final_row.size()) throw ShapeError("relation_knowledge: row size mismatch");
  Vector out(relation_row.size() * 2);
  out << relation_row, final_row;
  return rcl_loss * out;
}

double encode_weight(const Vector& features, const EncoderParams& params, double leaky_slope) {
  if (features.size() != params.weight.size()) throw ShapeError("encode_weight: feature length mismatch");
  const double z = features.dot(params.weight) + params.bias;
  return z > 0 ? z : leaky_slope * z;
}

std::vector<double> normalize_weights(std::span<const double> raw) {
  if (raw.empty()) throw Error("normalize_weights: empty list");
  const double mx = *std::max_element(raw.begin(), raw.end());
  std::vector<double> out(raw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::exp(raw[i] - mx);
    total += out[i];
  }
  const double n = static_cast<double>(raw.size());
  for (auto& w : out) w = n * w / total;
  return out;
}

}  // namespace dcmgnn
