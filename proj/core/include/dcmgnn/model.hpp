#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcmgnn/autodiff.hpp"
#include "dcmgnn/chains.hpp"
#include "dcmgnn/common.hpp"
#include "dcmgnn/contrastive.hpp"
#include "dcmgnn/graph.hpp"
#include "dcmgnn/patterns.hpp"
#include "dcmgnn/rng.hpp"

namespace dcmgnn {

enum class ChainScore {
  LastStep,    // each chain scores with its own last-step embedding
  Aggregated,  // every chain scores with the summed chain embedding
};

struct ModelConfig {
  int dim = 64;
  int layers = 2;
  double lambda = 1e-4;
  double mu1 = 0.1;
  double mu2 = 0.5;
  ContrastConfig contrast;
  bool raw_local_adj = false;
  bool separate_base = false;
  bool per_user_weights = false;
  ChainScore chain_score = ChainScore::LastStep;
  GlobalNorm global_norm = GlobalNorm::Row;
  std::vector<std::string> chain_order;  // empty: schema canonical order
  double init_std = 0.1;
};

// Named dense tensors in a fixed order.
class ModelParams {
 public:
  struct Tensor {
    std::string name;
    Matrix value;
  };

  void add(std::string name, Matrix value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  ModelParams zeros_like() const;
  std::size_t size() const;  // scalar count
  bool all_finite() const;

 private:
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

// (user, positive item, negative item); items use their own [0, num_items) index.
struct Triple {
  NodeId user = 0;
  NodeId pos = 0;
  NodeId neg = 0;
};

struct TrainBatch {
  std::vector<Triple> final_triples;               // target-relation positives
  std::vector<std::vector<Triple>> chain_triples;  // one list per chain
};

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> chain_bpr;
  std::vector<double> chain_weights;
  std::vector<int> aux_relations;  // schema indices, order of rcl / rcl_weights
  std::vector<double> rcl;
  std::vector<double> rcl_weights;
  double final_bpr = 0.0;
  int zero_norm_rows = 0;
};

// Graph-derived structure of a DCMGNN model: pattern index, per-relation
// normalized adjacencies and relation chains. Parameters live outside.
class DcmgnnModel {
 public:
  DcmgnnModel(const MultiplexBipartiteGraph& train_graph, ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const RelationSchema& schema() const { return schema_; }
  NodeId num_users() const { return num_users_; }
  NodeId num_items() const { return num_items_; }
  NodeId num_nodes() const { return num_users_ + num_items_; }
  const PatternIndex& patterns() const { return patterns_; }
  const std::vector<RelationChain>& chains() const { return chains_; }
  const std::vector<int>& aux_relations() const { return aux_relations_; }
  const Csr& relation_adjacency(int r) const { return relation_adj_[static_cast<std::size_t>(r)]; }

  // Base rows N(0, init_std^2), pattern logits 0, chain transforms and
  // encoder projections Xavier-uniform, encoder biases 0.
  ModelParams init_params(Rng& rng) const;
  // Throws SchemaError describing every mismatching tensor.
  void check_params(const ModelParams& params) const;

  static std::string base_name(const char* channel, bool separate);
  static std::string transform_name(std::size_t chain, bool user, std::size_t step);

  // N x d final embeddings of every node.
  Matrix final_embeddings(const ModelParams& params) const;

  struct Embeddings {
    Matrix local, global, ebp;
    std::vector<Matrix> per_relation;
    Matrix relation;
    std::vector<std::vector<Matrix>> chain_steps;
    Matrix chain;
    Matrix final;
  };
  // Every intermediate view over all nodes.
  Embeddings embeddings(const ModelParams& params) const;

  LossBreakdown loss(const TrainBatch& batch, const ModelParams& params) const;
  // Also writes d(total)/d(param) into `grads` (reshaped to match params).
  LossBreakdown loss_and_grad(const TrainBatch& batch, const ModelParams& params, ModelParams& grads) const;

 private:
  struct Forward;
  struct RowView;

  Forward forward(ad::Tape& tape, const ModelParams& params, ModelParams* grads) const;
  RowView view_rows(const Forward& f, std::span<const NodeId> nodes, bool users) const;
  ad::Var build_loss(ad::Tape& tape, const TrainBatch& batch, const ModelParams& params, ModelParams* grads,
                     LossBreakdown& out) const;

  ModelConfig config_;
  RelationSchema schema_;
  NodeId num_users_ = 0;
  NodeId num_items_ = 0;
  PatternIndex patterns_;
  std::vector<Csr> relation_adj_;
  std::vector<RelationChain> chains_;
  std::vector<int> aux_relations_;
};

}  // namespace dcmgnn
