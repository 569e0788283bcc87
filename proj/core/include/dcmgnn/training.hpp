#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dcmgnn/evaluation.hpp"
#include "dcmgnn/graph.hpp"
#include "dcmgnn/model.hpp"
#include "dcmgnn/rng.hpp"

namespace dcmgnn {

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  int batch_size = 128;
  int epochs = 200;
  int eval_every = 1;
  int patience = 20;  // epochs without improvement of R@stop_k; 0 disables early stopping
  int stop_k = 10;
  std::vector<int> ks = kDefaultKs;
  std::uint64_t seed = 0;
};

// Uniform negatives for one positive edge set ("context"). Tries rejection
// sampling first and falls back to a scan of the user's non-positive items.
class NegativeSampler {
 public:
  NegativeSampler() = default;
  NegativeSampler(std::span<const Edge> positives, NodeId num_users, NodeId num_items);

  // Throws if the user has interacted with every item of the context.
  NodeId sample(NodeId user, Rng& rng) const;
  bool is_positive(NodeId user, NodeId item) const;
  const std::vector<NodeId>& positives(NodeId user) const { return positives_.at(static_cast<std::size_t>(user)); }

  static constexpr int kMaxTries = 100;

 private:
  std::vector<std::vector<NodeId>> positives_;  // sorted per user
  NodeId num_items_ = 0;
};

// sum -ln sigmoid(pos - neg) + lambda * squared_norm.
double bpr_loss(std::span<const double> scores_pos, std::span<const double> scores_neg, double squared_norm,
                double lambda);

LossBreakdown total_loss(const DcmgnnModel& model, const TrainBatch& batch, const ModelParams& params);
ModelParams backward(const DcmgnnModel& model, const TrainBatch& batch, const ModelParams& params);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  ModelParams m;
  ModelParams v;

  static AdamState for_params(const ModelParams& params);
};

// Bias-corrected Adam. Throws NumericError on a non-finite gradient or when
// the update leaves a non-finite parameter.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

struct EpochRecord {
  int epoch = 0;           // 1-based
  double mean_loss = 0.0;  // mean total loss over the epoch's batches
  double probe_loss = 0.0; // total loss on a batch fixed for the whole run
  LossBreakdown probe;
  std::optional<RankingResult> metrics;
  bool improved = false;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_epoch(const EpochRecord&) {}
};

struct Checkpoint;

// Owns the model, parameters, optimizer state and random streams of one run.
class Trainer {
 public:
  Trainer(const MultiplexBipartiteGraph& graph, const DatasetSplit& split, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  const DcmgnnModel& model() const { return model_; }
  const MultiplexBipartiteGraph& train_graph() const { return train_graph_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const ModelParams& best_params() const { return best_params_; }
  int epoch() const { return epoch_; }
  double best_recall() const { return best_recall_; }
  int best_epoch() const { return best_epoch_; }
  bool stopped() const { return stopped_; }

  // Negative-sampled batch for the given target-relation positives; chain
  // positives are drawn from each chain's pattern edges.
  TrainBatch make_batch(std::span<const Edge> target_edges, Rng& batch_rng, Rng& negative_rng) const;

  // One pass over the shuffled training target edges.
  EpochRecord run_epoch();
  RankingResult evaluate_params(const ModelParams& params) const;
  // Runs until config.epochs or early stop; evaluates every eval_every epochs.
  void train(TrainObserver* observer = nullptr);

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  const MultiplexBipartiteGraph& graph_;
  const DatasetSplit& split_;
  MultiplexBipartiteGraph train_graph_;
  TrainConfig config_;
  DcmgnnModel model_;
  ModelParams params_;
  ModelParams best_params_;
  AdamState adam_;
  NegativeSampler target_sampler_;
  std::vector<NegativeSampler> chain_samplers_;
  std::vector<std::vector<Edge>> chain_positives_;
  TrainBatch probe_;
  Rng batch_rng_;
  Rng negative_rng_;
  int epoch_ = 0;
  double best_recall_ = -1.0;
  int best_epoch_ = 0;
  int stale_epochs_ = 0;
  bool stopped_ = false;
};

struct TrainResult {
  ModelParams params;       // best parameters by R@stop_k
  std::vector<EpochRecord> log;
};

TrainResult train(const MultiplexBipartiteGraph& graph, const DatasetSplit& split, const TrainConfig& config);

}  // namespace dcmgnn
