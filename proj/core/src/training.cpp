#include "dcmgnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dcmgnn/checkpoint.hpp"

namespace dcmgnn {

NegativeSampler::NegativeSampler(std::span<const Edge> positives, NodeId num_users, NodeId num_items)
    : positives_(static_cast<std::size_t>(num_users)), num_items_(num_items) {
  for (const auto& e : positives) positives_.at(static_cast<std::size_t>(e.user)).push_back(e.item);
  for (auto& p : positives_) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
}

bool NegativeSampler::is_positive(NodeId user, NodeId item) const {
  const auto& p = positives(user);
  return std::binary_search(p.begin(), p.end(), item);
}

NodeId NegativeSampler::sample(NodeId user, Rng& rng) const {
  const auto& p = positives(user);
  if (static_cast<NodeId>(p.size()) >= num_items_) {
    throw Error("user " + std::to_string(user) + " has interacted with every item; no negative exists");
  }
  std::uniform_int_distribution<NodeId> dist(0, num_items_ - 1);
  for (int i = 0; i < kMaxTries; ++i) {
    const NodeId item = dist(rng);
    if (!std::binary_search(p.begin(), p.end(), item)) return item;
  }
  // Pick the k-th non-positive item directly.
  std::uniform_int_distribution<NodeId> pick(0, num_items_ - static_cast<NodeId>(p.size()) - 1);
  NodeId k = pick(rng);
  NodeId item = 0;
  for (const NodeId pos : p) {
    if (item + k < pos) break;
    k -= pos - item;
    item = pos + 1;
  }
  return item + k;
}

double bpr_loss(std::span<const double> scores_pos, std::span<const double> scores_neg, double squared_norm,
                double lambda) {
  if (scores_pos.size() != scores_neg.size()) throw ShapeError("bpr_loss: score lists differ in length");
  double loss = 0.0;
  for (std::size_t i = 0; i < scores_pos.size(); ++i) {
    const double x = scores_pos[i] - scores_neg[i];
    // -ln sigmoid(x) = softplus(-x)
    loss += x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
  }
  return loss + lambda * squared_norm;
}

LossBreakdown total_loss(const DcmgnnModel& model, const TrainBatch& batch, const ModelParams& params) {
  return model.loss(batch, params);
}

ModelParams backward(const DcmgnnModel& model, const TrainBatch& batch, const ModelParams& params) {
  ModelParams grads;
  model.loss_and_grad(batch, params, grads);
  return grads;
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");
  if (state.m.tensors().empty()) state = AdamState::for_params(params);
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto& t : params.tensors()) {
    const Matrix& g = grads.at(t.name);
    Matrix& m = state.m.at(t.name);
    Matrix& v = state.v.at(t.name);
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    t.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    if (!t.value.allFinite()) throw NumericError("adam_step: parameter '" + t.name + "' became non-finite");
  }
}

Trainer::Trainer(const MultiplexBipartiteGraph& graph, const DatasetSplit& split, TrainConfig config)
    : graph_(graph), split_(split), train_graph_(dcmgnn::train_graph(graph, split)), config_(std::move(config)),
      model_(train_graph_, config_.model), batch_rng_(make_stream(config_.seed, "batches")),
      negative_rng_(make_stream(config_.seed, "negatives")) {
  if (!(config_.lr >= 0.0)) throw Error("learning rate must be non-negative");
  if (config_.batch_size < 1) throw Error("batch size must be at least 1");
  if (config_.eval_every < 1) throw Error("eval_every must be at least 1");
  Rng init = make_stream(config_.seed, "init");
  params_ = model_.init_params(init);
  best_params_ = params_;
  adam_ = AdamState::for_params(params_);

  const auto& target_edges = train_graph_.edges(train_graph_.schema().target_index());
  if (target_edges.empty()) throw Error("no training edges on the target relation");
  target_sampler_ = NegativeSampler(target_edges, train_graph_.num_users(), train_graph_.num_items());
  for (const auto& chain : model_.chains()) {
    const auto& edges = model_.patterns().pattern_edges[static_cast<std::size_t>(chain.source_mask.index())];
    chain_positives_.push_back(edges);
    chain_samplers_.emplace_back(edges, train_graph_.num_users(), train_graph_.num_items());
  }

  Rng probe_batches = make_stream(config_.seed, "probe");
  Rng probe_negatives = make_stream(config_.seed, "probe-negatives");
  std::vector<Edge> probe_edges;
  std::uniform_int_distribution<std::size_t> pick(0, target_edges.size() - 1);
  for (int i = 0; i < config_.batch_size; ++i) probe_edges.push_back(target_edges[pick(probe_batches)]);
  probe_ = make_batch(probe_edges, probe_batches, probe_negatives);
}

TrainBatch Trainer::make_batch(std::span<const Edge> target_edges, Rng& batch_rng, Rng& negative_rng) const {
  TrainBatch batch;
  for (const auto& e : target_edges) {
    batch.final_triples.push_back({e.user, e.item, target_sampler_.sample(e.user, negative_rng)});
  }
  batch.chain_triples.resize(chain_positives_.size());
  for (std::size_t c = 0; c < chain_positives_.size(); ++c) {
    const auto& pool = chain_positives_[c];
    if (pool.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < target_edges.size(); ++i) {
      const Edge& e = pool[pick(batch_rng)];
      batch.chain_triples[c].push_back({e.user, e.item, chain_samplers_[c].sample(e.user, negative_rng)});
    }
  }
  return batch;
}

EpochRecord Trainer::run_epoch() {
  std::vector<Edge> order = train_graph_.edges(train_graph_.schema().target_index());
  std::shuffle(order.begin(), order.end(), batch_rng_);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  ModelParams grads;
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    const TrainBatch batch =
        make_batch(std::span<const Edge>(order.data() + start, end - start), batch_rng_, negative_rng_);
    const LossBreakdown lb = model_.loss_and_grad(batch, params_, grads);
    adam_step(params_, grads, adam_, config_.lr);
    loss_sum += lb.total;
    ++batches;
  }
  ++epoch_;
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.mean_loss = loss_sum / static_cast<double>(batches);
  rec.probe = model_.loss(probe_, params_);
  rec.probe_loss = rec.probe.total;
  return rec;
}

RankingResult Trainer::evaluate_params(const ModelParams& params) const {
  return evaluate(model_.final_embeddings(params), graph_, split_, config_.ks);
}

void Trainer::train(TrainObserver* observer) {
  while (!stopped_ && epoch_ < config_.epochs) {
    EpochRecord rec = run_epoch();
    if (epoch_ % config_.eval_every == 0 || epoch_ == config_.epochs) {
      rec.metrics = evaluate_params(params_);
      const int ki = rec.metrics->k_index(config_.stop_k);
      const double score = ki >= 0 ? rec.metrics->recall[static_cast<std::size_t>(ki)] : -rec.probe_loss;
      if (score > best_recall_) {
        best_recall_ = score;
        best_epoch_ = epoch_;
        best_params_ = params_;
        stale_epochs_ = 0;
        rec.improved = true;
      } else {
        stale_epochs_ = epoch_ - best_epoch_;
        if (config_.patience > 0 && stale_epochs_ >= config_.patience) stopped_ = true;
      }
    }
    if (observer != nullptr) observer->on_epoch(rec);
  }
}

namespace {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ParseError("checkpoint: bad random stream state");
}

}  // namespace

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.meta["num_users"] = std::to_string(graph_.num_users());
  c.meta["num_items"] = std::to_string(graph_.num_items());
  c.meta["dim"] = std::to_string(config_.model.dim);
  std::string rels;
  for (const auto& r : graph_.schema().relations()) rels += (rels.empty() ? "" : ",") + r;
  c.meta["relations"] = rels;
  c.meta["target"] = graph_.schema().target();
  c.meta["epoch"] = std::to_string(epoch_);
  c.meta["best_epoch"] = std::to_string(best_epoch_);
  std::ostringstream best;
  best.precision(17);
  best << best_recall_;
  c.meta["best_score"] = best.str();
  c.meta["stale_epochs"] = std::to_string(stale_epochs_);
  c.meta["stopped"] = stopped_ ? "1" : "0";
  c.params = params_;
  c.best = best_params_;
  c.adam = adam_;
  c.rng["batches"] = rng_state(batch_rng_);
  c.rng["negatives"] = rng_state(negative_rng_);
  return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
  model_.check_params(ckpt.params);
  params_ = ckpt.params;
  best_params_ = ckpt.best ? *ckpt.best : ckpt.params;
  if (ckpt.adam) {
    adam_ = *ckpt.adam;
  } else {
    adam_ = AdamState::for_params(params_);
  }
  auto meta = [&](const char* key, const std::string& fallback) {
    const auto it = ckpt.meta.find(key);
    return it == ckpt.meta.end() ? fallback : it->second;
  };
  epoch_ = std::stoi(meta("epoch", "0"));
  best_epoch_ = std::stoi(meta("best_epoch", "0"));
  best_recall_ = std::stod(meta("best_score", "-1"));
  stale_epochs_ = std::stoi(meta("stale_epochs", "0"));
  stopped_ = meta("stopped", "0") == "1";
  if (const auto it = ckpt.rng.find("batches"); it != ckpt.rng.end()) set_rng_state(batch_rng_, it->second);
  if (const auto it = ckpt.rng.find("negatives"); it != ckpt.rng.end()) set_rng_state(negative_rng_, it->second);
}

TrainResult train(const MultiplexBipartiteGraph& graph, const DatasetSplit& split, const TrainConfig& config) {
  struct Collect : TrainObserver {
    std::vector<EpochRecord>* log;
    void on_epoch(const EpochRecord& r) override { log->push_back(r); }
  };
  TrainResult result;
  Trainer trainer(graph, split, config);
  Collect collect;
  collect.log = &result.log;
  trainer.train(&collect);
  result.params = trainer.best_params();
  return result;
}

}  // namespace dcmgnn
