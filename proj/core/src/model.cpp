#include "dcmgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "dcmgnn/relation.hpp"

namespace dcmgnn {

namespace {

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::vector<NodeId> distinct(std::vector<NodeId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void check_finite(double v, const std::string& term) {
  if (!std::isfinite(v)) throw NumericError("non-finite loss term: " + term);
}

}  // namespace

void ModelParams::add(std::string name, Matrix value) {
  if (contains(name)) throw Error("duplicate parameter tensor '" + name + "'");
  index_[name] = tensors_.size();
  tensors_.push_back(Tensor{std::move(name), std::move(value)});
}

Matrix& ModelParams::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter tensor '" + name + "'");
  return tensors_[it->second].value;
}

const Matrix& ModelParams::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter tensor '" + name + "'");
  return tensors_[it->second].value;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out;
  for (const auto& t : tensors_) out.add(t.name, Matrix::Zero(t.value.rows(), t.value.cols()));
  return out;
}

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

bool ModelParams::all_finite() const {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const Tensor& t) { return t.value.allFinite(); });
}

struct DcmgnnModel::Forward {
  ad::Var base_local, base_global, base_relation;
  ad::Var local, global;
  std::vector<ad::Var> per_relation;
  ad::Var relation_sum;
  ad::Var ebp;
  std::vector<std::vector<ad::Var>> w_user, w_item;
};

struct DcmgnnModel::RowView {
  std::vector<ad::Var> per_relation;
  ad::Var relation_sum;
  ad::Var ebp;
  std::vector<ad::Var> chain_last;
  ad::Var chain_sum;
  ad::Var final;
  std::vector<std::vector<ad::Var>> chain_steps;
};

DcmgnnModel::DcmgnnModel(const MultiplexBipartiteGraph& train_graph, ModelConfig config)
    : config_(std::move(config)), schema_(train_graph.schema()), num_users_(train_graph.num_users()),
      num_items_(train_graph.num_items()) {
  if (config_.dim < 1) throw Error("embedding dimension must be at least 1");
  if (config_.layers < 1) throw Error("layer count must be at least 1");
  if (!(config_.contrast.tau > 0.0)) throw Error("temperature must be positive");
  patterns_ = build_pattern_index(train_graph);
  for (int r = 0; r < schema_.size(); ++r) relation_adj_.push_back(normalized_adjacency(train_graph, r));
  chains_ = enumerate_chains(schema_, config_.chain_order);
  for (int r = 0; r < schema_.size(); ++r) {
    if (r != schema_.target_index()) aux_relations_.push_back(r);
  }
}

std::string DcmgnnModel::base_name(const char* channel, bool separate) {
  return separate ? std::string("base.") + channel : std::string("base");
}

std::string DcmgnnModel::transform_name(std::size_t chain, bool user, std::size_t step) {
  return "chain." + std::to_string(chain) + (user ? ".user." : ".item.") + std::to_string(step);
}

ModelParams DcmgnnModel::init_params(Rng& rng) const {
  const Eigen::Index n = num_nodes();
  const Eigen::Index d = config_.dim;
  const Eigen::Index npat = pattern_count(schema_.size());
  ModelParams p;
  std::normal_distribution<double> normal(0.0, config_.init_std);
  auto gaussian = [&] {
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  if (config_.separate_base) {
    p.add(base_name("local", true), gaussian());
    p.add(base_name("global", true), gaussian());
    p.add(base_name("relation", true), gaussian());
  } else {
    p.add("base", gaussian());
  }
  p.add("pattern.local", Matrix::Zero(npat, 1));
  p.add("pattern.global", Matrix::Zero(npat, 1));
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    for (int j = 0; j + 1 < chains_[c].length(); ++j) {
      p.add(transform_name(c, true, static_cast<std::size_t>(j)), xavier_uniform(d, d, rng));
      p.add(transform_name(c, false, static_cast<std::size_t>(j)), xavier_uniform(d, d, rng));
    }
  }
  p.add("encoder.chain.weight", xavier_uniform(3 * d, 1, rng));
  p.add("encoder.chain.bias", Matrix::Zero(1, 1));
  p.add("encoder.relation.weight", xavier_uniform(2 * d, 1, rng));
  p.add("encoder.relation.bias", Matrix::Zero(1, 1));
  return p;
}

void DcmgnnModel::check_params(const ModelParams& params) const {
  Rng rng(0);
  const ModelParams expected = init_params(rng);
  std::ostringstream diff;
  for (const auto& t : expected.tensors()) {
    if (!params.contains(t.name)) {
      diff << "  missing tensor " << t.name << "\n";
      continue;
    }
    const auto& v = params.at(t.name);
    if (v.rows() != t.value.rows() || v.cols() != t.value.cols()) {
      diff << "  " << t.name << ": expected " << t.value.rows() << "x" << t.value.cols() << ", found "
           << v.rows() << "x" << v.cols() << "\n";
    }
  }
  for (const auto& t : params.tensors()) {
    if (!expected.contains(t.name)) diff << "  unexpected tensor " << t.name << "\n";
  }
  if (!diff.str().empty()) throw SchemaError("parameters do not match the model:\n" + diff.str());
}

DcmgnnModel::Forward DcmgnnModel::forward(ad::Tape& tape, const ModelParams& params, ModelParams* grads) const {
  auto param = [&](const std::string& name) {
    return tape.parameter(params.at(name), grads ? &grads->at(name) : nullptr);
  };
  Forward f;
  const bool sep = config_.separate_base;
  f.base_local = param(base_name("local", sep));
  f.base_global = sep ? param(base_name("global", sep)) : f.base_local;
  f.base_relation = sep ? param(base_name("relation", sep)) : f.base_local;
  const int layers = config_.layers;

  // Local channel: softmax-weighted pattern adjacency, mean of layers 1..L.
  const ad::Var alpha = ad::softmax(param("pattern.local"));
  ad::Var values = ad::gather_rows(alpha, patterns_.entry_pattern);
  if (!config_.raw_local_adj) values = ad::symmetric_normalize(patterns_.union_adjacency, values);
  std::vector<ad::Var> local_layers;
  ad::Var h = f.base_local;
  for (int l = 0; l < layers; ++l) {
    h = ad::spmm_values(patterns_.union_adjacency, values, h);
    local_layers.push_back(h);
  }
  f.local = ad::scale(ad::add_n(local_layers), 1.0 / layers);

  // Global channel: B = counts * diag(softplus(b)), propagated through
  // norm(B B^T) in factored form, last layer kept.
  const ad::Var lambda = ad::softplus(param("pattern.global"));
  const ad::Var b = ad::scale_columns(patterns_.counts, lambda);
  const ad::Var s = ad::matmul_nt(b, ad::col_sum(b));
  ad::Var g = f.base_global;
  if (config_.global_norm == GlobalNorm::Row) {
    const ad::Var inv = ad::pow_positive(s, -1.0);
    for (int l = 0; l < layers; ++l) g = ad::row_scale(ad::matmul(b, ad::matmul_tn(b, g)), inv);
  } else {
    const ad::Var inv_sqrt = ad::pow_positive(s, -0.5);
    for (int l = 0; l < layers; ++l) {
      g = ad::row_scale(ad::matmul(b, ad::matmul_tn(b, ad::row_scale(g, inv_sqrt))), inv_sqrt);
    }
  }
  f.global = g;
  f.ebp = ad::scale(ad::add(f.local, f.global), 0.5);

  // Relation channel: LightGCN per relation, layers 0..L summed.
  for (int r = 0; r < schema_.size(); ++r) {
    std::vector<ad::Var> terms{f.base_relation};
    ad::Var x = f.base_relation;
    for (int l = 0; l < layers; ++l) {
      x = ad::spmm(relation_adj_[static_cast<std::size_t>(r)], x);
      terms.push_back(x);
    }
    f.per_relation.push_back(ad::add_n(terms));
  }
  f.relation_sum = ad::add_n(f.per_relation);

  f.w_user.resize(chains_.size());
  f.w_item.resize(chains_.size());
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    for (int j = 0; j + 1 < chains_[c].length(); ++j) {
      f.w_user[c].push_back(param(transform_name(c, true, static_cast<std::size_t>(j))));
      f.w_item[c].push_back(param(transform_name(c, false, static_cast<std::size_t>(j))));
    }
  }
  return f;
}

DcmgnnModel::RowView DcmgnnModel::view_rows(const Forward& f, std::span<const NodeId> nodes, bool users) const {
  RowView v;
  for (const auto& t : f.per_relation) v.per_relation.push_back(ad::gather_rows(t, nodes));
  v.relation_sum = ad::gather_rows(f.relation_sum, nodes);
  v.ebp = ad::gather_rows(f.ebp, nodes);
  std::vector<ad::Var> all_steps;
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    const auto& chain = chains_[c];
    std::vector<ad::Var> steps{v.per_relation[static_cast<std::size_t>(chain.relations.front())]};
    const auto& ws = users ? f.w_user[c] : f.w_item[c];
    for (const auto& w : ws) steps.push_back(ad::matmul_nt(steps.back(), w));
    v.chain_last.push_back(steps.back());
    all_steps.insert(all_steps.end(), steps.begin(), steps.end());
    v.chain_steps.push_back(std::move(steps));
  }
  ad::Tape* tape = v.ebp.tape;
  v.chain_sum = all_steps.empty() ? tape->constant(Matrix::Zero(v.ebp.rows(), v.ebp.cols())) : ad::add_n(all_steps);
  const std::vector<ad::Var> parts{v.ebp, v.relation_sum, v.chain_sum};
  v.final = ad::scale(ad::add_n(parts), 1.0 / 3.0);
  return v;
}

DcmgnnModel::Embeddings DcmgnnModel::embeddings(const ModelParams& params) const {
  ad::Tape tape;
  const Forward f = forward(tape, params, nullptr);
  std::vector<NodeId> user_nodes(static_cast<std::size_t>(num_users_));
  std::iota(user_nodes.begin(), user_nodes.end(), 0);
  std::vector<NodeId> item_nodes(static_cast<std::size_t>(num_items_));
  std::iota(item_nodes.begin(), item_nodes.end(), num_users_);
  const RowView u = view_rows(f, user_nodes, true);
  const RowView i = view_rows(f, item_nodes, false);

  auto stack = [](ad::Var top, ad::Var bottom) {
    Matrix m(top.rows() + bottom.rows(), top.cols());
    m << top.value(), bottom.value();
    return m;
  };
  Embeddings e;
  e.local = f.local.value();
  e.global = f.global.value();
  e.ebp = f.ebp.value();
  e.per_relation.reserve(f.per_relation.size());
  for (const auto& t : f.per_relation) e.per_relation.push_back(t.value());
  e.relation = f.relation_sum.value();
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    std::vector<Matrix> steps;
    for (std::size_t j = 0; j < u.chain_steps[c].size(); ++j) {
      steps.push_back(stack(u.chain_steps[c][j], i.chain_steps[c][j]));
    }
    e.chain_steps.push_back(std::move(steps));
  }
  e.chain = stack(u.chain_sum, i.chain_sum);
  e.final = stack(u.final, i.final);
  return e;
}

Matrix DcmgnnModel::final_embeddings(const ModelParams& params) const { return embeddings(params).final; }

ad::Var DcmgnnModel::build_loss(ad::Tape& tape, const TrainBatch& batch, const ModelParams& params,
                                ModelParams* grads, LossBreakdown& out) const {
  if (batch.final_triples.empty()) throw Error("training batch has no target-relation triples");
  if (batch.chain_triples.size() != chains_.size()) throw Error("training batch needs one triple list per chain");
  const Forward f = forward(tape, params, grads);
  const Eigen::Index d = config_.dim;
  const double lambda = config_.lambda;

  auto param = [&](const std::string& name) {
    return tape.parameter(params.at(name), grads ? &grads->at(name) : nullptr);
  };
  std::vector<ad::Var> bases{f.base_local};
  if (config_.separate_base) {
    bases.push_back(f.base_global);
    bases.push_back(f.base_relation);
  }

  struct TripleViews {
    RowView user, pos, neg;
    std::vector<NodeId> user_ids;
    ad::Var reg;  // squared norm of the base rows touched by the triples
  };
  auto triple_views = [&](const std::vector<Triple>& triples) {
    std::vector<NodeId> u, p, n;
    for (const auto& t : triples) {
      u.push_back(t.user);
      p.push_back(num_users_ + t.pos);
      n.push_back(num_users_ + t.neg);
    }
    std::vector<NodeId> touched = u;
    touched.insert(touched.end(), p.begin(), p.end());
    touched.insert(touched.end(), n.begin(), n.end());
    touched = distinct(std::move(touched));
    std::vector<ad::Var> regs;
    for (const auto& b : bases) regs.push_back(ad::sum_squares(ad::gather_rows(b, touched)));
    TripleViews tv{view_rows(f, u, true), view_rows(f, p, false), view_rows(f, n, false), u, ad::add_n(regs)};
    return tv;
  };
  auto bpr_terms = [](ad::Var eu, ad::Var ep, ad::Var en) {
    // -ln sigmoid(y+ - y-) per triple
    return ad::scale(ad::log_sigmoid(ad::sub(ad::row_dot(eu, ep), ad::row_dot(eu, en))), -1.0);
  };
  auto transform_reg = [&](std::size_t c) {
    std::vector<ad::Var> regs;
    for (const auto& w : f.w_user[c]) regs.push_back(ad::sum_squares(w));
    for (const auto& w : f.w_item[c]) regs.push_back(ad::sum_squares(w));
    return regs;
  };

  // Final-embedding BPR on target triples.
  const TripleViews fin = triple_views(batch.final_triples);
  std::vector<ad::Var> final_reg{fin.reg};
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    const auto regs = transform_reg(c);
    final_reg.insert(final_reg.end(), regs.begin(), regs.end());
  }
  const ad::Var final_bpr =
      ad::add(ad::sum(bpr_terms(fin.user.final, fin.pos.final, fin.neg.final)), ad::scale(ad::add_n(final_reg), lambda));

  // Relation contrast between each auxiliary relation and the target over the batch users.
  const std::vector<NodeId> batch_users = distinct(fin.user_ids);
  const RowView bu = view_rows(f, batch_users, true);
  const int target = schema_.target_index();
  std::vector<ad::Var> rcl_user_terms;  // n x 1 per auxiliary relation
  std::vector<ad::Var> rcl;             // 1 x 1 per auxiliary relation
  std::map<int, ad::Var> rcl_by_relation;
  for (const int r : aux_relations_) {
    const ad::Var a = ad::l2_normalize_rows(bu.per_relation[static_cast<std::size_t>(target)], &out.zero_norm_rows);
    const ad::Var o = ad::l2_normalize_rows(bu.per_relation[static_cast<std::size_t>(r)], &out.zero_norm_rows);
    const ad::Var logits = ad::scale(ad::matmul_nt(a, o), 1.0 / config_.contrast.tau);
    const ad::Var per_user = ad::sub(ad::logsumexp_rows(logits), ad::diagonal(logits));
    rcl_user_terms.push_back(per_user);
    rcl.push_back(ad::sum(per_user));
    rcl_by_relation[r] = rcl.back();
  }

  const double slope = config_.contrast.leaky_slope;
  const ad::Var enc_chain_w = param("encoder.chain.weight");
  const ad::Var enc_chain_b = param("encoder.chain.bias");
  const ad::Var enc_rel_w = param("encoder.relation.weight");
  const ad::Var enc_rel_b = param("encoder.relation.bias");

  // Scalar loss block of chain c's feature: mu * sum of its auxiliary contrast losses.
  auto chain_loss_block = [&](std::size_t c) {
    std::vector<ad::Var> terms;
    for (const int r : chains_[c].relations) {
      if (r != target) terms.push_back(rcl_by_relation.at(r));
    }
    return ad::scale(ad::add_n(terms), config_.contrast.mu);
  };
  // Chains with triples in this batch; only they share the chain weights.
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    if (!batch.chain_triples[c].empty()) active.push_back(c);
  }
  // Per-user encoder output of every active chain for the users of `view`: n x |active|.
  auto chain_scores = [&](const RowView& view) {
    const auto n = view.final.rows();
    std::vector<ad::Var> cols;
    for (const std::size_t c : active) {
      const std::vector<ad::Var> parts{ad::broadcast(chain_loss_block(c), n, d), view.chain_sum, view.final};
      const ad::Var z = ad::add(ad::matmul(ad::concat_cols(parts), enc_chain_w), ad::broadcast(enc_chain_b, n, 1));
      cols.push_back(ad::leaky_relu(z, slope));
    }
    return ad::concat_cols(cols);
  };
  auto relation_scores = [&](const RowView& view) {
    const auto n = view.final.rows();
    std::vector<ad::Var> cols;
    for (std::size_t k = 0; k < aux_relations_.size(); ++k) {
      const std::vector<ad::Var> parts{view.per_relation[static_cast<std::size_t>(aux_relations_[k])], view.final};
      const ad::Var features = ad::mul_scalar(rcl[k], ad::concat_cols(parts));
      const ad::Var z = ad::add(ad::matmul(features, enc_rel_w), ad::broadcast(enc_rel_b, n, 1));
      cols.push_back(ad::leaky_relu(z, slope));
    }
    return ad::concat_cols(cols);
  };

  std::vector<ad::Var> total_terms;
  const double n_chains = static_cast<double>(active.size());
  const double n_aux = static_cast<double>(aux_relations_.size());

  // Chain BPR terms.
  ad::Var chain_weights_batch;
  if (!active.empty() && !config_.per_user_weights) {
    const ad::Var scores = chain_scores(bu);
    std::vector<ad::Var> raw;
    for (std::size_t j = 0; j < active.size(); ++j) raw.push_back(ad::mean(ad::column(scores, static_cast<Eigen::Index>(j))));
    chain_weights_batch = ad::scale(ad::softmax(ad::concat_rows(raw)), n_chains);
  }
  std::size_t slot_of_chain = 0;
  for (std::size_t c = 0; c < chains_.size(); ++c) {
    const auto& triples = batch.chain_triples[c];
    if (triples.empty()) {
      out.chain_bpr.push_back(0.0);
      out.chain_weights.push_back(0.0);
      continue;
    }
    const std::size_t slot_index = slot_of_chain++;
    const TripleViews tv = triple_views(triples);
    const bool last = config_.chain_score == ChainScore::LastStep;
    const ad::Var terms = last ? bpr_terms(tv.user.chain_last[c], tv.pos.chain_last[c], tv.neg.chain_last[c])
                               : bpr_terms(tv.user.chain_sum, tv.pos.chain_sum, tv.neg.chain_sum);
    std::vector<ad::Var> regs{tv.reg};
    const auto wregs = transform_reg(c);
    regs.insert(regs.end(), wregs.begin(), wregs.end());
    const ad::Var reg = ad::scale(ad::add_n(regs), lambda);
    ad::Var weighted;
    double reported_weight = 1.0;
    const ad::Var chain_loss = ad::add(ad::sum(terms), reg);
    if (config_.per_user_weights) {
      const ad::Var w = ad::scale(ad::softmax_rows(chain_scores(tv.user)), n_chains);
      const ad::Var wc = ad::column(w, static_cast<Eigen::Index>(slot_index));
      weighted = ad::add(ad::sum(ad::hadamard(wc, terms)), ad::mul_scalar(ad::mean(wc), reg));
      reported_weight = wc.value().mean();
    } else {
      const NodeId slot = static_cast<NodeId>(slot_index);
      const ad::Var wc = ad::gather_rows(chain_weights_batch, std::span<const NodeId>(&slot, 1));
      weighted = ad::mul_scalar(wc, chain_loss);
      reported_weight = wc.scalar();
    }
    out.chain_bpr.push_back(chain_loss.scalar());
    out.chain_weights.push_back(reported_weight);
    check_finite(chain_loss.scalar(), "chain BPR (" + chains_[c].name(schema_) + ")");
    total_terms.push_back(weighted);
  }

  // Weighted relation contrast.
  if (!aux_relations_.empty()) {
    const ad::Var scores = relation_scores(bu);
    std::vector<ad::Var> weighted;
    if (config_.per_user_weights) {
      const ad::Var w = ad::scale(ad::softmax_rows(scores), n_aux);
      for (std::size_t k = 0; k < aux_relations_.size(); ++k) {
        const ad::Var wk = ad::column(w, static_cast<Eigen::Index>(k));
        weighted.push_back(ad::sum(ad::hadamard(wk, rcl_user_terms[k])));
        out.rcl_weights.push_back(wk.value().mean());
      }
    } else {
      std::vector<ad::Var> raw;
      for (std::size_t k = 0; k < aux_relations_.size(); ++k) raw.push_back(ad::mean(ad::column(scores, static_cast<Eigen::Index>(k))));
      const ad::Var w = ad::scale(ad::softmax(ad::concat_rows(raw)), n_aux);
      for (std::size_t k = 0; k < aux_relations_.size(); ++k) {
        const NodeId slot = static_cast<NodeId>(k);
        const ad::Var wk = ad::gather_rows(w, std::span<const NodeId>(&slot, 1));
        weighted.push_back(ad::mul_scalar(wk, rcl[k]));
        out.rcl_weights.push_back(wk.scalar());
      }
    }
    for (std::size_t k = 0; k < aux_relations_.size(); ++k) {
      out.rcl.push_back(rcl[k].scalar());
      check_finite(rcl[k].scalar(), "contrastive loss (" + schema_.relations()[aux_relations_[k]] + ")");
    }
    total_terms.push_back(ad::scale(ad::add_n(weighted), config_.mu1));
  }
  out.aux_relations = aux_relations_;

  out.final_bpr = final_bpr.scalar();
  check_finite(out.final_bpr, "final BPR");
  total_terms.push_back(ad::scale(final_bpr, config_.mu2));
  const ad::Var total = ad::add_n(total_terms);
  out.total = total.scalar();
  check_finite(out.total, "total loss");
  return total;
}

LossBreakdown DcmgnnModel::loss(const TrainBatch& batch, const ModelParams& params) const {
  ad::Tape tape;
  LossBreakdown out;
  build_loss(tape, batch, params, nullptr, out);
  return out;
}

LossBreakdown DcmgnnModel::loss_and_grad(const TrainBatch& batch, const ModelParams& params, ModelParams& grads) const {
  grads = params.zeros_like();
  ad::Tape tape;
  LossBreakdown out;
  const ad::Var total = build_loss(tape, batch, params, &grads, out);
  tape.backward(total);
  return out;
}

}  // namespace dcmgnn
