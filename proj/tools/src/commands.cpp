#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dcmgnn/chains.hpp"
#include "dcmgnn/checkpoint.hpp"
#include "dcmgnn/parallel.hpp"
#include "dcmgnn/patterns.hpp"
#include "dcmgnn_cli/cli.hpp"
#include "json.hpp"

namespace dcmgnn::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

MultiplexBipartiteGraph load_dataset(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("no dataset given (--data)");
  if (!fs::is_regular_file(c.data)) throw ConfigError("dataset not found: " + c.data);
  return load_interactions(c.data, schema_of(c));
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::string csv_field(const std::string& s) {
  return s.find_first_of(",\"") == std::string::npos ? s : "\"" + s + "\"";
}

int sparsity_k(const RankingResult& result, int preferred) {
  return result.k_index(preferred) >= 0 ? preferred : result.ks.front();
}

// Keeps the lines of a log whose epoch is at most `epoch`; used on resume.
void truncate_log(const fs::path& path, int epoch, bool csv) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> keep;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (csv && first) {
      keep.push_back(line);
      first = false;
      continue;
    }
    first = false;
    int e = 0;
    if (csv) {
      e = std::stoi(line.substr(0, line.find(',')));
    } else {
      e = ordered_json::parse(line).at("epoch").get<int>();
    }
    if (e <= epoch) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

std::string meta_value(const Checkpoint& ckpt, const std::string& key) {
  const auto it = ckpt.meta.find(key);
  return it == ckpt.meta.end() ? std::string("<missing>") : it->second;
}

// Throws SchemaError listing every field where the checkpoint and the run differ.
void check_compatible(const Checkpoint& ckpt, const MultiplexBipartiteGraph& graph, const TrainConfig& config) {
  std::string rels;
  for (const auto& r : graph.schema().relations()) rels += (rels.empty() ? "" : ",") + r;
  const std::pair<std::string, std::string> expected[] = {
      {"num_users", std::to_string(graph.num_users())},
      {"num_items", std::to_string(graph.num_items())},
      {"dim", std::to_string(config.model.dim)},
      {"relations", rels},
      {"target", graph.schema().target()},
  };
  std::string diff;
  for (const auto& [key, want] : expected) {
    const auto have = meta_value(ckpt, key);
    if (have != want) diff += "  " + key + ": checkpoint=" + have + " run=" + want + "\n";
  }
  if (!diff.empty()) throw SchemaError("checkpoint does not match the run configuration:\n" + diff);
}

class RunLogger : public TrainObserver {
 public:
  RunLogger(const fs::path& dir, const RunConfig& config, Trainer& trainer, std::ostream& out)
      : dir_(dir), config_(config), trainer_(trainer), out_(out) {
    metrics_.open(dir / "metrics.jsonl", std::ios::app);
    log_.open(dir / "train_log.jsonl", std::ios::app);
    if (config.csv) {
      const bool fresh = !fs::exists(dir / "metrics.csv") || fs::file_size(dir / "metrics.csv") == 0;
      csv_.open(dir / "metrics.csv", std::ios::app);
      if (fresh) csv_ << "epoch,metric,k,value,group\n";
    }
    if (!metrics_ || !log_) throw Error("cannot write logs in " + dir.string());
  }

  void on_epoch(const EpochRecord& rec) override {
    const auto& schema = trainer_.model().schema();
    ordered_json line;
    line["epoch"] = rec.epoch;
    line["loss"] = rec.mean_loss;
    line["probe_loss"] = rec.probe_loss;
    line["final_bpr"] = rec.probe.final_bpr;
    ordered_json chains = ordered_json::array();
    for (std::size_t c = 0; c < rec.probe.chain_bpr.size(); ++c) {
      chains.push_back({{"chain", trainer_.model().chains()[c].name(schema)},
                        {"bpr", rec.probe.chain_bpr[c]},
                        {"weight", rec.probe.chain_weights[c]}});
    }
    line["chains"] = chains;
    ordered_json rcl = ordered_json::array();
    for (std::size_t r = 0; r < rec.probe.rcl.size(); ++r) {
      rcl.push_back({{"relation", schema.relations()[static_cast<std::size_t>(rec.probe.aux_relations[r])]},
                     {"loss", rec.probe.rcl[r]},
                     {"weight", rec.probe.rcl_weights[r]}});
    }
    line["contrastive"] = rcl;
    line["improved"] = rec.improved;
    log_ << line.dump() << '\n';
    log_.flush();

    out_ << "epoch " << std::setw(4) << rec.epoch << "  loss " << fixed(rec.mean_loss);
    if (rec.metrics) {
      const auto& m = *rec.metrics;
      const int gk = sparsity_k(m, config_.stop_k);
      const auto groups = sparsity_groups(m, trainer_.train_graph(), gk);
      for (std::size_t j = 0; j < m.ks.size(); ++j) {
        const int k = m.ks[j];
        ordered_json rec_json;
        rec_json["epoch"] = rec.epoch;
        rec_json["k"] = k;
        rec_json["users"] = m.users.size();
        rec_json["recall"] = m.recall[j];
        rec_json["ndcg"] = m.ndcg[j];
        if (k == gk) {
          ordered_json gj = ordered_json::array();
          for (const auto& g : groups) {
            gj.push_back({{"group", g.label},
                          {"users", g.users},
                          {"recall", optional_number(g.recall)},
                          {"ndcg", optional_number(g.ndcg)}});
          }
          rec_json["groups"] = gj;
        }
        metrics_ << rec_json.dump() << '\n';
        if (csv_.is_open()) {
          csv_ << rec.epoch << ",recall," << k << ',' << m.recall[j] << ",all\n";
          csv_ << rec.epoch << ",ndcg," << k << ',' << m.ndcg[j] << ",all\n";
          if (k == gk) {
            for (const auto& g : groups) {
              if (!g.recall) continue;
              csv_ << rec.epoch << ",recall," << k << ',' << *g.recall << ',' << csv_field(g.label) << '\n';
              csv_ << rec.epoch << ",ndcg," << k << ',' << *g.ndcg << ',' << csv_field(g.label) << '\n';
            }
          }
        }
        if (k == config_.stop_k) out_ << "  R@" << k << ' ' << fixed(m.recall[j]) << "  N@" << k << ' ' << fixed(m.ndcg[j]);
      }
      metrics_.flush();
      if (csv_.is_open()) csv_.flush();
      if (rec.improved) out_ << "  *";
    }
    out_ << std::endl;
    if (config_.checkpoint_every > 0 && rec.epoch % config_.checkpoint_every == 0) {
      save_checkpoint(trainer_.checkpoint(), dir_ / "checkpoint.txt");
    }
  }

 private:
  fs::path dir_;
  const RunConfig& config_;
  Trainer& trainer_;
  std::ostream& out_;
  std::ofstream metrics_;
  std::ofstream log_;
  std::ofstream csv_;
};

}  // namespace

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream&) {
  const auto tc = train_config_of(config);
  set_num_workers(config.workers);
  const auto graph = load_dataset(config);
  const auto split = split_train_test(graph, config.split_ratio, config.seed);

  const auto dir = output_dir(config);
  fs::create_directories(dir);
  RunConfig resolved = config;
  resolved.out = dir.string();
  resolved.resume = false;
  {
    std::ofstream cfg(dir / "config.txt");
    cfg << serialize(resolved);
    if (!cfg) throw Error("cannot write " + (dir / "config.txt").string());
  }

  Trainer trainer(graph, split, tc);
  const auto ckpt_path = dir / "checkpoint.txt";
  if (config.resume) {
    if (!fs::exists(ckpt_path)) throw ConfigError("--resume: no checkpoint at " + ckpt_path.string());
    const auto ckpt = load_checkpoint(ckpt_path);
    check_compatible(ckpt, graph, tc);
    trainer.restore(ckpt);
    truncate_log(dir / "metrics.jsonl", trainer.epoch(), false);
    truncate_log(dir / "train_log.jsonl", trainer.epoch(), false);
    truncate_log(dir / "metrics.csv", trainer.epoch(), true);
    out << "resumed from epoch " << trainer.epoch() << '\n';
  } else {
    for (const char* name : {"metrics.jsonl", "train_log.jsonl", "metrics.csv"}) fs::remove(dir / name);
  }

  out << "users " << graph.num_users() << "  items " << graph.num_items() << "  train target edges "
      << split.train_edges[static_cast<std::size_t>(graph.schema().target_index())].size() << "  test edges "
      << split.test_edges.size() << "  chains " << trainer.model().chains().size() << '\n';
  {
    RunLogger logger(dir, config, trainer, out);
    trainer.train(&logger);
  }
  save_checkpoint(trainer.checkpoint(), ckpt_path);
  out << (trainer.stopped() ? "early stop" : "done") << " after epoch " << trainer.epoch() << "; best epoch "
      << trainer.best_epoch() << " (R@" << tc.stop_k << ' ' << fixed(std::max(trainer.best_recall(), 0.0))
      << "); run directory " << dir.string() << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream&) {
  auto tc = train_config_of(config);
  set_num_workers(config.workers);
  const auto graph = load_dataset(config);
  const auto split = split_train_test(graph, config.split_ratio, config.seed);
  const fs::path path = config.checkpoint.empty() ? output_dir(config) / "checkpoint.txt" : fs::path(config.checkpoint);
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  const auto ckpt = load_checkpoint(path);
  check_compatible(ckpt, graph, tc);

  const auto tg = train_graph(graph, split);
  const DcmgnnModel model(tg, tc.model);
  const bool use_best = !config.use_last && ckpt.best.has_value();
  const ModelParams& params = use_best ? *ckpt.best : ckpt.params;
  model.check_params(params);
  const auto result = evaluate(model.final_embeddings(params), graph, split, tc.ks);

  out << "checkpoint " << path.string() << " (epoch " << meta_value(ckpt, "epoch") << ", "
      << (use_best ? "best parameters from epoch " + meta_value(ckpt, "best_epoch") : std::string("last parameters"))
      << ")\n";
  out << "test users " << result.users.size() << '\n';
  for (std::size_t j = 0; j < result.ks.size(); ++j) {
    const int k = result.ks[j];
    out << "R@" << k << ' ' << fixed(result.recall[j]) << "  N@" << k << ' ' << fixed(result.ndcg[j]) << '\n';
  }
  const int gk = sparsity_k(result, 10);
  out << "\nsparsity groups (training interactions per user), k=" << gk << '\n';
  out << std::left << std::setw(10) << "group" << std::setw(8) << "users" << std::setw(12) << ("R@" + std::to_string(gk))
      << ("N@" + std::to_string(gk)) << '\n';
  for (const auto& g : sparsity_groups(result, tg, gk)) {
    out << std::setw(10) << g.label << std::setw(8) << g.users << std::setw(12) << (g.recall ? fixed(*g.recall) : "-")
        << (g.ndcg ? fixed(*g.ndcg) : "-") << '\n';
  }
  out << std::right;
  return 0;
}

int cmd_inspect_patterns(const RunConfig& config, std::ostream& out, std::ostream&) {
  const auto graph = load_dataset(config);
  const auto& schema = graph.schema();
  const auto index = build_pattern_index(graph);
  const double unit = softplus(Vector::Zero(1))[0];
  out << "mask_bits,edge_count,b_column_sum,relations\n";
  for (const auto& mask : enumerate_patterns(schema)) {
    const auto p = static_cast<std::size_t>(mask.index());
    out << mask.to_string(schema.size()) << ',' << index.pattern_edges[p].size() << ','
        << index.counts.col(static_cast<Eigen::Index>(p)).sum() * unit << ',' << mask.name(schema) << '\n';
  }
  const auto order = train_config_of(config).model.chain_order;
  out << "\nchain,mask_bits,length\n";
  for (const auto& chain : enumerate_chains(schema, order)) {
    out << chain.name(schema) << ',' << chain.source_mask.to_string(schema.size()) << ',' << chain.length() << '\n';
  }
  return 0;
}

}  // namespace dcmgnn::cli
