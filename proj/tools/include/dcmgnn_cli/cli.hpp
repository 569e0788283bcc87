#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcmgnn/graph.hpp"
#include "dcmgnn/training.hpp"

namespace dcmgnn::cli {

inline constexpr const char* kOutRootEnv = "DCMGNN_OUT_ROOT";

// Bad flags, config keys or paths; mapped to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options shared by train, evaluate and inspect-patterns.
struct RunConfig {
  std::string data;
  std::string relations = "view,cart,buy";
  std::string target = "buy";
  std::string canonical_order;
  double split_ratio = 0.75;
  std::uint64_t seed = 0;
  std::string out;
  int workers = 1;

  int dim = 64;
  int layers = 2;
  double lr = 1e-3;
  int batch_size = 128;
  int epochs = 200;
  int eval_every = 1;
  int patience = 20;
  int stop_k = 10;
  double lambda = 1e-4;
  double mu1 = 0.1;
  double mu2 = 0.5;
  double tau = 0.1;
  double mu_scale = 1.0;
  double leaky_slope = 0.01;
  double init_std = 0.1;
  std::string ks = "5,10,20,40";

  bool raw_local_adj = false;
  bool separate_base = false;
  bool per_user_weights = false;
  std::string chain_score = "last";
  std::string global_norm = "row";
  std::string chain_order;

  bool csv = false;
  bool resume = false;
  int checkpoint_every = 0;
  std::string checkpoint;
  bool use_last = false;
};

struct SynthConfig {
  int users = 500;
  int items = 500;
  int clusters = 10;
  int views = 12;
  int carts = 6;
  int buys = 4;
  double cluster_bias = 0.8;
  double cascade = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

// One `key=value` entry per line; '#' starts a comment, blank lines are
// skipped and '-' / '_' are interchangeable in keys. An empty value keeps the
// option's default.
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::filesystem::path& path);
std::string normalize_key(std::string key);

// key=value lines for every option, reloadable with --config.
std::string serialize(const RunConfig& config);

RelationSchema schema_of(const RunConfig& config);
TrainConfig train_config_of(const RunConfig& config);
std::vector<int> parse_ks(const std::string& text);
std::filesystem::path output_dir(const RunConfig& config);

struct SyntheticData {
  RelationSchema schema;
  std::vector<std::vector<Edge>> edges;  // per relation
  std::vector<Edge> cascaded_buys;       // buys drawn from the user's cart
};

// Planted cascade: users view items mostly from their own cluster, cart a
// subset of the views and buy from their cart with probability `cascade`
// (otherwise a random catalogue item).
SyntheticData generate_synthetic(const SynthConfig& config);
// interactions.tsv, ground_truth.tsv, manifest.json and run.cfg.
void write_synthetic(const SyntheticData& data, const SynthConfig& config, const std::filesystem::path& dir);

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_inspect_patterns(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthConfig& config, std::ostream& out, std::ostream& err);

// Keeps large embedding temporaries on the heap instead of fresh mmaps (glibc only).
void tune_allocator();

// Full command line (without the program name). Returns the exit code:
// 0 success, 1 usage or config error, 2 runtime error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcmgnn::cli
