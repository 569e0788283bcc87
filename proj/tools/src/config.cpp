#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcmgnn_cli/cli.hpp"
#include "fields.hpp"

namespace dcmgnn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}
template <class T>
std::string format_value(T v) {
  return std::to_string(v);
}

}  // namespace

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::vector<std::pair<std::string, std::string>> read_flat_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = normalize_key(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

std::string serialize(const RunConfig& config) {
  std::ostringstream out;
  for_each_field(config, [&](const char* name, const char*, const auto& value) {
    out << name << '=' << format_value(value) << '\n';
  });
  return out.str();
}

RelationSchema schema_of(const RunConfig& config) {
  try {
    return RelationSchema(split_list(config.relations), config.target, split_list(config.canonical_order));
  } catch (const SchemaError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  for (const auto& part : split_list(text)) {
    int k = 0;
    const auto res = std::from_chars(part.data(), part.data() + part.size(), k);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size() || k < 1) {
      throw ConfigError("invalid cutoff '" + part + "' in --ks");
    }
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }
  if (ks.empty()) throw ConfigError("--ks needs at least one cutoff");
  std::sort(ks.begin(), ks.end());
  return ks;
}

TrainConfig train_config_of(const RunConfig& c) {
  const auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string("--") + name + " must be at least 1");
  };
  positive(c.dim, "dim");
  positive(c.layers, "layers");
  positive(c.batch_size, "batch-size");
  positive(c.epochs, "epochs");
  positive(c.eval_every, "eval-every");
  positive(c.stop_k, "stop-k");
  positive(c.workers, "workers");
  if (c.patience < 0) throw ConfigError("--patience must be non-negative");
  if (c.checkpoint_every < 0) throw ConfigError("--checkpoint-every must be non-negative");
  if (!(c.lr >= 0.0)) throw ConfigError("--lr must be non-negative");
  if (!(c.lambda >= 0.0)) throw ConfigError("--lambda must be non-negative");
  if (!(c.tau > 0.0)) throw ConfigError("--tau must be positive");
  if (!(c.init_std >= 0.0)) throw ConfigError("--init-std must be non-negative");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw ConfigError("--split-ratio must lie in (0, 1)");

  TrainConfig t;
  t.model.dim = c.dim;
  t.model.layers = c.layers;
  t.model.lambda = c.lambda;
  t.model.mu1 = c.mu1;
  t.model.mu2 = c.mu2;
  t.model.contrast.tau = c.tau;
  t.model.contrast.mu = c.mu_scale;
  t.model.contrast.leaky_slope = c.leaky_slope;
  t.model.raw_local_adj = c.raw_local_adj;
  t.model.separate_base = c.separate_base;
  t.model.per_user_weights = c.per_user_weights;
  t.model.init_std = c.init_std;
  if (c.chain_score == "last") {
    t.model.chain_score = ChainScore::LastStep;
  } else if (c.chain_score == "aggregated") {
    t.model.chain_score = ChainScore::Aggregated;
  } else {
    throw ConfigError("--chain-score must be 'last' or 'aggregated', got '" + c.chain_score + "'");
  }
  if (c.global_norm == "row") {
    t.model.global_norm = GlobalNorm::Row;
  } else if (c.global_norm == "symmetric") {
    t.model.global_norm = GlobalNorm::Symmetric;
  } else {
    throw ConfigError("--global-norm must be 'row' or 'symmetric', got '" + c.global_norm + "'");
  }
  t.model.chain_order = split_list(c.chain_order);
  t.lr = c.lr;
  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.eval_every = c.eval_every;
  t.patience = c.patience;
  t.stop_k = c.stop_k;
  t.ks = parse_ks(c.ks);
  t.seed = c.seed;
  return t;
}

std::filesystem::path output_dir(const RunConfig& config) {
  if (!config.out.empty()) return config.out;
  const char* root = std::getenv(kOutRootEnv);
  const std::filesystem::path base = (root != nullptr && *root != '\0') ? root : "runs";
  const auto stem = config.data.empty() ? std::string("run") : std::filesystem::path(config.data).stem().string();
  return base / (stem + "-seed" + std::to_string(config.seed));
}

}  // namespace dcmgnn::cli
