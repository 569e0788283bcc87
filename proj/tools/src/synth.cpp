#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "json.hpp"

#include "dcmgnn/rng.hpp"
#include "dcmgnn_cli/cli.hpp"

namespace dcmgnn::cli {

namespace {

void validate(const SynthConfig& c) {
  if (c.users < 1 || c.items < 1) throw ConfigError("synth: --users and --items must be at least 1");
  if (c.clusters < 1 || c.clusters > c.items) throw ConfigError("synth: --clusters must lie in [1, items]");
  if (c.views < 0 || c.carts < 0 || c.buys < 0) throw ConfigError("synth: interaction counts must be non-negative");
  if (c.views > c.items) throw ConfigError("synth: --views exceeds --items");
  if (c.carts > c.views) throw ConfigError("synth: --carts exceeds --views");
  if (c.buys > c.items) throw ConfigError("synth: --buys exceeds --items");
  if (!(c.cluster_bias >= 0.0 && c.cluster_bias <= 1.0)) throw ConfigError("synth: --cluster-bias must lie in [0, 1]");
  if (!(c.cascade >= 0.0 && c.cascade <= 1.0)) throw ConfigError("synth: --cascade must lie in [0, 1]");
}

}  // namespace

SyntheticData generate_synthetic(const SynthConfig& c) {
  validate(c);
  auto rng = make_stream(c.seed, "synth");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> any_item(0, c.items - 1);
  std::uniform_int_distribution<int> any_cluster(0, c.clusters - 1);

  std::vector<std::vector<int>> cluster_items(static_cast<std::size_t>(c.clusters));
  for (int i = 0; i < c.items; ++i) cluster_items[static_cast<std::size_t>(i % c.clusters)].push_back(i);

  SyntheticData data;
  data.schema = RelationSchema({"view", "cart", "buy"}, "buy");
  data.edges.resize(3);
  for (NodeId u = 0; u < c.users; ++u) {
    const auto& own = cluster_items[static_cast<std::size_t>(any_cluster(rng))];
    std::uniform_int_distribution<std::size_t> own_item(0, own.size() - 1);

    std::vector<int> views;
    std::set<int> seen;
    while (static_cast<int>(views.size()) < c.views) {
      // Fall back to the whole catalogue once the cluster is exhausted.
      const bool in_cluster = coin(rng) < c.cluster_bias && seen.size() < own.size();
      const int item = in_cluster ? own[own_item(rng)] : any_item(rng);
      if (seen.insert(item).second) views.push_back(item);
    }
    std::vector<int> carts = views;
    std::shuffle(carts.begin(), carts.end(), rng);
    carts.resize(static_cast<std::size_t>(c.carts));

    std::vector<int> cart_pool = carts;
    std::set<int> bought;
    while (static_cast<int>(bought.size()) < c.buys) {
      if (!cart_pool.empty() && coin(rng) < c.cascade) {
        std::uniform_int_distribution<std::size_t> pick(0, cart_pool.size() - 1);
        const auto j = pick(rng);
        const int item = cart_pool[j];
        cart_pool.erase(cart_pool.begin() + static_cast<std::ptrdiff_t>(j));
        if (bought.insert(item).second) data.cascaded_buys.push_back(Edge{u, item});
      } else {
        const int item = any_item(rng);
        if (bought.insert(item).second) {
          cart_pool.erase(std::remove(cart_pool.begin(), cart_pool.end(), item), cart_pool.end());
        }
      }
    }
    for (const int i : views) data.edges[0].push_back(Edge{u, i});
    for (const int i : carts) data.edges[1].push_back(Edge{u, i});
    for (const int i : bought) data.edges[2].push_back(Edge{u, i});
  }
  for (auto& list : data.edges) std::sort(list.begin(), list.end());
  std::sort(data.cascaded_buys.begin(), data.cascaded_buys.end());
  return data;
}

void write_synthetic(const SyntheticData& data, const SynthConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto user = [](NodeId u) { return "u" + std::to_string(u); };
  const auto item = [](NodeId i) { return "i" + std::to_string(i); };
  {
    std::ofstream out(dir / "interactions.tsv");
    for (std::size_t r = 0; r < data.edges.size(); ++r) {
      for (const auto& e : data.edges[r]) {
        out << user(e.user) << '\t' << item(e.item) << '\t' << data.schema.relations()[r] << '\n';
      }
    }
    if (!out) throw Error("synth: failed to write interactions.tsv");
  }
  {
    std::ofstream out(dir / "ground_truth.tsv");
    out << "user\titem\tfrom_cascade\n";
    for (const auto& e : data.edges[static_cast<std::size_t>(data.schema.target_index())]) {
      const bool cascaded = std::binary_search(data.cascaded_buys.begin(), data.cascaded_buys.end(), e);
      out << user(e.user) << '\t' << item(e.item) << '\t' << (cascaded ? 1 : 0) << '\n';
    }
  }
  {
    nlohmann::ordered_json m;
    m["generator"] = "planted-cascade";
    m["seed"] = c.seed;
    m["users"] = c.users;
    m["items"] = c.items;
    m["clusters"] = c.clusters;
    m["views_per_user"] = c.views;
    m["carts_per_user"] = c.carts;
    m["buys_per_user"] = c.buys;
    m["cluster_bias"] = c.cluster_bias;
    m["cascade"] = c.cascade;
    m["relations"] = data.schema.relations();
    m["target"] = data.schema.target();
    for (std::size_t r = 0; r < data.edges.size(); ++r) {
      m["edges"][data.schema.relations()[r]] = data.edges[r].size();
    }
    m["cascaded_buys"] = data.cascaded_buys.size();
    m["files"] = {"interactions.tsv", "ground_truth.tsv", "run.cfg"};
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "run.cfg");
    out << "# generated by dcmgnn synth\n";
    out << "data=" << std::filesystem::absolute(dir / "interactions.tsv").string() << '\n';
    out << "relations=view,cart,buy\n";
    out << "target=buy\n";
    out << "seed=" << c.seed << '\n';
  }
}

int cmd_synth(const SynthConfig& config, std::ostream& out, std::ostream&) {
  if (config.out.empty()) throw ConfigError("synth: --out is required");
  const auto data = generate_synthetic(config);
  write_synthetic(data, config, config.out);
  out << "wrote " << data.edges[0].size() << " views, " << data.edges[1].size() << " carts, "
      << data.edges[2].size() << " buys (" << data.cascaded_buys.size() << " from carts) to " << config.out << '\n';
  return 0;
}

}  // namespace dcmgnn::cli
