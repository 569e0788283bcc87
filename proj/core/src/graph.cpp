#include "dcmgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "dcmgnn/rng.hpp"

namespace dcmgnn {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (auto f : split_fields(s, ',')) out.emplace_back(f);
  return out;
}

}  // namespace

RelationSchema::RelationSchema(std::vector<std::string> relations, std::string target,
                               std::vector<std::string> canonical_order)
    : relations_(std::move(relations)), target_(std::move(target)),
      canonical_order_(std::move(canonical_order)) {
  if (relations_.empty() || relations_.size() > static_cast<std::size_t>(kMaxRelations)) {
    throw SchemaError("schema must declare between 1 and " + std::to_string(kMaxRelations) +
                      " relations");
  }
  std::set<std::string> seen;
  for (const auto& r : relations_) {
    if (r.empty()) throw SchemaError("empty relation name");
    if (!seen.insert(r).second) throw SchemaError("duplicate relation name '" + r + "'");
  }
  target_index_ = find(target_);
  if (target_index_ < 0) throw SchemaError("target relation '" + target_ + "' is not declared");
  if (canonical_order_.empty()) {
    for (const auto& r : relations_) {
      if (r != target_) canonical_order_.push_back(r);
    }
    canonical_order_.push_back(target_);
  }
  if (canonical_order_.size() != relations_.size() ||
      std::set<std::string>(canonical_order_.begin(), canonical_order_.end()) != seen) {
    throw SchemaError("canonical order must be a permutation of the relations");
  }
  if (canonical_order_.back() != target_) {
    throw SchemaError("canonical order must end with the target relation '" + target_ + "'");
  }
}

int RelationSchema::find(const std::string& name) const {
  const auto it = std::find(relations_.begin(), relations_.end(), name);
  return it == relations_.end() ? -1 : static_cast<int>(it - relations_.begin());
}

int RelationSchema::index_of(const std::string& name) const {
  const int i = find(name);
  if (i < 0) throw SchemaError("unknown relation '" + name + "'");
  return i;
}

MultiplexBipartiteGraph::MultiplexBipartiteGraph(RelationSchema schema, NodeId num_users,
                                                 NodeId num_items,
                                                 std::vector<std::vector<Edge>> edges)
    : schema_(std::move(schema)), num_users_(num_users), num_items_(num_items),
      edges_(std::move(edges)) {
  if (static_cast<int>(edges_.size()) != schema_.size()) {
    throw SchemaError("edge lists do not match the relation count");
  }
  const NodeId n = num_nodes();
  for (auto& list : edges_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    std::vector<std::pair<NodeId, NodeId>> pairs;
    pairs.reserve(list.size() * 2);
    for (const auto& e : list) {
      if (e.user < 0 || e.user >= num_users_ || e.item < 0 || e.item >= num_items_) {
        throw ShapeError("edge endpoint out of range");
      }
      pairs.emplace_back(e.user, item_node(e.item));
      pairs.emplace_back(item_node(e.item), e.user);
    }
    adjacency_.push_back(Csr::from_pairs(n, n, std::move(pairs)));
  }
}

std::size_t MultiplexBipartiteGraph::num_edges() const {
  std::size_t total = 0;
  for (const auto& l : edges_) total += l.size();
  return total;
}

bool MultiplexBipartiteGraph::has_edge(int relation, NodeId user, NodeId item) const {
  const auto& list = edges_.at(relation);
  return std::binary_search(list.begin(), list.end(), Edge{user, item});
}

std::int64_t MultiplexBipartiteGraph::degree(int relation, NodeId node) const {
  const auto& a = adjacency_.at(relation);
  if (node < 0 || node >= num_nodes()) throw ShapeError("degree: node out of range");
  return a.row_ptr[node + 1] - a.row_ptr[node];
}

std::int64_t degree(const MultiplexBipartiteGraph& graph, int relation, NodeId node) {
  return graph.degree(relation, node);
}

MultiplexBipartiteGraph load_interactions(const std::filesystem::path& path,
                                          const RelationSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open interaction file " + path.string());
  std::unordered_map<std::string, NodeId> users;
  std::unordered_map<std::string, NodeId> items;
  std::vector<std::string> user_names;
  std::vector<std::string> item_names;
  std::vector<std::vector<Edge>> edges(schema.size());

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line, '\t');
    if (fields.size() < 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected user<TAB>item<TAB>relation");
    }
    const int rel = schema.find(std::string(fields[2]));
    if (rel < 0) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": unknown relation '" +
                        std::string(fields[2]) + "'");
    }
    auto [uit, unew] = users.try_emplace(std::string(fields[0]), static_cast<NodeId>(users.size()));
    if (unew) user_names.emplace_back(fields[0]);
    auto [iit, inew] = items.try_emplace(std::string(fields[1]), static_cast<NodeId>(items.size()));
    if (inew) item_names.emplace_back(fields[1]);
    edges[rel].push_back({uit->second, iit->second});
  }
  MultiplexBipartiteGraph g(schema, static_cast<NodeId>(users.size()),
                            static_cast<NodeId>(items.size()), std::move(edges));
  g.user_names = std::move(user_names);
  g.item_names = std::move(item_names);
  return g;
}

void save_graph(const MultiplexBipartiteGraph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& schema = graph.schema();
  {
    std::ofstream meta(dir / "meta.txt");
    meta << "format=dcmgnn-graph-1\n";
    meta << "num_users=" << graph.num_users() << "\n";
    meta << "num_items=" << graph.num_items() << "\n";
    meta << "relations=" << join(schema.relations(), ',') << "\n";
    meta << "target=" << schema.target() << "\n";
    meta << "canonical_order=" << join(schema.canonical_order(), ',') << "\n";
    for (int r = 0; r < schema.size(); ++r) {
      meta << "edges." << schema.relations()[r] << "=" << graph.edges(r).size() << "\n";
    }
  }
  auto write_names = [&](const char* file, const std::vector<std::string>& names) {
    std::ofstream out(dir / file);
    for (const auto& n : names) out << n << "\n";
  };
  write_names("users.txt", graph.user_names);
  write_names("items.txt", graph.item_names);
  for (int r = 0; r < schema.size(); ++r) {
    std::ofstream out(dir / (schema.relations()[r] + ".edges"));
    for (const auto& e : graph.edges(r)) out << e.user << '\t' << e.item << '\n';
  }
}

MultiplexBipartiteGraph load_graph(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "meta.txt");
  if (!meta) throw ParseError("missing " + (dir / "meta.txt").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (kv["format"] != "dcmgnn-graph-1") throw ParseError("unsupported graph format in " + dir.string());
  RelationSchema schema(split_list(kv["relations"]), kv["target"], split_list(kv["canonical_order"]));
  const auto num_users = static_cast<NodeId>(std::stol(kv.at("num_users")));
  const auto num_items = static_cast<NodeId>(std::stol(kv.at("num_items")));
  std::vector<std::vector<Edge>> edges(schema.size());
  for (int r = 0; r < schema.size(); ++r) {
    const auto file = dir / (schema.relations()[r] + ".edges");
    std::ifstream in(file);
    if (!in) throw ParseError("missing " + file.string());
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split_fields(line, '\t');
      if (f.size() != 2) throw ParseError(file.string() + ":" + std::to_string(line_no) + ": bad edge");
      edges[r].push_back({static_cast<NodeId>(std::stol(std::string(f[0]))),
                          static_cast<NodeId>(std::stol(std::string(f[1])))});
    }
  }
  MultiplexBipartiteGraph g(std::move(schema), num_users, num_items, std::move(edges));
  auto read_names = [&](const char* file) {
    std::vector<std::string> names;
    std::ifstream in(dir / file);
    while (std::getline(in, line)) names.push_back(line);
    return names;
  };
  g.user_names = read_names("users.txt");
  g.item_names = read_names("items.txt");
  return g;
}

DatasetSplit split_train_test(const MultiplexBipartiteGraph& graph, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split ratio must lie in (0, 1)");
  const int target = graph.schema().target_index();
  std::vector<Edge> target_edges = graph.edges(target);
  if (target_edges.empty()) throw Error("graph has no target-relation edges to split");

  Rng rng = make_stream(seed, "split");
  std::shuffle(target_edges.begin(), target_edges.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(target_edges.size())));

  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train_edges.resize(graph.schema().size());
  for (int r = 0; r < graph.schema().size(); ++r) {
    if (r != target) split.train_edges[r] = graph.edges(r);
  }
  split.train_edges[target].assign(target_edges.begin(), target_edges.begin() + n_train);
  split.test_edges.assign(target_edges.begin() + n_train, target_edges.end());
  std::sort(split.train_edges[target].begin(), split.train_edges[target].end());
  std::sort(split.test_edges.begin(), split.test_edges.end());
  return split;
}

MultiplexBipartiteGraph train_graph(const MultiplexBipartiteGraph& graph, const DatasetSplit& split) {
  MultiplexBipartiteGraph g(graph.schema(), graph.num_users(), graph.num_items(), split.train_edges);
  g.user_names = graph.user_names;
  g.item_names = graph.item_names;
  return g;
}

}  // namespace dcmgnn
