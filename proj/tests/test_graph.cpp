#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "dcmgnn/graph.hpp"
#include "support/fixtures.hpp"

using namespace dcmgnn;

namespace {

std::string write_file(const std::string& dir, const std::string& name, const std::string& text) {
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream(path) << text;
  return path.string();
}

RelationSchema vcb() { return RelationSchema({"view", "cart", "buy"}, "buy"); }

}  // namespace

TEST_CASE("schema validation") {
  CHECK_NOTHROW(vcb());
  CHECK(vcb().canonical_order() == std::vector<std::string>{"view", "cart", "buy"});
  CHECK(RelationSchema({"buy", "view"}, "buy").canonical_order() == std::vector<std::string>{"view", "buy"});
  CHECK_THROWS_AS(RelationSchema({}, "buy"), SchemaError);
  CHECK_THROWS_AS(RelationSchema({"view", "view", "buy"}, "buy"), SchemaError);
  CHECK_THROWS_AS(RelationSchema({"view", "buy"}, "cart"), SchemaError);
  CHECK_THROWS_AS(RelationSchema({"view", "cart", "buy"}, "buy", {"buy", "view", "cart"}), SchemaError);
  CHECK_THROWS_AS(RelationSchema({"view", "cart", "buy"}, "buy", {"view", "buy"}), SchemaError);
  std::vector<std::string> nine;
  for (int i = 0; i < 9; ++i) nine.push_back("r" + std::to_string(i));
  CHECK_THROWS_AS(RelationSchema(nine, "r0"), SchemaError);
  CHECK(vcb().index_of("cart") == 1);
  CHECK(vcb().find("like") == -1);
  CHECK_THROWS_AS(vcb().index_of("like"), SchemaError);
}

TEST_CASE("graph adjacency is symmetric, bipartite and binary") {
  const auto g = testing::random_graph(7, 9, 3, 0.3, 5);
  for (int r = 0; r < 3; ++r) {
    const Matrix a = g.adjacency(r).to_dense();
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.topLeftCorner(7, 7).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.bottomRightCorner(9, 9).cwiseAbs().maxCoeff() == 0.0);
    CHECK(((a.array() == 0.0) || (a.array() == 1.0)).all());
    for (const auto& e : g.edges(r)) {
      CHECK(e.user < g.num_users());
      CHECK(e.item < g.num_items());
    }
  }
}

TEST_CASE("graph construction rejects out-of-range edges") {
  CHECK_THROWS(MultiplexBipartiteGraph(RelationSchema({"buy"}, "buy"), 2, 2, {{{0, 2}}}));
  CHECK_THROWS(MultiplexBipartiteGraph(RelationSchema({"buy"}, "buy"), 2, 2, {{{2, 0}}}));
  CHECK_THROWS(MultiplexBipartiteGraph(RelationSchema({"view", "buy"}, "buy"), 2, 2, {{{0, 0}}}));
}

TEST_CASE("degree counts neighbours") {
  const MultiplexBipartiteGraph single(RelationSchema({"buy"}, "buy"), 2, 2, {{{0, 1}}});
  CHECK(degree(single, 0, 0) == 1);
  CHECK(degree(single, 0, single.item_node(1)) == 1);
  CHECK(degree(single, 0, 1) == 0);
  const MultiplexBipartiteGraph star(RelationSchema({"buy"}, "buy"), 1, 5, {{{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}}});
  CHECK(degree(star, 0, 0) == 5);
}

TEST_CASE("load_interactions assigns ids in first-seen order") {
  const auto dir = testing::temp_dir("graph_load");
  const auto path = write_file(dir, "x.tsv", "uA\tiX\tview\nuA\tiX\tbuy\nuB\tiY\tcart\nuA\tiX\tview\n");
  const auto g = load_interactions(path, vcb());
  CHECK(g.num_users() == 2);
  CHECK(g.num_items() == 2);
  CHECK(g.edges(0) == std::vector<Edge>{{0, 0}});
  CHECK(g.edges(2) == std::vector<Edge>{{0, 0}});
  CHECK(g.edges(1) == std::vector<Edge>{{1, 1}});
  CHECK(g.user_names == std::vector<std::string>{"uA", "uB"});
  CHECK(g.item_names == std::vector<std::string>{"iX", "iY"});
}

TEST_CASE("load_interactions edge cases") {
  const auto dir = testing::temp_dir("graph_load_edge");
  const auto empty = load_interactions(write_file(dir, "empty.tsv", ""), vcb());
  CHECK(empty.num_users() == 0);
  CHECK(empty.num_items() == 0);
  for (int r = 0; r < 3; ++r) CHECK(empty.adjacency(r).nnz() == 0);

  const auto attrs = load_interactions(write_file(dir, "attrs.tsv", "u\ti\tbuy\t0.5\tred\n\n"), vcb());
  CHECK(attrs.num_edges() == 1);

  try {
    load_interactions(write_file(dir, "bad.tsv", "u\ti\tbuy\nu\ti\n"), vcb());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  try {
    load_interactions(write_file(dir, "rel.tsv", "u\ti\tbuy\nu\ti\tbuy\nu\ti\tlike\n"), vcb());
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_interactions(std::filesystem::path(dir) / "missing.tsv", vcb()), ParseError);
}

TEST_CASE("save and load round-trip") {
  const auto dir = testing::temp_dir("graph_roundtrip");
  auto g = testing::random_graph(6, 8, 3, 0.4, 12);
  g.user_names = {"a", "b", "c", "d", "e", "f"};
  save_graph(g, dir);
  const auto back = load_graph(dir);
  CHECK(back.schema() == g.schema());
  CHECK(back.num_users() == g.num_users());
  CHECK(back.num_items() == g.num_items());
  for (int r = 0; r < 3; ++r) CHECK(back.edges(r) == g.edges(r));
  CHECK(back.user_names == g.user_names);
}

TEST_CASE("split holds out a quarter of the target edges") {
  std::vector<Edge> buys;
  for (int u = 0; u < 10; ++u) {
    for (int i = 0; i < 10; ++i) buys.push_back({u, i});
  }
  const MultiplexBipartiteGraph g(RelationSchema({"view", "buy"}, "buy"), 10, 10, {{{0, 0}, {3, 4}}, buys});
  const auto split = split_train_test(g, 0.75, 1);
  CHECK(split.train_edges[1].size() == 75);
  CHECK(split.test_edges.size() == 25);
  CHECK(split.train_edges[0] == g.edges(0));

  std::set<Edge> all(split.train_edges[1].begin(), split.train_edges[1].end());
  for (const auto& e : split.test_edges) CHECK(all.insert(e).second);
  CHECK(all == std::set<Edge>(buys.begin(), buys.end()));

  const auto again = split_train_test(g, 0.75, 1);
  CHECK(again.test_edges == split.test_edges);
  const auto other = split_train_test(g, 0.75, 2);
  CHECK(other.test_edges != split.test_edges);
}

TEST_CASE("split sizes match integer rounding of three quarters") {
  for (const int n : {1, 2, 3, 5, 6, 7, 10, 101, 333}) {
    std::vector<Edge> buys;
    for (int k = 0; k < n; ++k) buys.push_back({k % 50, k / 50});
    const MultiplexBipartiteGraph g(RelationSchema({"buy"}, "buy"), 50, 10, {buys});
    const auto split = split_train_test(g, 0.75, 0);
    // 3n/4 rounded half up, in integers.
    CHECK(split.train_edges[0].size() == static_cast<std::size_t>((3 * n + 2) / 4));
    CHECK(split.train_edges[0].size() + split.test_edges.size() == buys.size());
  }
}

TEST_CASE("split errors") {
  const MultiplexBipartiteGraph g(RelationSchema({"view", "buy"}, "buy"), 2, 2, {{{0, 0}}, {}});
  CHECK_THROWS(split_train_test(g, 0.75, 0));
  const MultiplexBipartiteGraph h(RelationSchema({"buy"}, "buy"), 2, 2, {{{0, 0}}});
  CHECK_THROWS(split_train_test(h, 0.0, 0));
  CHECK_THROWS(split_train_test(h, 1.0, 0));
}

TEST_CASE("train graph keeps only training edges") {
  const auto g = testing::random_graph(10, 10, 2, 0.5, 4);
  const auto split = split_train_test(g, 0.75, 9);
  const auto t = train_graph(g, split);
  CHECK(t.edges(0) == g.edges(0));
  for (const auto& e : split.test_edges) CHECK_FALSE(t.has_edge(1, e.user, e.item));
}
