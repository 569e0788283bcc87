#include <cmath>

#include "doctest.h"
#include "dcmgnn/patterns.hpp"
#include "support/fixtures.hpp"

using namespace dcmgnn;

namespace {

// Per-pair mask of a graph computed straight from its edge lists.
std::vector<std::uint32_t> pair_masks(const MultiplexBipartiteGraph& g) {
  std::vector<std::uint32_t> mask(static_cast<std::size_t>(g.num_users() * g.num_items()), 0);
  for (int r = 0; r < g.schema().size(); ++r) {
    for (const auto& e : g.edges(r)) mask[static_cast<std::size_t>(e.user * g.num_items() + e.item)] |= 1U << r;
  }
  return mask;
}

Csr identity(int n) {
  std::vector<std::pair<NodeId, NodeId>> diag;
  for (int i = 0; i < n; ++i) diag.emplace_back(i, i);
  return Csr::from_pairs(n, n, diag);
}

// Dense reference of the local channel: sum_p softmax_p * A_p, normalized,
// then the mean of its first `layers` powers applied to x.
Matrix dense_local(const MultiplexBipartiteGraph& g, const Vector& logits, const Matrix& x, int layers) {
  const auto masks = pair_masks(g);
  const Vector w = logits.array().exp() / logits.array().exp().sum();
  Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
  for (NodeId u = 0; u < g.num_users(); ++u) {
    for (NodeId i = 0; i < g.num_items(); ++i) {
      const auto m = masks[static_cast<std::size_t>(u * g.num_items() + i)];
      if (m == 0) continue;
      a(u, g.item_node(i)) = a(g.item_node(i), u) = w(static_cast<Eigen::Index>(m) - 1);
    }
  }
  const Matrix norm = testing::dense_sym_normalize(a);
  Matrix h = x, acc = Matrix::Zero(x.rows(), x.cols());
  for (int l = 0; l < layers; ++l) {
    h = norm * h;
    acc += h;
  }
  return acc / layers;
}

// Dense reference of the global channel from per-node pattern counts.
Matrix dense_global(const MultiplexBipartiteGraph& g, const Vector& logits, const Matrix& x, int layers) {
  const auto masks = pair_masks(g);
  const int npat = pattern_count(g.schema().size());
  Matrix b = Matrix::Zero(g.num_nodes(), npat);
  for (NodeId u = 0; u < g.num_users(); ++u) {
    for (NodeId i = 0; i < g.num_items(); ++i) {
      const auto m = masks[static_cast<std::size_t>(u * g.num_items() + i)];
      if (m == 0) continue;
      b(u, m - 1) += 1.0;
      b(g.item_node(i), m - 1) += 1.0;
    }
  }
  for (int p = 0; p < npat; ++p) b.col(p) *= std::log(1.0 + std::exp(logits(p)));
  Matrix s = b * b.transpose();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double t = s.row(i).sum();
    if (t > 0) s.row(i) /= t;
  }
  Matrix h = x;
  for (int l = 0; l < layers; ++l) h = s * h;
  return h;
}

double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("pattern enumeration") {
  CHECK(enumerate_patterns(testing::numbered_schema(3)).size() == 7);
  CHECK(enumerate_patterns(testing::numbered_schema(4)).size() == 15);
  const auto one = enumerate_patterns(testing::numbered_schema(1));
  REQUIRE(one.size() == 1);
  CHECK(one[0].bits == 1U);
  const auto three = enumerate_patterns(testing::numbered_schema(3));
  for (std::size_t p = 0; p < three.size(); ++p) {
    CHECK(three[p].bits == p + 1);
    CHECK(three[p].index() == static_cast<int>(p));
  }
  const RelationSchema s({"view", "cart", "buy"}, "buy");
  CHECK(PatternMask{5}.name(s) == "view&buy");
  CHECK(PatternMask{5}.to_string(3) == "101");
  CHECK(PatternMask{7}.count() == 3);
}

TEST_CASE("exact-mask semantics on the two-behaviour example") {
  const RelationSchema s({"view", "cart", "buy"}, "buy");
  // u0-i0 has exactly {view, buy}; u1-i1 has all three; u1-i0 is view only.
  const MultiplexBipartiteGraph g(s, 2, 2, {{{0, 0}, {1, 1}, {1, 0}}, {{1, 1}}, {{0, 0}, {1, 1}}});
  const auto view_buy = build_bbp_matrix(g, PatternMask{0b101});
  const auto view = build_bbp_matrix(g, PatternMask{0b001});
  const auto all = build_bbp_matrix(g, PatternMask{0b111});
  CHECK(view_buy.edges == std::vector<Edge>{{0, 0}});
  CHECK(view.edges == std::vector<Edge>{{1, 0}});
  CHECK(all.edges == std::vector<Edge>{{1, 1}});
  CHECK(view_buy.matrix.find(0, g.item_node(0)) >= 0);
  CHECK(view_buy.matrix.find(g.item_node(0), 0) >= 0);

  const MultiplexBipartiteGraph only_view(s, 2, 2, {{{0, 0}, {1, 1}}, {}, {}});
  CHECK(build_bbp_matrix(only_view, PatternMask{1}).edges == only_view.edges(0));
  CHECK(build_bbp_matrix(only_view, PatternMask{0b101}).edges.empty());
  CHECK_THROWS(build_bbp_matrix(only_view, PatternMask{0}));
}

TEST_CASE("pattern matrices match the per-pair oracle and partition the union") {
  std::uint64_t seed = 100;
  for (const int relations : {2, 3, 4}) {
    for (const double p : {0.1, 0.3, 0.5}) {
      const auto g = testing::random_graph(8, 8, relations, p, ++seed);
      const auto masks = pair_masks(g);
      const auto all = build_all_bbp(g);
      Matrix sum = Matrix::Zero(g.num_nodes(), g.num_nodes());
      for (const auto& bbp : all) {
        std::vector<Edge> expect;
        for (NodeId u = 0; u < 8; ++u) {
          for (NodeId i = 0; i < 8; ++i) {
            if (masks[static_cast<std::size_t>(u * 8 + i)] == bbp.mask.bits) expect.push_back({u, i});
          }
        }
        CHECK(bbp.edges == expect);
        const Matrix dense = bbp.matrix.to_dense();
        CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
        sum += dense;
      }
      Matrix uni = Matrix::Zero(g.num_nodes(), g.num_nodes());
      for (int r = 0; r < relations; ++r) uni = uni.cwiseMax(testing::dense_adjacency(g, r));
      CHECK((sum - uni).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("pattern index agrees with the individual pattern matrices") {
  const auto g = testing::random_graph(9, 7, 3, 0.4, 77);
  const auto all = build_all_bbp(g);
  const auto idx = build_pattern_index(g);
  const auto rows = idx.union_adjacency.entry_rows();
  for (std::size_t k = 0; k < idx.union_adjacency.nnz(); ++k) {
    const auto& m = all[static_cast<std::size_t>(idx.entry_pattern[k])].matrix;
    CHECK(m.find(rows[k], idx.union_adjacency.col[k]) >= 0);
  }
  for (std::size_t p = 0; p < all.size(); ++p) {
    CHECK(idx.pattern_edges[p] == all[p].edges);
    const Matrix dense = all[p].matrix.to_dense();
    CHECK((idx.counts.col(static_cast<Eigen::Index>(p)) - dense.rowwise().sum()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("local aggregation") {
  const auto g = testing::random_graph(6, 6, 3, 0.4, 3);
  const auto all = build_all_bbp(g);
  const auto w = PatternWeights::uniform(7);
  CHECK(softmax(w.local_logits).isApprox(Vector::Constant(7, 1.0 / 7.0)));
  const Csr raw = aggregate_local(all, w, false);
  for (const double v : raw.values) CHECK(v == doctest::Approx(1.0 / 7.0));
  const Matrix sym = aggregate_local(all, w).to_dense();
  CHECK((sym - sym.transpose()).cwiseAbs().maxCoeff() < 1e-15);

  const MultiplexBipartiteGraph empty(testing::numbered_schema(2), 3, 3, {{}, {}});
  CHECK(aggregate_local(build_all_bbp(empty), PatternWeights::uniform(3)).nnz() == 0);

  const MultiplexBipartiteGraph edge(RelationSchema({"buy"}, "buy"), 1, 1, {{{0, 0}}});
  const Csr one = aggregate_local(build_all_bbp(edge), PatternWeights::uniform(1));
  CHECK(one.values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("local propagation hand cases") {
  const Matrix x = testing::random_matrix(2, 3, 1);
  CHECK(propagate_local(identity(2), x, 3).isApprox(x));
  CHECK(propagate_local(Csr::from_pairs(2, 2, {}), x, 2).isZero());
  const Csr swap = Csr::from_pairs(2, 2, {{0, 1}, {1, 0}});
  Matrix swapped(2, 3);
  swapped << x.row(1), x.row(0);
  CHECK(propagate_local(swap, x, 2).isApprox(0.5 * (swapped + x)));
  CHECK_THROWS(propagate_local(swap, x, 0));
}

TEST_CASE("global matrix and similarity") {
  const MultiplexBipartiteGraph star(RelationSchema({"buy"}, "buy"), 1, 3, {{{0, 0}, {0, 1}, {0, 2}}});
  PatternWeights w = PatternWeights::uniform(1);
  w.global_logits(0) = std::log(std::exp(1.0) - 1.0);  // softplus = 1
  const Matrix b = build_global_matrix(build_all_bbp(star), w);
  CHECK(b(0, 0) == doctest::Approx(3.0));
  CHECK(b(1, 0) == doctest::Approx(1.0));

  const auto g = testing::random_graph(4, 5, 3, 0.5, 9);
  const auto bg = build_global_matrix(build_all_bbp(g), PatternWeights::uniform(7));
  const auto masks = pair_masks(g);
  for (int p = 0; p < 7; ++p) {
    if (std::none_of(masks.begin(), masks.end(), [&](auto m) { return m == static_cast<std::uint32_t>(p + 1); })) {
      CHECK(bg.col(p).isZero());
    }
  }

  const Matrix s = build_global_similarity(bg);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (bg.row(i).isZero()) {
      CHECK(s.row(i).isZero());
    } else {
      CHECK(s.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK(build_global_similarity(Matrix::Zero(3, 2)).isZero());

  Matrix twins(3, 2);
  twins << 1, 2, 1, 2, 0, 5;
  const Matrix st = build_global_similarity(twins);
  CHECK(st.row(0) == st.row(1));
}

TEST_CASE("global propagation hand cases") {
  const Matrix x = testing::random_matrix(3, 2, 4);
  CHECK(propagate_global(Matrix::Identity(3, 3), x, 2).isApprox(x));
  CHECK(propagate_global(Matrix::Zero(3, 3), x, 1).isZero());
  const Matrix equal = Matrix::Constant(3, 3, 1.0 / 3.0);
  const Matrix out = propagate_global(equal, x, 1);
  for (int i = 0; i < 3; ++i) CHECK(out.row(i).isApprox(x.colwise().mean()));
}

TEST_CASE("propagation matches dense matrix-power references") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const int relations = 2 + static_cast<int>(seed % 3);
    const auto g = testing::random_graph(20, 25, relations, 0.15, seed);
    const int npat = pattern_count(relations);
    PatternWeights w;
    w.local_logits = testing::random_matrix(npat, 1, seed + 100);
    w.global_logits = testing::random_matrix(npat, 1, seed + 200);
    const Matrix x = testing::random_matrix(g.num_nodes(), 4, seed + 300);
    const auto all = build_all_bbp(g);
    for (const int layers : {1, 2, 3}) {
      CHECK(rel_err(propagate_local(aggregate_local(all, w), x, layers), dense_local(g, w.local_logits, x, layers)) <
            1e-8);
      const Matrix ref = dense_global(g, w.global_logits, x, layers);
      const Matrix b = build_global_matrix(all, w);
      CHECK(rel_err(propagate_global(build_global_similarity(b), x, layers), ref) < 1e-8);
      CHECK(rel_err(propagate_global_factored(b, x, layers), ref) < 1e-8);
      CHECK(rel_err(propagate_global_factored(b, x, layers, GlobalNorm::Symmetric),
                    propagate_global(build_global_similarity(b, GlobalNorm::Symmetric), x, layers)) < 1e-8);
    }
  }
}

TEST_CASE("propagation is linear in the base embeddings") {
  const auto g = testing::random_graph(10, 12, 3, 0.3, 21);
  const auto all = build_all_bbp(g);
  const auto w = PatternWeights::uniform(7);
  const Csr adj = aggregate_local(all, w);
  const Matrix b = build_global_matrix(all, w);
  const Matrix x = testing::random_matrix(22, 3, 1), y = testing::random_matrix(22, 3, 2);
  const auto local = [&](const Matrix& m) { return propagate_local(adj, m, 2); };
  const auto global = [&](const Matrix& m) { return propagate_global_factored(b, m, 2); };
  CHECK(rel_err(local(2.5 * x), 2.5 * local(x)) < 1e-9);
  CHECK(rel_err(local(x + y), local(x) + local(y)) < 1e-9);
  CHECK(rel_err(global(2.5 * x), 2.5 * global(x)) < 1e-9);
  CHECK(rel_err(global(x + y), global(x) + global(y)) < 1e-9);
}

TEST_CASE("ebp averaging") {
  const Matrix h = testing::random_matrix(3, 2, 1);
  CHECK(ebp_embeddings(h, h).isApprox(h));
  CHECK(ebp_embeddings(h, -h).isZero());
  Matrix a(1, 2), b(1, 2), expect(1, 2);
  a << 2, 0;
  b << 0, 2;
  expect << 1, 1;
  CHECK(ebp_embeddings(a, b) == expect);
  CHECK_THROWS_AS(ebp_embeddings(h, Matrix::Zero(2, 2)), ShapeError);
}
