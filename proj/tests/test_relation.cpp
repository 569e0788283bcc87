#include "doctest.h"
#include "dcmgnn/relation.hpp"
#include "support/fixtures.hpp"

using namespace dcmgnn;

TEST_CASE("single edge propagation") {
  const MultiplexBipartiteGraph g(RelationSchema({"buy"}, "buy"), 1, 2, {{{0, 0}}});
  Matrix base(3, 2);
  base << 1, 2, 3, 4, 5, 6;
  const Matrix out = lightgcn_propagate(g, 0, base, 1);
  CHECK(out.row(0) == (base.row(0) + base.row(1)));
  CHECK(out.row(1) == (base.row(1) + base.row(0)));
  CHECK(out.row(2) == base.row(2));  // isolated item keeps its layer-0 row
  CHECK_THROWS(lightgcn_propagate(g, 0, base, 0));
  CHECK_THROWS_AS(lightgcn_propagate(g, 0, Matrix::Zero(2, 2), 1), ShapeError);
}

TEST_CASE("star propagation halves the neighbour sum") {
  const MultiplexBipartiteGraph g(RelationSchema({"buy"}, "buy"), 1, 4, {{{0, 0}, {0, 1}, {0, 2}, {0, 3}}});
  const Matrix base = testing::random_matrix(5, 3, 8);
  const Matrix out = lightgcn_propagate(g, 0, base, 1);
  const Matrix expect = base.row(0) + 0.5 * base.bottomRows(4).colwise().sum();
  CHECK((out.row(0) - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("propagation matches the dense oracle") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto g = testing::random_graph(20, 30, 2, 0.12, seed);
    const Matrix base = testing::random_matrix(50, 4, seed + 40);
    for (int r = 0; r < 2; ++r) {
      const Matrix norm = testing::dense_sym_normalize(testing::dense_adjacency(g, r));
      for (const int layers : {1, 2, 3, 4}) {
        Matrix h = base, acc = base;
        for (int l = 0; l < layers; ++l) {
          h = norm * h;
          acc += h;
        }
        const double scale = std::max(1.0, acc.cwiseAbs().maxCoeff());
        CHECK((lightgcn_propagate(g, r, base, layers) - acc).cwiseAbs().maxCoeff() / scale < 1e-8);
      }
    }
  }
}

TEST_CASE("propagation is linear") {
  const auto g = testing::random_graph(10, 10, 1, 0.3, 2);
  const Matrix x = testing::random_matrix(20, 3, 1), y = testing::random_matrix(20, 3, 2);
  const auto f = [&](const Matrix& m) { return lightgcn_propagate(g, 0, m, 2); };
  CHECK((f(3.0 * x) - 3.0 * f(x)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((f(x + y) - f(x) - f(y)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("relation aggregation") {
  const Matrix t = testing::random_matrix(3, 4, 1);
  const std::vector<Matrix> one{t};
  CHECK(aggregate_relations(one) == t);
  const std::vector<Matrix> opposite{t, -t};
  CHECK(aggregate_relations(opposite).isZero());
  const std::vector<Matrix> ones(3, Matrix::Ones(2, 4));
  CHECK(aggregate_relations(ones) == Matrix::Constant(2, 4, 3.0));
  const std::vector<Matrix> bad{t, Matrix::Zero(2, 2)};
  CHECK_THROWS_AS(aggregate_relations(bad), ShapeError);

  const auto g = testing::random_graph(5, 5, 3, 0.4, 6);
  const auto re = relation_embeddings(g, testing::random_matrix(10, 2, 3), 2);
  CHECK(re.per_relation.size() == 3);
  CHECK((re.aggregated - (re.per_relation[0] + re.per_relation[1] + re.per_relation[2])).isZero());
}
