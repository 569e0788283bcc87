#include "support/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <random>

namespace testing {

dcmgnn::RelationSchema numbered_schema(int relations) {
  std::vector<std::string> names;
  for (int r = 0; r < relations; ++r) names.push_back("r" + std::to_string(r));
  return dcmgnn::RelationSchema(names, names.back());
}

dcmgnn::MultiplexBipartiteGraph random_graph(int users, int items, int relations, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::vector<dcmgnn::Edge>> edges(static_cast<std::size_t>(relations));
  for (int r = 0; r < relations; ++r) {
    for (int u = 0; u < users; ++u) {
      for (int i = 0; i < items; ++i) {
        if (coin(rng)) edges[static_cast<std::size_t>(r)].push_back({u, i});
      }
    }
  }
  return dcmgnn::MultiplexBipartiteGraph(numbered_schema(relations), users, items, std::move(edges));
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Matrix dense_adjacency(const dcmgnn::MultiplexBipartiteGraph& graph, int relation) {
  const auto n = graph.num_nodes();
  Matrix a = Matrix::Zero(n, n);
  for (const auto& e : graph.edges(relation)) {
    a(e.user, graph.item_node(e.item)) = 1.0;
    a(graph.item_node(e.item), e.user) = 1.0;
  }
  return a;
}

Matrix dense_sym_normalize(const Matrix& a) {
  const dcmgnn::Vector deg = a.rowwise().sum();
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0 && deg(i) > 0 && deg(j) > 0) out(i, j) = a(i, j) / std::sqrt(deg(i) * deg(j));
    }
  }
  return out;
}

dcmgnn::MultiplexBipartiteGraph tiny_graph() {
  // 4 users, 6 items; relations view, cart, buy (target).
  dcmgnn::RelationSchema schema({"view", "cart", "buy"}, "buy");
  std::vector<std::vector<dcmgnn::Edge>> edges(3);
  auto& view = edges[0];
  auto& cart = edges[1];
  auto& buy = edges[2];
  view = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 3}, {2, 2}, {2, 4}, {3, 0}, {3, 5}, {1, 4}};
  cart = {{0, 1}, {0, 3}, {1, 3}, {2, 4}, {3, 5}, {2, 1}};
  buy = {{0, 0}, {0, 1}, {1, 3}, {1, 2}, {2, 4}, {3, 5}, {3, 1}};
  return dcmgnn::MultiplexBipartiteGraph(schema, 4, 6, std::move(edges));
}

dcmgnn::TrainBatch tiny_batch(const dcmgnn::DcmgnnModel& model) {
  dcmgnn::TrainBatch batch;
  batch.final_triples = {{0, 0, 4}, {1, 3, 0}, {2, 4, 5}, {3, 5, 2}, {0, 1, 2}};
  batch.chain_triples.resize(model.chains().size());
  for (std::size_t c = 0; c < model.chains().size(); ++c) {
    const auto& pool = model.patterns().pattern_edges[static_cast<std::size_t>(model.chains()[c].source_mask.index())];
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const auto& e = pool[k];
      batch.chain_triples[c].push_back({e.user, e.item, static_cast<dcmgnn::NodeId>((e.item + 1 + k) % 6)});
    }
  }
  return batch;
}

double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double denom = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

Matrix finite_difference(Matrix& x, const std::function<double()>& f, double h) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f();
    x.data()[i] = keep - h;
    const double down = f();
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dcmgnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testing
