#include <benchmark/benchmark.h>

#include <random>

#include "dcmgnn/evaluation.hpp"
#include "dcmgnn/model.hpp"
#include "dcmgnn/patterns.hpp"
#include "dcmgnn/relation.hpp"

using namespace dcmgnn;

namespace {

// Random view/cart/buy graph with nested relations, roughly like the synthetic data.
MultiplexBipartiteGraph bench_graph(NodeId users, NodeId items, int views) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<NodeId> pick(0, items - 1);
  std::bernoulli_distribution half(0.5);
  std::vector<std::vector<Edge>> edges(3);
  for (NodeId u = 0; u < users; ++u) {
    for (int k = 0; k < views; ++k) {
      const NodeId i = pick(rng);
      edges[0].push_back({u, i});
      if (half(rng)) {
        edges[1].push_back({u, i});
        if (half(rng)) edges[2].push_back({u, i});
      }
    }
  }
  return MultiplexBipartiteGraph(RelationSchema({"view", "cart", "buy"}, "buy"), users, items, std::move(edges));
}

Matrix random_table(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 0.1);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void BM_Spmm(benchmark::State& state) {
  const auto g = bench_graph(2000, 2000, 20);
  const Csr a = normalized_adjacency(g, 0);
  const Matrix x = random_table(g.num_nodes(), state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(spmm(a, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.nnz()));
}
BENCHMARK(BM_Spmm)->Arg(32)->Arg(64)->Arg(256);

void BM_RelationPropagation(benchmark::State& state) {
  const auto g = bench_graph(2000, 2000, 20);
  const Matrix x = random_table(g.num_nodes(), 64);
  for (auto _ : state) benchmark::DoNotOptimize(lightgcn_propagate(g, 0, x, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_RelationPropagation)->Arg(1)->Arg(2)->Arg(3);

void BM_LocalPropagation(benchmark::State& state) {
  const auto g = bench_graph(2000, 2000, 20);
  const auto patterns = build_all_bbp(g);
  const Matrix x = random_table(g.num_nodes(), 64);
  const auto w = PatternWeights::uniform(pattern_count(3));
  for (auto _ : state) benchmark::DoNotOptimize(propagate_local(aggregate_local(patterns, w), x, 2));
}
BENCHMARK(BM_LocalPropagation);

void BM_GlobalPropagationFactored(benchmark::State& state) {
  const auto g = bench_graph(2000, 2000, 20);
  const auto patterns = build_all_bbp(g);
  const Matrix x = random_table(g.num_nodes(), 64);
  const Matrix b = build_global_matrix(patterns, PatternWeights::uniform(pattern_count(3)));
  for (auto _ : state) benchmark::DoNotOptimize(propagate_global_factored(b, x, 2));
}
BENCHMARK(BM_GlobalPropagationFactored);

void BM_Evaluate(benchmark::State& state) {
  const auto g = bench_graph(1000, 1000, 12);
  const auto split = split_train_test(g, 0.75, 1);
  const Matrix final = random_table(g.num_nodes(), 64);
  const std::vector<int> ks{10, 20};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(final, g, split, ks));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

void BM_LossAndGrad(benchmark::State& state) {
  const auto g = bench_graph(500, 500, 12);
  ModelConfig config;
  config.dim = static_cast<int>(state.range(0));
  const DcmgnnModel model(g, config);
  Rng rng = make_stream(1, "init");
  const ModelParams params = model.init_params(rng);
  std::mt19937_64 pick(3);
  std::uniform_int_distribution<NodeId> item(0, g.num_items() - 1);
  TrainBatch batch;
  const auto& buys = g.edges(2);
  for (std::size_t k = 0; k < 128; ++k) {
    const auto& e = buys[k % buys.size()];
    batch.final_triples.push_back({e.user, e.item, item(pick)});
  }
  for (const auto& chain : model.chains()) {
    const auto& pool = model.patterns().pattern_edges[static_cast<std::size_t>(chain.source_mask.index())];
    std::vector<Triple> triples;
    for (std::size_t k = 0; k < std::min<std::size_t>(128, pool.size()); ++k) {
      triples.push_back({pool[k].user, pool[k].item, item(pick)});
    }
    batch.chain_triples.push_back(std::move(triples));
  }
  ModelParams grads;
  for (auto _ : state) benchmark::DoNotOptimize(model.loss_and_grad(batch, params, grads));
}
BENCHMARK(BM_LossAndGrad)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
