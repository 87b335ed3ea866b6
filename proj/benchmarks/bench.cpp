#include <random>

#include <benchmark/benchmark.h>

#include "arrqp/pipeline.hpp"

using namespace arrqp;

namespace {

QosMatrix random_matrix(std::size_t n, std::size_t m, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(density);
  std::lognormal_distribution<double> value(0.0, 0.8);
  QosMatrix q(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (edge(rng)) q.set(i, j, value(rng));
  return q;
}

Matrix random_features(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return Matrix::NullaryExpr(rows, cols, [&] { return u(rng); });
}

void BM_NormalizeAdjacency(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const QosMatrix q = random_matrix(n, 5 * n, 0.1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(normalize(build_adjacency(q)));
}
BENCHMARK(BM_NormalizeAdjacency)->Arg(100)->Arg(339);

void BM_AdjacencyTimesFeatures(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const QosMatrix q = random_matrix(n, 5 * n, 0.1, 1);
  const SparseMatrix adj = normalize(build_adjacency(q));
  const Matrix x = random_features(adj.rows(), 128, 2);
  for (auto _ : state) {
    Matrix y = adj * x;
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * adj.nonZeros() * 128);
}
BENCHMARK(BM_AdjacencyTimesFeatures)->Arg(100)->Arg(339);

void BM_GcmfUnitForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const QosMatrix q = random_matrix(n, 5 * n, 0.1, 1);
  const SparseMatrix adj = normalize(build_adjacency(q));
  const Matrix x = random_features(adj.rows(), 155, 3);
  std::mt19937_64 rng(4);
  GcmfUnit unit("u", 155, 128, 64, rng);
  const Matrix grad = Matrix::Ones(adj.rows(), 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(unit.forward(adj, x).data());
    benchmark::DoNotOptimize(unit.backward(grad).data());
  }
}
BENCHMARK(BM_GcmfUnitForwardBackward)->Arg(100)->Arg(339)->Unit(benchmark::kMillisecond);

void BM_MhGatForward(benchmark::State& state) {
  const QosMatrix q = random_matrix(100, 500, 0.1, 1);
  const SparseMatrix adj = normalize(build_adjacency(q));
  const Matrix x = random_features(adj.rows(), 155, 3);
  MhGatConfig c;
  c.n_heads = static_cast<int>(state.range(0));
  c.head_dim = 32;
  MhGat model(155, c, 5);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(adj, x).data());
}
BENCHMARK(BM_MhGatForward)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_IsolationForest(benchmark::State& state) {
  const QosMatrix q = random_matrix(200, 1000, static_cast<double>(state.range(0)) / 100.0, 6);
  IsolationForestOptions o;
  o.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(detect_outliers(q, 0.1, o).removed.size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.observed_count()));
}
BENCHMARK(BM_IsolationForest)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_GreysheepScores(benchmark::State& state) {
  const QosMatrix q = random_matrix(339, 2000, 0.1, 8);
  for (auto _ : state) benchmark::DoNotOptimize(detect_greysheep(q, 2.0).users.size());
}
BENCHMARK(BM_GreysheepScores)->Unit(benchmark::kMillisecond);

void BM_PredictSorrqp(benchmark::State& state) {
  TrainedSorrqp model(random_features(339, 64, 9), random_features(5825, 64, 10));
  model.predicted_matrix();
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict(k % 339, (k * 7919) % 5825));
    ++k;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PredictSorrqp);

void BM_PredictRouted(benchmark::State& state) {
  Predictor p;
  p.sorrqp = TrainedSorrqp(random_features(339, 64, 9), random_features(5825, 64, 10));
  p.sorrqp.predicted_matrix();
  p.greysheep.users = {3, 50, 200};
  p.greysheep.services = {10, 4000};
  p.cold.users.assign(339, false);
  p.cold.services.assign(5825, false);
  p.cold.users[7] = true;
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.predict(k % 339, (k * 7919) % 5825));
    ++k;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PredictRouted);

}  // namespace

BENCHMARK_MAIN();
