#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"

#include "arrqp/features.hpp"

using namespace arrqp;
using doctest::Approx;

TEST_CASE("statistical features") {
  const std::vector<double> single = {3.0};
  auto s = statistical_features(single);
  CHECK(s.as_array() == std::array<double, 5>{3, 3, 3, 3, 0});

  const std::vector<double> v = {1.0, 2.0, 3.0, 10.0};
  s = statistical_features(v);
  CHECK(s.min == 1.0);
  CHECK(s.max == 10.0);
  CHECK(s.mean == Approx(4.0));
  CHECK(s.median == Approx(2.5));
  CHECK(s.stddev == Approx(3.5355).epsilon(1e-4));

  s = statistical_features({});
  CHECK(s.empty);
  CHECK(s.as_array() == std::array<double, 5>{0, 0, 0, 0, 0});
}

TEST_CASE("statistical features match brute force") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> value(0.01, 20.0);
  std::uniform_int_distribution<int> len(1, 40);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = value(rng);
    const auto s = statistical_features(v);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = v.size();
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    CHECK(std::abs(s.min - sorted.front()) <= 1e-12);
    CHECK(std::abs(s.max - sorted.back()) <= 1e-12);
    CHECK(std::abs(s.mean - mean) <= 1e-12 * std::max(1.0, mean));
    CHECK(std::abs(s.median - median) <= 1e-12 * std::max(1.0, median));
    CHECK(std::abs(s.stddev - std::sqrt(ss / static_cast<double>(n))) <= 1e-12 * std::max(1.0, s.stddev));
  }
}

TEST_CASE("nmf recovers a rank-1 matrix") {
  QosMatrix q(6, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) q.set(i, j, (1.0 + 0.3 * i) * (0.5 + 0.2 * j));
  const auto f = nmf_decompose(q, {1, 5000, 1e-14, 3});
  const double rmse = std::sqrt(nmf_objective(q, f.user_factors, f.service_factors) / 30.0);
  CHECK(rmse < 1e-3);
  CHECK((f.user_factors.array() >= 0.0).all());
}

TEST_CASE("nmf objective never increases") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto q = generate_synthetic(spec).dataset.matrix;
    const auto f = nmf_decompose(q, {4, 200, 0.0, seed});
    for (std::size_t k = 1; k < f.objective.size(); ++k) CHECK(f.objective[k] <= f.objective[k - 1] * (1 + 1e-12));
    const auto g = nmf_decompose(q, {4, 200, 0.0, seed});
    CHECK(f.user_factors == g.user_factors);
  }
}

TEST_CASE("cosine similarity") {
  QosMatrix q(4, 3);
  q.set(0, 0, 1);
  q.set(0, 1, 2);
  q.set(1, 0, 2);
  q.set(1, 1, 4);
  q.set(2, 2, 5);
  const Matrix s = cosine_similarity(q, Side::User);
  CHECK(s(0, 1) == Approx(1.0));
  CHECK(s(0, 2) == 0.0);
  CHECK(s(3, 3) == 0.0);  // no observations
  for (int i = 0; i < 3; ++i) CHECK(s(i, i) == Approx(1.0));
  CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("one-hot context blocks") {
  ContextTable t;
  t.ids = {"a", "b", "c"};
  t.region = {2, 0, 3};
  t.group = {0, 1, 1};
  t.region_names = {"r0", "r1", "r2", "r3"};
  t.group_names = {"g0", "g1"};
  const Matrix m = onehot_context(t);
  CHECK(m.cols() == 3 + 4 + 2);
  CHECK(m.row(0).segment(3, 4) == RowVector((RowVector(4) << 0, 0, 1, 0).finished()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    CHECK(m.row(i).segment(0, 3).sum() == 1.0);
    CHECK(m.row(i).segment(3, 4).sum() == 1.0);
    CHECK(m.row(i).segment(7, 2).sum() == 1.0);
  }
}

TEST_CASE("autoencoder layouts") {
  const auto users = make_autoencoder_config(Side::User, AutoencoderLayout::Table, 507, 50);
  CHECK(users.encoder_sizes.back() == 50);
  CHECK(users.decoder_sizes.back() == 507);
  const auto services = make_autoencoder_config(Side::Service, AutoencoderLayout::Table, 8598, 50);
  CHECK(services.decoder_sizes.back() == 8598);
  const auto small = make_autoencoder_config(Side::Service, AutoencoderLayout::Proportional, 60, 10);
  CHECK(small.encoder_sizes.back() == 10);
  CHECK(small.decoder_sizes.back() == 60);
  CHECK_NOTHROW(small.validate(60));
  CHECK_THROWS_AS(small.validate(61), DimensionError);
}

TEST_CASE("autoencoder learns a linear subspace") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix basis(3, 10), codes(200, 3);
  for (Eigen::Index k = 0; k < basis.size(); ++k) basis.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < codes.size(); ++k) codes.data()[k] = g(rng);
  const Matrix x = 0.3 * codes * basis;

  AutoencoderConfig c;
  c.encoder_sizes = {5};
  c.decoder_sizes = {10};
  c.encoder_activations = {nn::Activation::Linear};
  c.decoder_activations = {nn::Activation::Linear};
  c.optimizer = nn::OptimizerKind::Adam;
  c.learning_rate = 0.01;
  c.max_epochs = 2000;
  c.patience = 50;
  c.batch_size = 0;
  auto ae = train_autoencoder(x, c, 1);
  const double variance = (x.array() - x.mean()).square().mean();
  CHECK(ae.reconstruction_mse(x) < 0.05 * variance);
  const auto& loss = ae.history().train_loss;
  for (std::size_t k = 1; k < loss.size(); ++k) CHECK(loss[k] <= loss[0]);
  CHECK(ae.encode(x).cols() == 5);

  auto again = train_autoencoder(x, c, 1);
  CHECK(again.encode(x) == ae.encode(x));
}

TEST_CASE("embedding assembly") {
  EntityBlocks u{Matrix::Zero(2, 5), Matrix::Zero(2, 50), Matrix::Zero(2, 50), Matrix::Zero(2, 50)};
  EntityBlocks s{Matrix::Zero(3, 5), Matrix::Zero(3, 50), Matrix::Zero(3, 50), Matrix::Zero(3, 50)};
  const auto f = assemble_embedding(u, s, true);
  CHECK(f.width() == 155);
  CHECK(f.n_nodes() == 5);
  CHECK(f.values.isZero());

  EntityBlocks bad = s;
  bad.nmf = Matrix::Zero(3, 49);
  CHECK_THROWS_AS(assemble_embedding(u, bad, true), DimensionError);
}

TEST_CASE("min-max scaling") {
  EntityBlocks u{Matrix::Constant(2, 5, 1.0), Matrix::Zero(2, 1), Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  EntityBlocks s{Matrix::Constant(1, 5, 3.0), Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  u.stat(0, 0) = 2.0;
  const auto f = assemble_embedding(u, s, true);
  CHECK(f.values.minCoeff() >= 0.0);
  CHECK(f.values.maxCoeff() <= 1.0);
  CHECK(f.values(0, 0) == Approx(0.5));
  CHECK(f.values(2, 0) == Approx(1.0));
}
