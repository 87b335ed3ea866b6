#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"

#include "arrqp/graph.hpp"

using namespace arrqp;
using doctest::Approx;

TEST_CASE("single invocation") {
  QosMatrix q(1, 1);
  q.set(0, 0, 0.7);
  const Matrix a = Matrix(build_adjacency(q));
  CHECK(a == Matrix::Ones(2, 2));
  const Matrix n = Matrix(normalize(build_adjacency(q)));
  CHECK((n.array() - 0.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("isolated user keeps only its self loop") {
  QosMatrix q(2, 1);
  q.set(0, 0, 1.0);
  const Matrix a = Matrix(build_adjacency(q));
  CHECK(a.row(1) == RowVector((RowVector(3) << 0, 1, 0).finished()));
  const Matrix n = Matrix(normalize(build_adjacency(q)));
  CHECK(n.row(1) == RowVector((RowVector(3) << 0, 1, 0).finished()));
}

TEST_CASE("star graph") {
  QosMatrix q(1, 3);
  for (std::size_t j = 0; j < 3; ++j) q.set(0, j, 1.0 + j);
  const Matrix n = Matrix(normalize(build_adjacency(q)));
  for (int k = 1; k <= 3; ++k) CHECK(n(0, k) == Approx(0.35355).epsilon(1e-5));
  CHECK(n(0, 0) == Approx(0.25));
}

TEST_CASE("regular graph rows sum to one") {
  QosMatrix q(3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    q.set(i, i, 1.0);
    q.set(i, (i + 1) % 3, 1.0);
  }
  const Matrix n = Matrix(normalize(build_adjacency(q)));
  CHECK((n.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("only training edges enter the adjacency") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution edge(0.3);
  QosMatrix train(6, 7);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 7; ++j)
      if (edge(rng)) train.set(i, j, 1.0);
  train.clear(0, 6);
  train.clear(5, 0);
  QosMatrix more = train;
  more.set(0, 6, 2.0);
  more.set(5, 0, 2.0);
  const Matrix a = Matrix(build_adjacency(train)), b = Matrix(build_adjacency(more));
  auto touched = [](Eigen::Index r, Eigen::Index c) {
    return (r == 0 && c == 12) || (r == 12 && c == 0) || (r == 5 && c == 6) || (r == 6 && c == 5);
  };
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (touched(r, c)) {
        CHECK(a(r, c) == 0.0);
        CHECK(b(r, c) == 1.0);
      } else {
        CHECK(a(r, c) == b(r, c));
      }
    }
}

TEST_CASE("neighbourhoods include the node itself") {
  QosMatrix q(2, 2);
  q.set(0, 1, 1.0);
  const auto nb = neighborhoods(normalize(build_adjacency(q)));
  REQUIRE(nb.size() == 4);
  CHECK(nb[0].size() == 2);
  CHECK(nb[1].size() == 1);
  CHECK(nb[1][0] == 1);
}

TEST_CASE("symmetry and spectrum on random graphs") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  std::bernoulli_distribution edge(0.35);
  for (int g = 0; g < 30; ++g) {
    QosMatrix q(size(rng), size(rng));
    for (std::size_t i = 0; i < q.n_users(); ++i)
      for (std::size_t j = 0; j < q.n_services(); ++j)
        if (edge(rng)) q.set(i, j, 1.0);
    const Eigen::MatrixXd n = Matrix(normalize(build_adjacency(q)));
    CHECK((n - n.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(n);
    CHECK(eig.eigenvalues().minCoeff() >= -1.0 - 1e-12);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
}
