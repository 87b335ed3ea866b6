#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

#include "arrqp/factorization.hpp"
#include "arrqp/mhgcmf.hpp"
#include "gradcheck.hpp"

using namespace arrqp;
namespace at = arrqp::testing;
using doctest::Approx;

namespace {

// u0-s0-u1-s1-u2-s2-u3-s3 as a path; node k < 4 is user k, node 4 + k is service k.
QosMatrix path_graph() {
  QosMatrix q(4, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    q.set(k, k, 1.0 + 0.1 * k);
    if (k + 1 < 4) q.set(k + 1, k, 0.5 + 0.2 * k);
  }
  return q;
}

QosMatrix toy_matrix() {
  QosMatrix q(3, 3);
  q.set(0, 0, 1.2);
  q.set(0, 2, 0.4);
  q.set(1, 1, 2.0);
  q.set(2, 1, 0.9);
  q.set(2, 2, 1.5);
  return q;
}

MhGcmfConfig small(int heads, int blocks, DenseWiring wiring = DenseWiring::PreTransform) {
  MhGcmfConfig c;
  c.n_heads = heads;
  c.blocks = blocks;
  c.hidden_dim = 6;
  c.embedding_dim = 4;
  c.wiring = wiring;
  return c;
}

}  // namespace

TEST_CASE("gcmfu gradients") {
  const SparseMatrix adj = normalize(build_adjacency(toy_matrix()));
  std::mt19937_64 rng(2);
  GcmfUnit unit("u", 5, 7, 4, rng);
  Matrix x = at::probe(6, 5, 1);
  const Matrix r = at::probe(6, 4, 2);
  auto loss = [&] { return unit.forward(adj, x).cwiseProduct(r).sum(); };
  Matrix dx;
  const auto checks = at::check_parameters(unit.parameters(), loss, [&] {
    nn::zero_grads(unit.parameters());
    unit.forward(adj, x);
    dx = unit.backward(r);
  });
  CHECK(at::worst(checks) < 1e-5);
  CHECK(at::relative_error(at::numeric_gradient(x, loss), dx) < 1e-5);
}

TEST_CASE("gcmfu with zero weights outputs zero") {
  const SparseMatrix adj = normalize(build_adjacency(toy_matrix()));
  std::mt19937_64 rng(2);
  GcmfUnit unit("u", 5, 7, 4, rng);
  unit.w1().value.setZero();
  unit.w2().value.setZero();
  CHECK(unit.forward(adj, at::probe(6, 5, 1)).isZero());
  CHECK_THROWS_AS(unit.forward(adj, at::probe(6, 4, 1)), DimensionError);
}

TEST_CASE("gcmfu on the identity graph is a two-layer MLP") {
  SparseMatrix eye(5, 5);
  eye.setIdentity();
  std::mt19937_64 rng(3);
  GcmfUnit unit("u", 3, 4, 2, rng);
  const Matrix x = at::probe(5, 3, 4);
  const Matrix mlp = nn::relu(nn::relu(x * unit.w1().value) * unit.w2().value);
  CHECK((unit.forward(eye, x) - mlp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("single head, single block is one gcmfu") {
  const SparseMatrix adj = normalize(build_adjacency(toy_matrix()));
  MhGcmf model(5, small(1, 1), 9);
  const Matrix x = at::probe(6, 5, 5);
  auto& u = model.unit(0, 0);
  const Matrix expected = nn::relu(adj * nn::relu(adj * (x * u.w1().value)) * u.w2().value);
  CHECK((model.forward(adj, x) - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("identical heads scale through the block conv") {
  const SparseMatrix adj = normalize(build_adjacency(toy_matrix()));
  MhGcmf model(5, small(3, 1), 4);
  for (std::size_t k = 1; k < 3; ++k) {
    model.unit(0, k).w1().value = model.unit(0, 0).w1().value;
    model.unit(0, k).w2().value = model.unit(0, 0).w2().value;
  }
  model.block_conv(0).weight().value << 0.5, 1.0, 2.0;
  model.block_conv(0).bias().value(0, 0) = 0.25;
  const Matrix x = at::probe(6, 5, 6);
  const Matrix single = model.unit(0, 0).forward(adj, x);
  const Matrix expected = (3.5 * single).array() + 0.25;
  CHECK((model.forward(adj, x) - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("end-to-end gradients") {
  // 2 users x 4 services, 6 nodes
  QosMatrix q(2, 4);
  q.set(0, 0, 1.0);
  q.set(0, 1, 0.3);
  q.set(1, 1, 2.0);
  q.set(1, 2, 0.8);
  q.set(1, 3, 1.4);
  const SparseMatrix adj = normalize(build_adjacency(q));
  const Matrix x = at::probe(6, 5, 8);
  nn::LossSpec loss;
  loss.gamma = 0.5;
  for (auto wiring : {DenseWiring::PreTransform, DenseWiring::PerHead}) {
    MhGcmf model(5, small(2, 2, wiring), 12);
    model.final_conv().weight().value << 0.7, -0.4;
    auto f = [&] { return factorization_loss(model.forward(adj, x), 2, q, loss); };
    const auto checks = at::check_parameters(model.parameters(), f, [&] {
      nn::zero_grads(model.parameters());
      const Matrix e = model.forward(adj, x);
      model.backward(factorization_loss_grad(e, 2, q, loss));
    });
    CHECK(at::worst(checks) < 1e-4);
  }
}

TEST_CASE("permuting users permutes the embeddings") {
  const QosMatrix q = toy_matrix();
  const Matrix x = at::probe(6, 5, 3);
  const std::vector<std::size_t> perm = {2, 0, 1};  // new user k is old user perm[k]
  QosMatrix p(3, 3);
  Matrix xp = x;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < 3; ++j)
      if (q.observed(perm[k], j)) p.set(k, j, q.value(perm[k], j));
    xp.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(perm[k]));
  }
  MhGcmf a(5, small(2, 2), 1), b(5, small(2, 2), 1);
  const Matrix ea = a.forward(normalize(build_adjacency(q)), x);
  const Matrix eb = b.forward(normalize(build_adjacency(p)), xp);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK((eb.row(static_cast<Eigen::Index>(k)) - ea.row(static_cast<Eigen::Index>(perm[k]))).cwiseAbs().maxCoeff() < 1e-13);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(eb.row(static_cast<Eigen::Index>(k)).dot(eb.row(3 + static_cast<Eigen::Index>(j))) ==
            Approx(ea.row(static_cast<Eigen::Index>(perm[k])).dot(ea.row(3 + static_cast<Eigen::Index>(j)))));
  }
}

TEST_CASE("two blocks see four hops") {
  const SparseMatrix adj = normalize(build_adjacency(path_graph()));
  MhGcmf model(3, small(1, 2), 5);
  // Keep every unit active so perturbations inside the receptive field propagate.
  const Matrix x = (at::probe(8, 3, 2).array() + 2.0).matrix();
  for (std::size_t b = 0; b < 2; ++b) {
    model.unit(b, 0).w1().value = model.unit(b, 0).w1().value.cwiseAbs();
    model.unit(b, 0).w2().value = model.unit(b, 0).w2().value.cwiseAbs();
  }
  const RowVector base = model.forward(adj, x).row(0);
  auto shifted = [&](Eigen::Index node) {
    Matrix y = x;
    y.row(node).array() += 1.0;
    return RowVector(model.forward(adj, y).row(0));
  };
  CHECK((shifted(3) - base).cwiseAbs().maxCoeff() == 0.0);  // u3, 6 hops
  CHECK((shifted(6) - base).cwiseAbs().maxCoeff() == 0.0);  // s2, 5 hops
  CHECK((shifted(2) - base).cwiseAbs().maxCoeff() > 0.0);   // u2, 4 hops
}

TEST_CASE("factorization prediction and loss") {
  Matrix eu(2, 2), es(2, 2);
  eu << 0, 0, 1, 2;
  es << 3, 4, 0.5, 0.25;
  TrainedSorrqp t(eu, es);
  CHECK(t.predict(0, 1) == 0.0);
  CHECK(t.predict(1, 0) == 11.0);
  CHECK(t.predicted_matrix()(1, 1) == Approx(1.0));
  CHECK_THROWS_AS(t.predict(2, 0), std::out_of_range);

  Matrix e(4, 2);
  e << eu, es;
  QosMatrix q(2, 2);
  q.set(1, 0, 11.0);
  q.set(1, 1, 2.0);
  nn::LossSpec loss;
  loss.gamma = 1.0;
  CHECK(factorization_loss(e, 2, q, loss) == Approx(std::log(2.0)));
}

TEST_CASE("trained embeddings round trip") {
  Matrix eu = at::probe(3, 2, 1), es = at::probe(4, 2, 2);
  TrainedSorrqp t(eu, es);
  const auto dir = std::filesystem::temp_directory_path() / "arrqp_unit_sorrqp";
  save_trained(dir, t);
  const auto back = load_trained(dir);
  CHECK(back.user_embeddings() == eu);
  CHECK(back.service_embeddings() == es);
}
