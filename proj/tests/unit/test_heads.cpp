#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

#include "arrqp/heads.hpp"
#include "gradcheck.hpp"

using namespace arrqp;
namespace at = arrqp::testing;
using doctest::Approx;

namespace {

// 4 users x 4 services; user 3 and service 3 are grey sheep, user 2 and service 2 are cold.
struct Fixture {
  HeadFeatureSource src;
  GreysheepReport report;
  ColdRegistry cold;

  Fixture() {
    src.user_embedding = at::probe(4, 64, 1);
    src.service_embedding = at::probe(4, 64, 2);
    src.user_initial = at::probe(4, 155, 3);
    src.service_initial = at::probe(4, 155, 4);
    src.user_ga = Vector::LinSpaced(4, 0.1, 0.4);
    src.service_ga = Vector::LinSpaced(4, 0.2, 0.5);
    src.user_counts = {3, 3, 0, 5};
    src.service_counts = {2, 4, 0, 1};
    src.user_context = at::probe(4, 50, 5);
    src.service_context = at::probe(4, 50, 6);
    src.user_nmf = at::probe(4, 50, 7).cwiseAbs();
    src.service_nmf = at::probe(4, 50, 8).cwiseAbs();
    src.user_nmf_mean = src.user_nmf.colwise().mean();
    src.service_nmf_mean = src.service_nmf.colwise().mean();
    report.users = {3};
    report.services = {3};
    cold.users = {false, false, true, false};
    cold.services = {false, false, true, false};
  }
};

}  // namespace

TEST_CASE("mlp output lies in the unit interval") {
  MlpConfig c;
  c.hidden = {8, 4};
  Mlp mlp(6, c, 1);
  const Vector y = mlp.evaluate(at::probe(50, 6, 2) * 100.0);
  CHECK(y.allFinite());
  CHECK(y.minCoeff() >= 0.0);
  CHECK(y.maxCoeff() <= 1.0);
}

TEST_CASE("mlp gradients") {
  MlpConfig c;
  c.hidden = {5, 3};
  Mlp mlp(4, c, 2);
  const Matrix x = at::probe(9, 4, 3);
  const Vector r = at::probe(9, 1, 4);
  auto loss = [&] { return mlp.evaluate(x).dot(r); };
  const auto checks = at::check_parameters(mlp.parameters(), loss, [&] {
    nn::zero_grads(mlp.parameters());
    mlp.forward(x);
    mlp.backward(r);
  });
  CHECK(at::worst(checks) < 1e-5);
}

TEST_CASE("grey-sheep feature widths") {
  Fixture f;
  CHECK(build_grrqp_features(f.src, GreysheepCategory::RegularUserGsService, 0, 3, f.report).size() == 285);
  CHECK(build_grrqp_features(f.src, GreysheepCategory::GsUserRegularService, 3, 0, f.report).size() == 285);
  CHECK(build_grrqp_features(f.src, GreysheepCategory::GsUserGsService, 3, 3, f.report).size() == 442);
  CHECK_THROWS_AS(build_grrqp_features(f.src, GreysheepCategory::GsUserGsService, 0, 3, f.report), RoutingError);
  CHECK_FALSE(greysheep_category(0, 0, f.report).has_value());
  CHECK(*greysheep_category(3, 1, f.report) == GreysheepCategory::GsUserRegularService);
}

TEST_CASE("cold-start features carry no embedding on the cold side") {
  Fixture f;
  const RowVector csu = build_crrqp_features(f.src, ColdCategory::ColdUser, 2, 0, f.cold);
  CHECK(csu.size() == 100 + 64);
  CHECK(csu.head(50) == f.src.user_context.row(2));
  CHECK(csu.segment(50, 50).isZero());
  CHECK(csu.tail(64) == f.src.service_embedding.row(0));

  const RowVector csb = build_crrqp_features(f.src, ColdCategory::ColdBoth, 2, 2, f.cold);
  CHECK(csb.size() == 200);

  f.src.cold_collaborative = ColdCollaborative::Mean;
  const RowVector mean = build_crrqp_features(f.src, ColdCategory::ColdService, 1, 2, f.cold);
  CHECK(mean.tail(50) == f.src.service_nmf_mean);

  CHECK_THROWS_AS(build_crrqp_features(f.src, ColdCategory::ColdUser, 1, 0, f.cold), RoutingError);
  CHECK_NOTHROW(build_crrqp_features(f.src, ColdCategory::ColdUser, 1, 0, f.cold, true));
}

TEST_CASE("cold registry") {
  QosMatrix q(3, 2);
  q.set(0, 0, 1.0);
  q.set(2, 0, 1.0);
  const auto cold = ColdRegistry::from_matrix(q);
  CHECK(cold.cold_user_count() == 1);
  CHECK(cold.cold_service_count() == 1);
  CHECK(cold.user(1));
  CHECK(cold.service(1));
  CHECK_FALSE(cold.user(0));
}

TEST_CASE("head training") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(300, 4);
  Vector y(300);
  for (Eigen::Index k = 0; k < 300; ++k) {
    for (Eigen::Index c = 0; c < 4; ++c) x(k, c) = u(rng);
    y(k) = 2.0 + x(k, 0) - 0.5 * x(k, 1) + 0.1 * x(k, 2) * x(k, 3);
  }
  MlpConfig c;
  c.hidden = {16, 8};
  c.loss.kind = nn::LossKind::Mse;
  c.learning_rate = 0.01;
  c.max_epochs = 200;
  c.patience = 10;
  const auto head = train_head("toy", x, y, c, 4);
  REQUIRE(head.trained);
  const auto& loss = head.history.train_loss;
  REQUIRE(loss.size() >= 5);
  for (std::size_t k = 1; k < 5; ++k) CHECK(loss[k] < loss[k - 1]);

  const Vector p = head.predict(x);
  CHECK(p.minCoeff() >= head.target_min - 1e-12);
  CHECK(p.maxCoeff() <= head.target_max + 1e-12);
  const double mae = (p - y).cwiseAbs().mean();
  const double baseline = (y.array() - y.mean()).abs().mean();
  CHECK(mae < 0.5 * baseline);
}

TEST_CASE("too few pairs leave the head untrained") {
  MlpConfig c;
  c.min_pairs = 30;
  const auto head = train_head("few", at::probe(10, 3, 1), at::probe(10, 1, 2).col(0).array() + 2.0, c, 1);
  CHECK_FALSE(head.trained);
  CHECK_FALSE(train_head("none", Matrix(0, 3), Vector(0), c, 1).trained);
}

TEST_CASE("heads round trip through disk") {
  HeadSet heads;
  MlpConfig c;
  c.hidden = {4};
  c.max_epochs = 5;
  Matrix x = at::probe(60, 3, 1);
  Vector y = (x.col(0).array() + 3.0).matrix();
  heads.grrqp_head(GreysheepCategory::GsUserGsService) = train_head("GRRQP:GSU+GSS", x, y, c, 2);
  const auto dir = std::filesystem::temp_directory_path() / "arrqp_unit_heads";
  std::filesystem::remove_all(dir);
  save_heads(dir, heads);
  const auto back = load_heads(dir);
  const auto& a = heads.grrqp_head(GreysheepCategory::GsUserGsService);
  const auto& b = back.grrqp_head(GreysheepCategory::GsUserGsService);
  REQUIRE(b.trained);
  CHECK((a.predict(x) - b.predict(x)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_FALSE(back.crrqp_head(ColdCategory::ColdUser).trained);
}
