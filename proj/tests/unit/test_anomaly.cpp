#include <algorithm>
#include <random>

#include "doctest.h"

#include "arrqp/anomaly.hpp"

using namespace arrqp;
using doctest::Approx;

namespace {

QosMatrix fixture() { return read_qos_matrix(std::string(ARRQP_FIXTURE_DIR) + "/greysheep_4users.txt"); }

}  // namespace

TEST_CASE("reliability from the spread of each QIV") {
  // population std per row: 0, 0.5, 0.5, 4
  QosMatrix q(4, 2);
  const double rows[4][2] = {{1, 1}, {1, 2}, {2, 3}, {1, 9}};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) q.set(i, j, rows[i][j]);
  const auto r = reliability_scores(q);
  CHECK(r.user(0) == Approx(1.0));
  CHECK(r.user(1) == Approx(0.875));
  CHECK(r.user(2) == Approx(0.875));
  CHECK(r.user(3) == Approx(0.0));
}

TEST_CASE("equal spreads give full reliability") {
  QosMatrix q(2, 2);
  q.set(0, 0, 1);
  q.set(0, 1, 2);
  q.set(1, 0, 5);
  q.set(1, 1, 6);
  const auto r = reliability_scores(q);
  CHECK(r.user(0) == 1.0);
  CHECK(r.user(1) == 1.0);
}

TEST_CASE("trimmed mean") {
  const std::vector<double> v = {1, 5, 2, 100};
  CHECK(trimmed_mean(v) == Approx(3.5));
  const std::vector<double> two = {1, 3};
  CHECK(trimmed_mean(two) == Approx(2.0));
  CHECK(trimmed_mean({}) == 0.0);
}

TEST_CASE("GA scores on the four-user fixture") {
  const QosMatrix q = fixture();
  const auto rel = reliability_scores(q);
  CHECK(rel.service(0) == Approx(0.0));
  CHECK(rel.service(1) == Approx(1.0));
  const auto ga = ga_scores(q, rel);
  CHECK(ga.user(0) == Approx(0.75));
  CHECK(ga.user(1) == Approx(1.0));
  CHECK(ga.user(2) == Approx(1.25));
  CHECK(ga.user(3) == Approx(3.0));

  const auto report = detect_greysheep(ga, 1.0);
  CHECK(report.tau_user == Approx(2.3839).epsilon(1e-4));
  CHECK(report.users == std::vector<std::size_t>{3});
  CHECK(report.is_user(3));
  CHECK_FALSE(report.is_user(0));
  CHECK(detect_greysheep(ga, 100.0).users.empty());
  CHECK(detect_greysheep(ga, 100.0).services.empty());
}

TEST_CASE("deviations on the least reliable service do not count") {
  const QosMatrix base = fixture();
  QosMatrix q(5, 2);
  for (const auto& e : base.entries()) q.set(e.user, e.service, e.value);
  q.set(4, 0, 50.0);  // only service 0, whose reliability is 0
  const auto ga = ga_scores(q, reliability_scores(q));
  CHECK(reliability_scores(q).service(0) == 0.0);
  CHECK(ga.user(4) == 0.0);
}

TEST_CASE("threshold is scale covariant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  GaScores ga;
  ga.user = Vector::NullaryExpr(20, [&] { return u(rng); });
  ga.service = Vector::NullaryExpr(15, [&] { return u(rng); });
  GaScores scaled = ga;
  scaled.user *= 3.0;
  scaled.service *= 3.0;
  const auto a = detect_greysheep(ga, 1.0), b = detect_greysheep(scaled, 1.0);
  CHECK(b.tau_user == Approx(3.0 * a.tau_user));
  CHECK(a.users == b.users);
  CHECK(a.services == b.services);
}

TEST_CASE("entities without data are not grey sheep") {
  QosMatrix q(5, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    q.set(i, 0, 1.0 + i);
    q.set(i, 1, 2.0);
  }
  const auto ga = ga_scores(q, reliability_scores(q));
  CHECK(ga.user(4) == 0.0);
  CHECK(ga.user_counts[4] == 0);
  CHECK_FALSE(detect_greysheep(ga, 0.0).is_user(4));
}

TEST_CASE("average path length") {
  CHECK(average_path_length(2) == Approx(1.0));
  CHECK(average_path_length(256) == Approx(10.2448).epsilon(1e-3));
  CHECK(average_path_length(1) == 0.0);
}

TEST_CASE("isolation forest") {
  IsolationForestOptions o;
  o.n_trees = 100;
  o.subsample = 64;
  o.seed = 3;
  const Matrix same = Matrix::Constant(20, 2, 1.5);
  const Vector s = isolation_forest_scores(same, o);
  CHECK(s.maxCoeff() - s.minCoeff() < 1e-12);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix pts(100, 2);
  for (Eigen::Index k = 0; k < 99; ++k) pts.row(k) << g(rng), g(rng);
  pts.row(99) << 100.0, 100.0;
  const Vector scores = isolation_forest_scores(pts, o);
  Eigen::Index top = 0;
  scores.maxCoeff(&top);
  CHECK(top == 99);
  CHECK((scores.head(99).array() < scores(99)).all());
  CHECK(isolation_forest_scores(pts, o) == scores);
}

TEST_CASE("outlier removal counts") {
  SyntheticSpec spec;
  spec.seed = 1;
  const QosMatrix q = generate_synthetic(spec).dataset.matrix;
  REQUIRE(q.observed_count() == 300);
  IsolationForestOptions o;
  const auto none = detect_outliers(q, 0.0, o);
  CHECK(apply_removal(q, none) == q);

  const auto report = detect_outliers(q, 0.1, o);
  CHECK(report.removed.size() == 30);
  const QosMatrix cleaned = apply_removal(q, report);
  CHECK(cleaned.observed_count() == 270);
  for (const auto& e : cleaned.entries()) CHECK(q.observed(e.user, e.service));
}

TEST_CASE("planted outliers are found") {
  SyntheticSpec spec;
  spec.n_users = 40;
  spec.n_services = 60;
  spec.density = 0.5;
  spec.outlier_fraction = 0.05;
  spec.seed = 8;
  const auto data = generate_synthetic(spec);
  IsolationForestOptions o;
  o.seed = 1;
  const QosMatrix cleaned = apply_removal(data.dataset.matrix, detect_outliers(data.dataset.matrix, 0.05, o));
  std::size_t caught = 0;
  for (const auto& e : data.truth.outliers) caught += !cleaned.observed(e.user, e.service);
  CHECK(static_cast<double>(caught) >= 0.9 * static_cast<double>(data.truth.outliers.size()));
}
