#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "arrqp/eval.hpp"

using namespace arrqp;
using doctest::Approx;

TEST_CASE("mae and rmse") {
  const std::vector<double> a = {1.0, 2.0}, p = {1.0, 2.0};
  CHECK(mae(a, p) == 0.0);
  CHECK(rmse(a, p) == 0.0);
  const std::vector<double> one = {1.0}, two = {2.0};
  CHECK(mae(one, two) == 1.0);
  CHECK(rmse(one, two) == 1.0);
  const std::vector<double> zeros = {0.0, 0.0}, q = {1.0, 3.0};
  CHECK(mae(zeros, q) == 2.0);
  CHECK(rmse(zeros, q) == Approx(2.23607).epsilon(1e-5));
  CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), UndefinedMetricError);
  CHECK_THROWS_AS(rmse(one, q), DimensionError);
}

TEST_CASE("masked metrics") {
  Matrix a(2, 2), p(2, 2), m(2, 2);
  a << 0, 9, 0, 9;
  p << 1, 0, 3, 0;
  m << 1, 0, 1, 0;
  CHECK(mae(a, p, m) == 2.0);
  CHECK(rmse(a, p, m) == Approx(std::sqrt(5.0)));
  CHECK_THROWS_AS(mae(a, p, Matrix::Zero(2, 2)), UndefinedMetricError);
}

TEST_CASE("rmse is never below mae") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> a(1 + k % 17), p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      p[i] = u(rng);
    }
    CHECK(rmse(a, p) >= mae(a, p) - 1e-12);
  }
}

TEST_CASE("improvement") {
  CHECK(improvement(0.1, 0.2) == Approx(50.0));
  CHECK(improvement(0.2, 0.2) == 0.0);
  CHECK(improvement(0.3, 0.2) == Approx(-50.0));
  CHECK_THROWS_AS(improvement(0.3, 0.0), UndefinedMetricError);
}

TEST_CASE("confidence intervals") {
  CHECK(z_value(95) == Approx(1.96).epsilon(1e-3));
  const std::vector<double> runs = {1.0, 3.0};
  const auto ci = confidence_interval(runs, 95);
  CHECK(ci.mean == Approx(2.0));
  CHECK(ci.lower == Approx(0.040).epsilon(1e-3));
  CHECK(ci.upper == Approx(3.960).epsilon(1e-3));

  const std::vector<double> same = {0.5, 0.5, 0.5};
  const auto flat = confidence_interval(same, 90);
  CHECK(flat.lower == 0.5);
  CHECK(flat.upper == 0.5);

  const std::vector<double> single = {1.0};
  CHECK_THROWS(confidence_interval(single, 95));
}

TEST_CASE("aggregated runs") {
  const std::vector<MetricReport> runs = {{0.2, 0.4, 10}, {0.4, 0.6, 10}};
  const auto r = aggregate_runs(runs);
  CHECK(r.mean_mae == Approx(0.3));
  CHECK(r.mean_rmse == Approx(0.5));
  CHECK_FALSE(r.mae_ci.empty());
  CHECK(to_json(r).contains("mean_mae"));
}
