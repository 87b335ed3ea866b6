#include <cstdlib>
#include <filesystem>
#include <set>

#include "doctest.h"

#include "arrqp/pipeline.hpp"

using namespace arrqp;
namespace fs = std::filesystem;

namespace {

void quiet(const std::string&) {}

ArrqpConfig small_config(std::uint64_t seed) {
  ArrqpConfig c;
  c.synthetic.n_users = 20;
  c.synthetic.n_services = 30;
  c.synthetic.density = 0.5;
  c.synthetic.outlier_fraction = 0.05;
  c.synthetic.greysheep_users = 2;
  c.synthetic.cold_users = 2;
  c.synthetic.cold_services = 2;
  c.synthetic.seed = seed;
  c.density = 40.0;
  c.seed = seed;
  c.runs = 1;
  c.train.max_epochs = 150;
  c.train.patience = 30;
  c.features.autoencoder_max_epochs = 20;
  c.mlp.min_pairs = 5;
  c.mlp.max_epochs = 20;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "arrqp_unit_pipeline" / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  set_warning_sink(quiet);
  ArrqpConfig c = small_config(3);
  c.gamma = 0.5;
  c.family = ModelFamily::MhGat;
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(fingerprint(back) == fingerprint(c));

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"no_such_key", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"anomaly", {{"lambda", 1.5}}}}).validate(), std::invalid_argument);

  ArrqpConfig other = c;
  other.output_dir = "/tmp/elsewhere";
  CHECK(fingerprint(other) == fingerprint(c));
  other.seed = 4;
  CHECK(fingerprint(other) != fingerprint(c));
}

TEST_CASE("default loss scale per dataset kind") {
  ArrqpConfig c;
  c.kind = ParameterKind::ResponseTime;
  CHECK(c.effective_gamma() == 0.25);
  c.kind = ParameterKind::Throughput;
  CHECK(c.effective_gamma() == 10.0);
  c.gamma = 3.0;
  CHECK(c.effective_gamma() == 3.0);
}

TEST_CASE("cache directory from the environment") {
  ArrqpConfig c;
  ::setenv("ARRQP_CACHE_DIR", "/tmp/arrqp-cache", 1);
  CHECK(artifact_dir(c) == fs::path("/tmp/arrqp-cache") / fingerprint(c));
  c.output_dir = "/tmp/explicit";
  CHECK(artifact_dir(c) == fs::path("/tmp/explicit"));
  ::unsetenv("ARRQP_CACHE_DIR");
  c.output_dir.clear();
  CHECK(artifact_dir(c).empty());
}

TEST_CASE("routing") {
  GreysheepReport r;
  r.users = {1};
  r.services = {2};
  ColdRegistry cold;
  cold.users = {false, false, false, true};
  cold.services = {false, false, false, false};
  CHECK(route(0, 0, r, cold).kind == RouteKind::Sorrqp);
  CHECK(route(1, 0, r, cold).label() == "GRRQP:GSU+regularS");
  CHECK(route(0, 2, r, cold).kind == RouteKind::Grrqp);
  CHECK(route(1, 2, r, cold).greysheep == GreysheepCategory::GsUserGsService);
  const auto d = route(3, 2, r, cold);
  CHECK(d.kind == RouteKind::Crrqp);
  CHECK(d.cold == ColdCategory::ColdUser);
}

TEST_CASE("pipeline runs end to end, persists and reloads") {
  set_warning_sink(quiet);
  ArrqpConfig c = small_config(1);
  c.output_dir = scratch("bundle").string();
  const auto result = run_pipeline(c);
  const auto& report = result.report;
  CHECK(report.contains("summary"));
  CHECK(report.at("runs").size() == 1);
  CHECK(fs::exists(result.bundle_dir / "report.json"));
  CHECK(fs::exists(result.bundle_dir / "predictions.csv"));
  CHECK(fs::exists(result.bundle_dir / "routing.json"));

  const Predictor loaded = load_bundle(result.bundle_dir);
  const auto& run = result.first;
  std::set<std::string> labels;
  for (const auto& e : run.test_entries) {
    RoutingDecision a, b;
    const double p = run.predictor.predict(e.user, e.service, &a);
    const double q = loaded.predict(e.user, e.service, &b);
    CHECK(a.label() == b.label());
    CHECK(std::abs(p - q) < 1e-9);
    labels.insert(a.label());
  }
  CHECK(labels.count("SORRQP") == 1);
  CHECK(labels.size() > 1);

  // Without the head artifacts every pair falls back to SORRQP.
  fs::remove_all(result.bundle_dir / "heads");
  const Predictor bare = load_bundle(result.bundle_dir);
  for (const auto& e : run.test_entries) {
    std::set<std::string> fallbacks;
    CHECK(bare.predict(e.user, e.service, nullptr, &fallbacks) ==
          doctest::Approx(run.predictor.sorrqp.predict(e.user, e.service)).epsilon(1e-12));
  }
}

TEST_CASE("degenerate routing equals SORRQP") {
  set_warning_sink(quiet);
  ArrqpConfig c = small_config(2);
  c.synthetic.cold_users = 0;
  c.synthetic.cold_services = 0;
  c.synthetic.density = 1.0;
  c.density = 80.0;  // every entity keeps training data
  c.lambda = 0.0;
  c.c = 1e9;
  const auto data = load_data(c);
  const auto run = run_once(c, data, 2);
  CHECK(run.outliers.removed.empty());
  for (const auto& e : run.test_entries) {
    RoutingDecision d;
    CHECK(run.predictor.predict(e.user, e.service, &d) == run.predictor.sorrqp.predict(e.user, e.service));
    CHECK(d.kind == RouteKind::Sorrqp);
  }
}

TEST_CASE("same seed, same report") {
  set_warning_sink(quiet);
  ArrqpConfig c = small_config(5);
  c.runs = 2;
  const auto a = strip_meta(run_pipeline(c).report);
  const auto b = strip_meta(run_pipeline(c).report);
  CHECK(a == b);
  CHECK_FALSE(a.contains("meta"));
}

TEST_CASE("stage failures name the stage") {
  set_warning_sink(quiet);
  ArrqpConfig c = small_config(1);
  c.matrix_path = "/nonexistent/rtMatrix.txt";
  c.users_path = "/nonexistent/userlist.txt";
  c.services_path = "/nonexistent/wslist.txt";
  try {
    run_pipeline(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("stage '") != std::string::npos);
  }
}

TEST_CASE("ablation rows") {
  set_warning_sink(quiet);
  ArrqpConfig c = small_config(1);
  c.enable_grrqp = false;
  c.enable_crrqp = false;
  const auto rows = run_ablation(c, "heads", {{"1", {{"model", {{"n_heads", 1}}}}}, {"2", {{"model", {{"n_heads", 2}}}}}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].value == "1");
  CHECK(rows[1].mae > 0.0);
  const auto csv = scratch("ablation") / "heads.csv";
  fs::create_directories(csv.parent_path());
  write_ablation_csv(csv, rows);
  CHECK(fs::file_size(csv) > 0);
}
