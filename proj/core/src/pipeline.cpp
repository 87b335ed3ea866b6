#include "arrqp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "arrqp/serialize.hpp"

namespace arrqp {

namespace {

// Re-throws an error from a pipeline stage with the stage name prefixed, keeping its category.
template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  auto msg = [name](const std::exception& e) { return std::string("stage '") + name + "': " + e.what(); };
  try {
    return fn();
  } catch (const FormatError& e) {
    throw FormatError(msg(e));
  } catch (const DimensionError& e) {
    throw DimensionError(msg(e));
  } catch (const GenerationError& e) {
    throw GenerationError(msg(e));
  } catch (const TrainingError& e) {
    throw TrainingError(msg(e));
  } catch (const RoutingError& e) {
    throw RoutingError(msg(e));
  } catch (const UndefinedMetricError& e) {
    throw UndefinedMetricError(msg(e));
  } catch (const Error& e) {
    throw Error(msg(e));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(msg(e));
  }
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

nlohmann::json summary_json(const DatasetSummary& s) {
  return {{"n_users", s.n_users},
          {"n_services", s.n_services},
          {"user_regions", s.user_regions},
          {"user_groups", s.user_groups},
          {"service_regions", s.service_regions},
          {"service_groups", s.service_groups},
          {"observed", s.observed},
          {"min", s.min},
          {"max", s.max},
          {"mean", s.mean},
          {"median", s.median},
          {"std", s.stddev}};
}

nlohmann::json history_json(const nn::TrainHistory& h) {
  return {{"best_epoch", h.best_epoch},
          {"epochs_run", h.epochs_run},
          {"early_stopped", h.early_stopped},
          {"best_validation_loss", h.best_validation_loss},
          {"final_train_loss", h.train_loss.empty() ? 0.0 : h.train_loss.back()}};
}

double recall(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& found) {
  if (truth.empty()) return 1.0;
  std::size_t hit = 0;
  for (auto t : truth)
    if (std::find(found.begin(), found.end(), t) != found.end()) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

struct Baselines {
  double global = 0.0;
  std::vector<double> user, service;
};

Baselines mean_baselines(const QosMatrix& train) {
  Baselines b;
  const auto entries = train.entries();
  for (const auto& e : entries) b.global += e.value;
  if (!entries.empty()) b.global /= static_cast<double>(entries.size());
  auto side_means = [&](Side side, std::size_t count) {
    std::vector<double> out(count, b.global);
    for (std::size_t k = 0; k < count; ++k) {
      const auto q = train.qiv(side, k);
      if (!q.empty()) out[k] = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
    }
    return out;
  };
  b.user = side_means(Side::User, train.n_users());
  b.service = side_means(Side::Service, train.n_services());
  return b;
}

struct PairPredictions {
  std::vector<double> actual, arrqp, sorrqp, global, user_mean, service_mean;
  std::vector<std::string> route;
};

PairPredictions predict_pairs(const Predictor& p, const std::vector<Entry>& pairs, const Baselines& b,
                              std::set<std::string>& fallbacks) {
  PairPredictions out;
  for (const auto& e : pairs) {
    RoutingDecision d;
    out.actual.push_back(e.value);
    out.arrqp.push_back(p.predict(e.user, e.service, &d, &fallbacks));
    out.sorrqp.push_back(p.sorrqp.predict(e.user, e.service));
    out.global.push_back(b.global);
    out.user_mean.push_back(b.user[e.user]);
    out.service_mean.push_back(b.service[e.service]);
    out.route.push_back(d.label());
  }
  return out;
}

nlohmann::json metric_or_null(const std::vector<double>& a, const std::vector<double>& p) {
  if (a.empty()) return nullptr;
  return to_json(evaluate_pairs(a, p));
}

nlohmann::json metrics_json(const PairPredictions& pp) {
  nlohmann::json j;
  j["arrqp"] = metric_or_null(pp.actual, pp.arrqp);
  j["sorrqp"] = metric_or_null(pp.actual, pp.sorrqp);
  j["global_mean"] = metric_or_null(pp.actual, pp.global);
  j["user_mean"] = metric_or_null(pp.actual, pp.user_mean);
  j["service_mean"] = metric_or_null(pp.actual, pp.service_mean);
  std::map<std::string, std::array<std::vector<double>, 3>> groups;
  for (std::size_t k = 0; k < pp.actual.size(); ++k) {
    auto& g = groups[pp.route[k]];
    g[0].push_back(pp.actual[k]);
    g[1].push_back(pp.arrqp[k]);
    g[2].push_back(pp.sorrqp[k]);
  }
  nlohmann::json by_route = nlohmann::json::object();
  for (const auto& [label, g] : groups) {
    by_route[label] = {{"arrqp", metric_or_null(g[0], g[1])}, {"sorrqp", metric_or_null(g[0], g[2])}};
  }
  j["by_route"] = by_route;
  return j;
}

MetricReport metric_from_json(const nlohmann::json& j) {
  MetricReport m;
  if (j.is_null()) return m;
  m.mae = j.at("mae").get<double>();
  m.rmse = j.at("rmse").get<double>();
  m.n_pairs = j.at("n_pairs").get<std::size_t>();
  return m;
}

nlohmann::json ga_json(const GaScores& ga) {
  return {{"user", std::vector<double>(ga.user.data(), ga.user.data() + ga.user.size())},
          {"service", std::vector<double>(ga.service.data(), ga.service.data() + ga.service.size())},
          {"user_counts", ga.user_counts},
          {"service_counts", ga.service_counts}};
}

std::vector<std::size_t> indices_of(const std::vector<bool>& flags) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < flags.size(); ++k)
    if (flags[k]) out.push_back(k);
  return out;
}

PipelineResult run_pipeline_impl(const ArrqpConfig& config, bool persist);

}  // namespace

// --- models --------------------------------------------------------------------------------------

std::shared_ptr<EmbeddingModel> make_model(const ArrqpConfig& config, Eigen::Index feature_dim, std::uint64_t seed) {
  if (config.family == ModelFamily::MhGat) return std::make_shared<MhGat>(feature_dim, config.gat, seed);
  return std::make_shared<MhGcmf>(feature_dim, config.gcmf, seed);
}

TrainedSorrqp train_sorrqp(const QosMatrix& train, const QosMatrix& validation, const FeatureEmbedding& f0,
                           const SparseMatrix& adjacency, const ArrqpConfig& config, std::uint64_t seed) {
  nn::TrainConfig tc = config.train;
  tc.seed = seed;
  nn::LossSpec loss = config.loss;
  loss.gamma = config.effective_gamma();
  Matrix x = f0.values;
  if (config.center_features && x.rows() > 0) x = x.rowwise() - x.colwise().mean();
  return train_factorization(make_model(config, f0.width(), mix_seed(seed, 1)), adjacency, x, train, validation,
                             tc, loss);
}

// --- routing -------------------------------------------------------------------------------------

std::string RoutingDecision::label() const {
  switch (kind) {
    case RouteKind::Sorrqp: return "SORRQP";
    case RouteKind::Grrqp: return std::string("GRRQP:") + to_string(greysheep);
    case RouteKind::Crrqp: return std::string("CRRQP:") + to_string(cold);
  }
  return "?";
}

RoutingDecision route(std::size_t user, std::size_t service, const GreysheepReport& report,
                      const ColdRegistry& cold) {
  RoutingDecision d;
  d.user = user;
  d.service = service;
  const bool cu = cold.user(user);
  const bool cs = cold.service(service);
  if (cu || cs) {
    d.kind = RouteKind::Crrqp;
    d.cold = cu && cs ? ColdCategory::ColdBoth : (cu ? ColdCategory::ColdUser : ColdCategory::ColdService);
    return d;
  }
  if (const auto category = greysheep_category(user, service, report)) {
    d.kind = RouteKind::Grrqp;
    d.greysheep = *category;
  }
  return d;
}

double Predictor::predict(std::size_t user, std::size_t service, RoutingDecision* decision,
                          std::set<std::string>* fallbacks) const {
  const auto d = route(user, service, greysheep, cold);
  if (decision) *decision = d;
  const HeadModel* head = nullptr;
  if (d.kind == RouteKind::Grrqp) head = &heads.grrqp_head(d.greysheep);
  if (d.kind == RouteKind::Crrqp) head = &heads.crrqp_head(d.cold);
  if (head && !head->trained) {
    if (fallbacks) fallbacks->insert(d.label());
    head = nullptr;
  }
  if (!head) return sorrqp.predict(user, service);
  if (d.kind == RouteKind::Grrqp) {
    return head->predict(build_grrqp_features(source, d.greysheep, user, service, greysheep));
  }
  return head->predict(build_crrqp_features(source, d.cold, user, service, cold));
}

// --- pipeline ------------------------------------------------------------------------------------

LoadedData load_data(const ArrqpConfig& config) {
  LoadedData d;
  if (config.uses_wsdream() && (config.users_path.empty() || config.services_path.empty())) {
    // Matrix without entity lists: every entity gets a single region and group.
    d.dataset.matrix = read_qos_matrix(config.matrix_path);
    d.dataset.user_context = trivial_context(Side::User, d.dataset.matrix.n_users());
    d.dataset.service_context = trivial_context(Side::Service, d.dataset.matrix.n_services());
    d.dataset.kind = config.kind;
  } else if (config.uses_wsdream()) {
    d.dataset = load_wsdream(config.matrix_path, config.users_path, config.services_path, config.kind);
  } else if (!config.synthetic_path.empty()) {
    auto s = load_synthetic(config.synthetic_path);
    d.dataset = std::move(s.dataset);
    d.truth = std::move(s.truth);
  } else {
    auto s = generate_synthetic(config.synthetic);
    s.dataset.kind = config.kind;
    d.dataset = std::move(s.dataset);
    d.truth = std::move(s.truth);
  }
  return d;
}

std::uint64_t run_seed(const ArrqpConfig& config, int r) {
  return mix_seed(config.seed, static_cast<std::uint64_t>(r));
}

RunArtifacts run_once(const ArrqpConfig& config, const LoadedData& data, std::uint64_t seed) {
  config.validate();
  const Dataset& ds = data.dataset;
  RunArtifacts run;
  run.seed = seed;
  nlohmann::json report;
  report["seed"] = seed;

  run.split = stage("split", [&] {
    return split(ds.matrix, {config.density, config.validation_percent, mix_seed(seed, 1)});
  });
  run.test_entries = run.split.test.entries();
  if (data.truth) {
    run.test_entries.insert(run.test_entries.end(), data.truth->cold_entries.begin(), data.truth->cold_entries.end());
  }
  report["split"] = {{"train", run.split.train.observed_count()},
                     {"validation", run.split.validation.observed_count()},
                     {"test", run.split.test.observed_count()},
                     {"cold_test", run.test_entries.size() - run.split.test.observed_count()}};

  IsolationForestOptions iforest = config.iforest;
  iforest.seed = mix_seed(seed, 2);
  stage("outliers", [&] {
    if (config.lambda > 0.0) {
      run.outliers = detect_outliers(run.split.train, config.lambda, iforest, config.outlier_features);
      run.clean_train = apply_removal(run.split.train, run.outliers);
    } else {
      run.outliers.lambda = 0.0;
      run.clean_train = run.split.train;
    }
  });
  {
    nlohmann::json o = {{"lambda", config.lambda}, {"removed", run.outliers.removed.size()}};
    if (data.truth && !data.truth->outliers.empty()) {
      std::size_t planted_in_train = 0, caught = 0;
      for (const auto& t : data.truth->outliers) {
        if (!run.split.train.observed(t.user, t.service)) continue;
        ++planted_in_train;
        if (!run.clean_train.observed(t.user, t.service)) ++caught;
      }
      o["planted_in_train"] = planted_in_train;
      o["planted_removed"] = caught;
    }
    report["outliers"] = o;
  }

  FeatureConfig fc = config.features;
  const std::size_t max_rank = std::min(ds.matrix.n_users(), ds.matrix.n_services());
  if (fc.nmf_dim > max_rank) {
    warn("d_n = " + std::to_string(fc.nmf_dim) + " exceeds min(n, m) = " + std::to_string(max_rank) +
         "; using " + std::to_string(max_rank));
    fc.nmf_dim = max_rank;
  }
  run.features = stage("features", [&] {
    return build_features(run.clean_train, ds.user_context, ds.service_context, fc, mix_seed(seed, 3));
  });
  report["features"] = {{"width", run.features.embedding.width()},
                        {"d_n", fc.nmf_dim},
                        {"d_s", fc.similarity_dim},
                        {"d_c", fc.context_dim},
                        {"nmf_iterations", run.features.nmf.iterations},
                        {"feature_set", to_string(fc.feature_set)}};

  run.adjacency = stage("graph", [&] { return normalize(build_adjacency(run.clean_train)); });
  report["graph"] = {{"nodes", run.adjacency.rows()}, {"nonzeros", run.adjacency.nonZeros()}};

  auto sorrqp = stage("sorrqp", [&] {
    return train_sorrqp(run.clean_train, run.split.validation, run.features.embedding, run.adjacency, config,
                        mix_seed(seed, 4));
  });
  report["sorrqp"] = history_json(sorrqp.history);
  report["sorrqp"]["model"] = sorrqp.model_description;
  report["sorrqp"]["gamma"] = config.effective_gamma();
  report["sorrqp"]["loss"] = nn::to_string(config.loss.kind);

  GaScores ga;
  GreysheepReport gs;
  stage("greysheep", [&] {
    ga = ga_scores(run.clean_train, reliability_scores(run.clean_train));
    gs = detect_greysheep(ga, config.c);
  });
  {
    nlohmann::json g = {{"c", config.c},
                        {"tau_user", gs.tau_user},
                        {"tau_service", gs.tau_service},
                        {"users", gs.users},
                        {"services", gs.services},
                        {"count", {gs.users.size(), gs.services.size()}}};
    if (data.truth) g["planted_user_recall"] = recall(data.truth->greysheep_users, gs.users);
    report["greysheep"] = g;
  }

  const auto cold = ColdRegistry::from_matrix(run.clean_train);
  report["cold"] = {{"users", indices_of(cold.users)}, {"services", indices_of(cold.services)}};

  auto& p = run.predictor;
  p.source = make_head_source(sorrqp.user_embeddings(), sorrqp.service_embeddings(), run.features, ga, cold,
                              config.cold_collaborative);
  p.greysheep = gs;
  p.cold = cold;
  MlpConfig mlp = config.mlp;
  mlp.loss.gamma = config.effective_head_gamma();
  stage("grrqp", [&] {
    if (config.enable_grrqp) p.heads = train_grrqp(run.clean_train, p.source, gs, mlp, mix_seed(seed, 5), p.heads);
  });
  stage("crrqp", [&] {
    if (config.enable_crrqp) p.heads = train_crrqp(run.clean_train, p.source, cold, mlp, mix_seed(seed, 6), p.heads);
  });
  p.sorrqp = std::move(sorrqp);
  {
    nlohmann::json heads = nlohmann::json::array();
    auto add = [&](const HeadModel& h, const std::string& fallback_name) {
      nlohmann::json e = {{"name", h.name.empty() ? fallback_name : h.name},
                          {"trained", h.trained},
                          {"training_pairs", h.training_pairs}};
      if (h.trained) e["history"] = history_json(h.history);
      heads.push_back(e);
    };
    for (std::size_t k = 0; k < 3; ++k)
      add(p.heads.grrqp[k], std::string("grrqp:") + to_string(static_cast<GreysheepCategory>(k)));
    for (std::size_t k = 0; k < 3; ++k)
      add(p.heads.crrqp[k], std::string("crrqp:") + to_string(static_cast<ColdCategory>(k)));
    report["heads"] = heads;
  }

  stage("evaluation", [&] {
    const auto baselines = mean_baselines(run.clean_train);
    std::set<std::string> fallbacks;
    const auto full = predict_pairs(p, run.test_entries, baselines, fallbacks);
    report["metrics"]["full_test"] = metrics_json(full);

    // Cleaned-test mode: the same detector applied to the test entries.
    run.clean_test_entries = run.test_entries;
    if (config.lambda > 0.0 && run.split.test.observed_count() >= 2) {
      IsolationForestOptions test_forest = config.iforest;
      test_forest.seed = mix_seed(seed, 7);
      const auto test_report = detect_outliers(run.split.test, config.lambda, test_forest, config.outlier_features);
      const QosMatrix cleaned = apply_removal(run.split.test, test_report);
      run.clean_test_entries.clear();
      for (const auto& e : run.test_entries)
        if (!run.split.test.observed(e.user, e.service) || cleaned.observed(e.user, e.service))
          run.clean_test_entries.push_back(e);
    }
    const auto clean = predict_pairs(p, run.clean_test_entries, baselines, fallbacks);
    report["metrics"]["cleaned_test"] = metrics_json(clean);
    for (const auto& f : fallbacks) warn("head for route " + f + " is untrained; falling back to SORRQP");
    report["fallback_routes"] = std::vector<std::string>(fallbacks.begin(), fallbacks.end());
  });

  run.report = std::move(report);
  return run;
}

namespace {

nlohmann::json summarize_runs(const std::vector<nlohmann::json>& runs) {
  nlohmann::json out;
  for (const char* mode : {"full_test", "cleaned_test"}) {
    for (const char* model : {"arrqp", "sorrqp", "global_mean"}) {
      std::vector<MetricReport> per_run;
      for (const auto& r : runs) per_run.push_back(metric_from_json(r.at("metrics").at(mode).at(model)));
      out[mode][model] = to_json(aggregate_runs(per_run));
    }
  }
  return out;
}

PipelineResult run_pipeline_impl(const ArrqpConfig& config, bool persist) {
  const auto started = timestamp();
  config.validate();
  const auto data = stage("load", [&] {
    auto d = load_data(config);
    d.dataset.validate();
    return d;
  });

  PipelineResult result;
  std::vector<nlohmann::json> run_reports;
  for (int r = 0; r < config.runs; ++r) {
    auto run = run_once(config, data, run_seed(config, r));
    run_reports.push_back(run.report);
    if (r == 0) result.first = std::move(run);
  }

  nlohmann::json report;
  report["config"] = to_json(config);
  report["fingerprint"] = fingerprint(config);
  report["dataset"] = summary_json(summarize(data.dataset));
  report["dataset"]["kind"] = to_string(data.dataset.kind);
  if (data.truth) {
    report["dataset"]["planted"] = {{"outliers", data.truth->outliers.size()},
                                    {"greysheep_users", data.truth->greysheep_users},
                                    {"cold_users", data.truth->cold_users},
                                    {"cold_services", data.truth->cold_services},
                                    {"cold_entries", data.truth->cold_entries.size()}};
  }
  report["runs"] = run_reports;
  report["summary"] = summarize_runs(run_reports);
  report["meta"] = {{"started", started}, {"finished", timestamp()}, {"version", "0.1.0"}};
  result.report = report;

  if (persist) {
    const auto dir = artifact_dir(config);
    if (!dir.empty()) {
      stage("persist", [&] { save_bundle(dir, config, result.first, report); });
      result.bundle_dir = dir;
    }
  }
  return result;
}

}  // namespace

PipelineResult run_pipeline(const ArrqpConfig& config) { return run_pipeline_impl(config, true); }

nlohmann::json strip_meta(const nlohmann::json& report) {
  nlohmann::json out = report;
  out.erase("meta");
  return out;
}

// --- bundle persistence --------------------------------------------------------------------------

void save_bundle(const std::filesystem::path& dir, const ArrqpConfig& config, const RunArtifacts& run,
                 const nlohmann::json& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_json(dir / "config.json", to_json(config));
  write_json(dir / "report.json", report);
  write_json(dir / "fingerprint.json", {{"fingerprint", fingerprint(config)}, {"seed", run.seed}});

  const auto& p = run.predictor;
  save_trained(dir / "sorrqp", p.sorrqp);
  save_heads(dir / "heads", p.heads);

  fs::create_directories(dir / "features");
  save_embedding(dir / "features" / "embedding", run.features.embedding);
  save_matrix(dir / "features" / "user_context_code", run.features.user_context_code);
  save_matrix(dir / "features" / "service_context_code", run.features.service_context_code);
  save_matrix(dir / "features" / "nmf_users", run.features.nmf.user_factors);
  save_matrix(dir / "features" / "nmf_services", run.features.nmf.service_factors);

  GaScores ga;
  ga.user = p.source.user_ga;
  ga.service = p.source.service_ga;
  ga.user_counts = p.source.user_counts;
  ga.service_counts = p.source.service_counts;
  write_json(dir / "routing.json", {{"greysheep", to_json(p.greysheep)},
                                    {"ga", ga_json(ga)},
                                    {"cold_users", indices_of(p.cold.users)},
                                    {"cold_services", indices_of(p.cold.services)},
                                    {"cold_collaborative", to_string(p.source.cold_collaborative)}});
  write_json(dir / "outliers.json", to_json(run.outliers));
  write_outlier_csv(dir / "outliers.csv", run.outliers);
  write_greysheep_csv(dir / "greysheep.csv", p.greysheep);

  fs::create_directories(dir / "splits");
  write_qos_matrix(dir / "splits" / "train.txt", run.split.train);
  write_qos_matrix(dir / "splits" / "validation.txt", run.split.validation);
  write_qos_matrix(dir / "splits" / "test.txt", run.split.test);
  write_qos_matrix(dir / "splits" / "train_clean.txt", run.clean_train);
  export_coo(dir / "adjacency_coo.txt", run.adjacency);
  write_predictions_csv(dir / "predictions_sorrqp.csv", p.sorrqp, run.test_entries, true, {}, {});

  std::ofstream out(dir / "predictions.csv");
  if (!out) throw std::runtime_error("cannot write " + (dir / "predictions.csv").string());
  out.precision(10);
  out << "user_id,service_id,predicted,actual,route\n";
  for (const auto& e : run.test_entries) {
    RoutingDecision d;
    const double q = p.predict(e.user, e.service, &d);
    out << e.user << ',' << e.service << ',' << q << ',' << e.value << ',' << d.label() << '\n';
  }
}

Predictor load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir / "routing.json")) throw FormatError("not an artifact bundle: " + dir.string());
  Predictor p;
  p.sorrqp = load_trained(dir / "sorrqp");
  p.heads = load_heads(dir / "heads");

  FeatureArtifacts features;
  features.embedding = load_embedding(dir / "features" / "embedding");
  features.user_context_code = load_matrix(dir / "features" / "user_context_code");
  features.service_context_code = load_matrix(dir / "features" / "service_context_code");
  features.nmf.user_factors = load_matrix(dir / "features" / "nmf_users");
  features.nmf.service_factors = load_matrix(dir / "features" / "nmf_services");

  const auto routing = read_json(dir / "routing.json");
  try {
    const auto& g = routing.at("greysheep");
    p.greysheep.c = g.at("c").get<double>();
    p.greysheep.tau_user = g.at("tau_user").get<double>();
    p.greysheep.tau_service = g.at("tau_service").get<double>();
    p.greysheep.users = g.at("greysheep_users").get<std::vector<std::size_t>>();
    p.greysheep.services = g.at("greysheep_services").get<std::vector<std::size_t>>();
    const auto us = g.at("user_scores").get<std::vector<double>>();
    const auto ss = g.at("service_scores").get<std::vector<double>>();
    p.greysheep.user_scores = Eigen::Map<const Vector>(us.data(), static_cast<Eigen::Index>(us.size()));
    p.greysheep.service_scores = Eigen::Map<const Vector>(ss.data(), static_cast<Eigen::Index>(ss.size()));

    GaScores ga;
    ga.user = p.greysheep.user_scores;
    ga.service = p.greysheep.service_scores;
    ga.user_counts = routing.at("ga").at("user_counts").get<std::vector<std::size_t>>();
    ga.service_counts = routing.at("ga").at("service_counts").get<std::vector<std::size_t>>();

    p.cold.users.assign(p.sorrqp.n_users(), false);
    p.cold.services.assign(p.sorrqp.n_services(), false);
    for (auto i : routing.at("cold_users").get<std::vector<std::size_t>>()) p.cold.users.at(i) = true;
    for (auto j : routing.at("cold_services").get<std::vector<std::size_t>>()) p.cold.services.at(j) = true;
    p.source = make_head_source(p.sorrqp.user_embeddings(), p.sorrqp.service_embeddings(), features, ga, p.cold,
                                parse_cold_collaborative(routing.at("cold_collaborative").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("routing.json: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw FormatError(std::string("routing.json: index out of range: ") + e.what());
  }
  return p;
}

// --- ablations -----------------------------------------------------------------------------------

std::vector<AblationRow> run_ablation(const ArrqpConfig& base, const std::string& variable,
                                      const std::vector<std::pair<std::string, nlohmann::json>>& variants) {
  std::vector<AblationRow> rows;
  for (const auto& [label, overlay_json] : variants) {
    ArrqpConfig c = config_from_json(overlay_json, base);
    const auto result = run_pipeline_impl(c, false);
    const auto& s = result.report.at("summary").at("full_test");
    AblationRow row;
    row.variable = variable;
    row.value = label;
    row.mae = s.at("arrqp").at("mean_mae").get<double>();
    row.rmse = s.at("arrqp").at("mean_rmse").get<double>();
    row.sorrqp_mae = s.at("sorrqp").at("mean_mae").get<double>();
    row.sorrqp_rmse = s.at("sorrqp").at("mean_rmse").get<double>();
    rows.push_back(row);
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "variable,value,mae,rmse,sorrqp_mae,sorrqp_rmse\n";
  for (const auto& r : rows)
    out << r.variable << ',' << r.value << ',' << r.mae << ',' << r.rmse << ',' << r.sorrqp_mae << ','
        << r.sorrqp_rmse << '\n';
}

}  // namespace arrqp
