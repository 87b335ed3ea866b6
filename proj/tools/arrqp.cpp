#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "arrqp/pipeline.hpp"
#include "arrqp/serialize.hpp"

using namespace arrqp;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { Ok = 0, Usage = 1, Data = 2, Runtime = 3 };

// Flags that override the JSON config; unset flags leave it alone.
struct Overrides {
  std::string config_file;
  std::optional<std::string> matrix, users, services, synthetic_file, kind;
  bool synthetic = false;
  std::optional<std::size_t> n_users, n_services, rank, greysheep_users, cold_users, cold_services;
  std::optional<double> synthetic_density, noise, outlier_fraction;
  std::optional<double> density, lambda, c, gamma;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs, heads, blocks, max_epochs, patience;
  std::optional<std::string> family, loss, out;

  ArrqpConfig resolve() const {
    ArrqpConfig cfg = config_file.empty() ? ArrqpConfig{} : load_config(config_file);
    if (matrix) cfg.matrix_path = *matrix;
    if (users) cfg.users_path = *users;
    if (services) cfg.services_path = *services;
    if (synthetic_file) cfg.synthetic_path = *synthetic_file;
    if (synthetic) cfg.matrix_path.clear();
    if (kind) cfg.kind = parse_parameter_kind(*kind);
    auto& s = cfg.synthetic;
    if (n_users) s.n_users = *n_users;
    if (n_services) s.n_services = *n_services;
    if (rank) s.rank = *rank;
    if (greysheep_users) s.greysheep_users = *greysheep_users;
    if (cold_users) s.cold_users = *cold_users;
    if (cold_services) s.cold_services = *cold_services;
    if (synthetic_density) s.density = *synthetic_density;
    if (noise) s.noise_std = *noise;
    if (outlier_fraction) s.outlier_fraction = *outlier_fraction;
    if (seed) {
      cfg.seed = *seed;
      s.seed = *seed;
    }
    if (density) cfg.density = *density;
    if (lambda) cfg.lambda = *lambda;
    if (c) cfg.c = *c;
    if (gamma) cfg.gamma = *gamma;
    if (runs) cfg.runs = *runs;
    if (heads) {
      cfg.gcmf.n_heads = *heads;
      cfg.gat.n_heads = *heads;
    }
    if (blocks) {
      cfg.gcmf.blocks = *blocks;
      cfg.gat.layers = *blocks;
    }
    if (max_epochs) cfg.train.max_epochs = *max_epochs;
    if (patience) cfg.train.patience = *patience;
    if (family) cfg.family = parse_model_family(*family);
    if (loss) cfg.loss.kind = nn::parse_loss_kind(*loss);
    if (out) cfg.output_dir = *out;
    cfg.validate();
    return cfg;
  }
};

void add_data_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--matrix", o.matrix, "QoS matrix file (rtMatrix.txt / tpMatrix.txt)");
  app->add_option("--users", o.users, "user list file");
  app->add_option("--services", o.services, "service list file");
  app->add_option("--synthetic-file", o.synthetic_file, "dataset written by `arrqp synth`");
  app->add_flag("--synthetic", o.synthetic, "use generated data even if the config names files");
  app->add_option("--kind", o.kind, "RT or TP");
  app->add_option("--n-users", o.n_users);
  app->add_option("--n-services", o.n_services);
  app->add_option("--rank", o.rank);
  app->add_option("--synthetic-density", o.synthetic_density, "fraction of generated cells observed");
  app->add_option("--noise", o.noise);
  app->add_option("--outlier-fraction", o.outlier_fraction);
  app->add_option("--greysheep-users", o.greysheep_users);
  app->add_option("--cold-users", o.cold_users);
  app->add_option("--cold-services", o.cold_services);
  app->add_option("--seed", o.seed);
  app->add_option("--density", o.density, "training percent x");
}

void add_model_options(CLI::App* app, Overrides& o) {
  app->add_option("--runs", o.runs, "repeated runs");
  app->add_option("--lambda", o.lambda, "outlier fraction removed from training data");
  app->add_option("--c", o.c, "grey-sheep threshold multiplier");
  app->add_option("--gamma", o.gamma, "Cauchy loss scale");
  app->add_option("--loss", o.loss, "cauchy|mse|mae|huber");
  app->add_option("--family", o.family, "mhgcmf|mhgat");
  app->add_option("--heads", o.heads, "number of heads N_h");
  app->add_option("--blocks", o.blocks, "graph blocks (MhGCMF) or attention layers (MhGAT)");
  app->add_option("--max-epochs", o.max_epochs);
  app->add_option("--patience", o.patience);
  app->add_option("--out", o.out, "artifact directory");
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string entity_label(char prefix, std::size_t index) { return prefix + std::to_string(index + 1); }

// --- ingest / synth --------------------------------------------------------------------------

int cmd_ingest(const Overrides& o, bool as_json) {
  const ArrqpConfig cfg = o.resolve();
  const auto data = load_data(cfg);
  data.dataset.validate();
  const auto s = summarize(data.dataset);
  if (as_json) {
    print_json({{"users", s.n_users},
                {"services", s.n_services},
                {"user_regions", s.user_regions},
                {"user_groups", s.user_groups},
                {"service_regions", s.service_regions},
                {"service_groups", s.service_groups},
                {"observed", s.observed},
                {"min", s.min},
                {"max", s.max},
                {"mean", s.mean},
                {"median", s.median},
                {"stddev", s.stddev},
                {"kind", to_string(data.dataset.kind)}});
    return Ok;
  }
  std::cout << "Statistics                Value\n"
            << "Number of users           " << s.n_users << "\n"
            << "Number of services        " << s.n_services << "\n"
            << "User regions              " << s.user_regions << "\n"
            << "User AS                   " << s.user_groups << "\n"
            << "Service regions           " << s.service_regions << "\n"
            << "Service providers         " << s.service_groups << "\n"
            << "Valid invocations         " << s.observed << "\n"
            << to_string(data.dataset.kind) << " range              " << fixed(s.min, 3) << " - " << fixed(s.max, 3)
            << "\n"
            << to_string(data.dataset.kind) << " mean / median      " << fixed(s.mean) << " / " << fixed(s.median)
            << "\n"
            << to_string(data.dataset.kind) << " std                " << fixed(s.stddev) << "\n";
  return Ok;
}

int cmd_synth(const Overrides& o, const std::string& out, const std::string& matrix_out, bool as_json) {
  const ArrqpConfig cfg = o.resolve();
  auto data = generate_synthetic(cfg.synthetic);
  data.dataset.kind = cfg.kind;
  save_synthetic(out, data);
  if (!matrix_out.empty()) write_qos_matrix(matrix_out, data.dataset.matrix);
  const json j = {{"file", out},
                  {"observed", data.dataset.matrix.observed_count()},
                  {"truth", to_json(data.truth)}};
  if (as_json) {
    print_json(j);
  } else {
    std::cout << "wrote " << out << ": " << cfg.synthetic.n_users << " x " << cfg.synthetic.n_services << ", "
              << data.dataset.matrix.observed_count() << " observed, " << data.truth.outliers.size()
              << " outliers, " << data.truth.greysheep_users.size() << " grey-sheep users, "
              << data.truth.cold_users.size() << " cold users, " << data.truth.cold_services.size()
              << " cold services\n";
  }
  return Ok;
}

// --- train / evaluate ------------------------------------------------------------------------

void print_summary(const json& report) {
  for (const char* mode : {"full_test", "cleaned_test"}) {
    std::cout << (std::string(mode) == "full_test" ? "Full test set" : "Outlier-cleaned test set") << "\n";
    std::cout << "  model         MAE      RMSE     MAE 95% CI\n";
    const auto& s = report.at("summary").at(mode);
    for (const char* model : {"arrqp", "sorrqp", "global_mean"}) {
      const auto& m = s.at(model);
      std::cout << "  " << std::left << std::setw(12) << model << std::right << "  " << fixed(m.at("mean_mae").get<double>())
                << "   " << fixed(m.at("mean_rmse").get<double>());
      for (const auto& ci : m.at("mae_ci"))
        if (ci.at("level") == 95)
          std::cout << "   [" << fixed(ci.at("lower").get<double>()) << ", " << fixed(ci.at("upper").get<double>())
                    << "]";
      std::cout << "\n";
    }
  }
}

int cmd_train(const Overrides& o, bool as_json, const std::string& report_path) {
  const ArrqpConfig cfg = o.resolve();
  const auto result = run_pipeline(cfg);
  if (!report_path.empty()) write_json(report_path, result.report);
  if (as_json) {
    print_json(result.report);
    return Ok;
  }
  print_summary(result.report);
  if (!result.bundle_dir.empty()) std::cout << "artifacts: " << result.bundle_dir.string() << "\n";
  return Ok;
}

struct PredictionRows {
  std::vector<double> actual, predicted;
  std::vector<std::string> route;
};

PredictionRows read_prediction_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + " is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) -> int {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<int>(k);
    return -1;
  };
  const int pc = column("predicted"), ac = column("actual"), rc = column("route");
  if (pc < 0 || ac < 0) throw FormatError(path.string() + " needs 'predicted' and 'actual' columns");
  PredictionRows rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() < header.size()) throw FormatError("line " + std::to_string(line_no) + " is short");
    if (cells[static_cast<std::size_t>(ac)].empty()) continue;
    try {
      rows.predicted.push_back(std::stod(cells[static_cast<std::size_t>(pc)]));
      rows.actual.push_back(std::stod(cells[static_cast<std::size_t>(ac)]));
    } catch (const std::exception&) {
      throw ParseError("bad number in " + path.string(), line_no);
    }
    rows.route.push_back(rc >= 0 ? cells[static_cast<std::size_t>(rc)] : "");
  }
  return rows;
}

int evaluate_predictions(const fs::path& path, bool as_json) {
  const auto rows = read_prediction_csv(path);
  const auto all = evaluate_pairs(rows.actual, rows.predicted);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (std::size_t k = 0; k < rows.actual.size(); ++k) {
    if (rows.route[k].empty()) continue;
    groups[rows.route[k]].first.push_back(rows.actual[k]);
    groups[rows.route[k]].second.push_back(rows.predicted[k]);
  }
  json by_route = json::object();
  for (const auto& [label, g] : groups) by_route[label] = to_json(evaluate_pairs(g.first, g.second));
  if (as_json) {
    print_json({{"all", to_json(all)}, {"by_route", by_route}});
    return Ok;
  }
  std::cout << "pairs " << all.n_pairs << "  MAE " << fixed(all.mae, 6) << "  RMSE " << fixed(all.rmse, 6) << "\n";
  for (const auto& [label, m] : by_route.items())
    std::cout << "  " << std::left << std::setw(22) << label << std::right << " pairs " << m.at("n_pairs")
              << "  MAE " << fixed(m.at("mae").get<double>(), 6) << "  RMSE " << fixed(m.at("rmse").get<double>(), 6)
              << "\n";
  return Ok;
}

int evaluate_report(const fs::path& path, bool as_json) {
  const json report = read_json(fs::is_directory(path) ? path / "report.json" : path);
  const auto& s = report.at("summary").at("full_test");
  const double arrqp = s.at("arrqp").at("mean_mae").get<double>();
  json improvements;
  for (const char* base : {"sorrqp", "global_mean"}) {
    const double b = s.at(base).at("mean_mae").get<double>();
    improvements[base] = improvement(arrqp, b);
  }
  if (as_json) {
    print_json({{"summary", report.at("summary")}, {"mae_improvement_percent", improvements}});
    return Ok;
  }
  print_summary(report);
  std::cout << "ARRQP MAE improvement: vs SORRQP " << fixed(improvements["sorrqp"].get<double>(), 2)
            << "%, vs global mean " << fixed(improvements["global_mean"].get<double>(), 2) << "%\n";
  return Ok;
}

// --- detect ----------------------------------------------------------------------------------

QosMatrix detection_matrix(const Overrides& o, const std::string& mode) {
  const ArrqpConfig cfg = o.resolve();
  const auto data = load_data(cfg);
  if (mode == "full") return data.dataset.matrix;
  const std::uint64_t seed = run_seed(cfg, 0);
  return split(data.dataset.matrix, {cfg.density, cfg.validation_percent, mix_seed(seed, 1)}).train;
}

int cmd_greysheep(const Overrides& o, const std::string& mode, double c, const std::string& csv, bool as_json) {
  const QosMatrix q = detection_matrix(o, mode);
  const auto report = detect_greysheep(q, c);
  if (!csv.empty()) write_greysheep_csv(csv, report);
  json users = json::array(), services = json::array();
  for (auto i : report.users) users.push_back(entity_label('u', i));
  for (auto j : report.services) services.push_back(entity_label('s', j));
  if (as_json) {
    json j = to_json(report);
    j["mode"] = mode;
    j["users"] = users;
    j["services"] = services;
    j["user_indices"] = report.users;
    j["service_indices"] = report.services;
    print_json(j);
    return Ok;
  }
  std::cout << "c = " << c << " (" << mode << " data)\n"
            << "tau_user = " << fixed(report.tau_user) << ", grey-sheep users (" << report.users.size()
            << "): " << users.dump() << "\n"
            << "tau_service = " << fixed(report.tau_service) << ", grey-sheep services (" << report.services.size()
            << "): " << services.dump() << "\n";
  return Ok;
}

int cmd_outliers(const Overrides& o, const std::string& mode, double lambda, const std::string& csv,
                 bool as_json) {
  const ArrqpConfig cfg = o.resolve();
  const QosMatrix q = detection_matrix(o, mode);
  IsolationForestOptions opts = cfg.iforest;
  opts.seed = mix_seed(run_seed(cfg, 0), 2);
  const auto report = detect_outliers(q, lambda, opts, cfg.outlier_features);
  if (!csv.empty()) write_outlier_csv(csv, report);
  if (as_json) {
    json j = to_json(report);
    j["mode"] = mode;
    print_json(j);
    return Ok;
  }
  std::cout << "lambda = " << lambda << " (" << mode << " data): " << report.removed.size() << " of "
            << report.entries.size() << " entries flagged\n";
  const std::size_t shown = std::min<std::size_t>(report.removed.size(), 20);
  for (std::size_t k = 0; k < shown; ++k) {
    const auto idx = report.removed[k];
    const auto& e = report.entries[idx];
    std::cout << "  " << entity_label('u', e.user) << " " << entity_label('s', e.service) << "  q = " << e.value
              << "  score " << fixed(report.scores(static_cast<Eigen::Index>(idx))) << "\n";
  }
  if (shown < report.removed.size()) std::cout << "  ... (" << report.removed.size() - shown << " more)\n";
  return Ok;
}

// --- predict ---------------------------------------------------------------------------------

fs::path bundle_path(const Overrides& o, const std::string& bundle) {
  if (!bundle.empty()) return bundle;
  const fs::path dir = artifact_dir(o.resolve());
  if (dir.empty()) throw std::invalid_argument("no bundle: pass --bundle, --out or set ARRQP_CACHE_DIR");
  return dir;
}

std::vector<std::pair<std::size_t, std::size_t>> read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    for (auto& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    long long u = 0, s = 0;
    if (!(ss >> u)) continue;
    if (!(ss >> s) || u < 0 || s < 0) throw ParseError("expected 'user service' indices", line_no);
    pairs.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(s));
  }
  return pairs;
}

int cmd_predict(const Overrides& o, const std::string& bundle, std::optional<std::size_t> user,
                std::optional<std::size_t> service, const std::string& pairs_file, const std::string& out,
                bool as_json) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (!pairs_file.empty()) {
    pairs = read_pairs(pairs_file);
  } else if (user && service) {
    pairs.emplace_back(*user, *service);
  } else {
    throw std::invalid_argument("give --user and --service, or --pairs");
  }
  const Predictor predictor = load_bundle(bundle_path(o, bundle));
  std::set<std::string> fallbacks;
  json rows = json::array();
  std::ofstream csv;
  if (!out.empty()) {
    csv.open(out);
    if (!csv) throw std::runtime_error("cannot write " + out);
    csv.precision(10);
    csv << "user,service,predicted,route\n";
  }
  for (const auto& [u, s] : pairs) {
    if (u >= predictor.sorrqp.n_users() || s >= predictor.sorrqp.n_services())
      throw DimensionError("pair (" + std::to_string(u) + ", " + std::to_string(s) + ") is outside the trained matrix");
    RoutingDecision d;
    const double q = predictor.predict(u, s, &d, &fallbacks);
    rows.push_back({{"user", u}, {"service", s}, {"predicted", q}, {"route", d.label()}});
    if (csv.is_open()) csv << u << ',' << s << ',' << q << ',' << d.label() << '\n';
  }
  for (const auto& f : fallbacks) warn("head " + f + " is untrained; its pairs use SORRQP");
  if (as_json) {
    print_json(rows);
  } else if (!csv.is_open()) {
    for (const auto& r : rows)
      std::cout << r.at("user") << " " << r.at("service") << " " << r.at("predicted").get<double>() << " "
                << r.at("route").get<std::string>() << "\n";
  } else {
    std::cout << "wrote " << rows.size() << " predictions to " << out << "\n";
  }
  return Ok;
}

// --- ablate ----------------------------------------------------------------------------------

std::vector<std::pair<std::string, json>> ablation_variants(const std::string& study,
                                                            const std::vector<std::string>& values,
                                                            const ArrqpConfig& base) {
  std::vector<std::pair<std::string, json>> v;
  auto list = [&](std::vector<std::string> defaults) { return values.empty() ? defaults : values; };
  if (study == "features") {
    for (const auto& set : list({"context", "qos", "combined"}))
      v.push_back({set, {{"features", {{"feature_set", set}}}}});
  } else if (study == "models") {
    const int heads = base.gcmf.n_heads;
    v.push_back({"mhgcmf", {{"model", {{"family", "mhgcmf"}}}}});
    v.push_back({"mhgat", {{"model", {{"family", "mhgat"}}}}});
    if (heads != 1) v.push_back({"single_head", {{"model", {{"family", "mhgcmf"}, {"n_heads", 1}}}}});
  } else if (study == "density") {
    for (const auto& x : list({"5", "10", "15", "20"})) v.push_back({x, {{"split", {{"density", std::stod(x)}}}}});
  } else if (study == "gamma") {
    for (const auto& g : list({"0.1", "0.25", "0.5", "1", "2"}))
      v.push_back({g, {{"model", {{"gamma", std::stod(g)}}}}});
  } else if (study == "heads") {
    for (const auto& h : list({"1", "2", "3", "4"})) v.push_back({h, {{"model", {{"n_heads", std::stoi(h)}}}}});
  } else if (study == "c") {
    for (const auto& c : list({"1", "1.5", "2", "2.5", "3"})) v.push_back({c, {{"anomaly", {{"c", std::stod(c)}}}}});
  } else if (study == "lambda") {
    for (const auto& l : list({"0", "0.05", "0.1", "0.15"}))
      v.push_back({l, {{"anomaly", {{"lambda", std::stod(l)}}}}});
  } else {
    throw std::invalid_argument("unknown study '" + study + "' (features|models|density|gamma|heads|c|lambda)");
  }
  return v;
}

int cmd_ablate(const Overrides& o, const std::string& study, const std::vector<std::string>& values,
               const std::string& csv, bool as_json) {
  ArrqpConfig cfg = o.resolve();
  cfg.output_dir.clear();
  const auto rows = run_ablation(cfg, study, ablation_variants(study, values, cfg));
  if (!csv.empty()) write_ablation_csv(csv, rows);
  if (as_json) {
    json j = json::array();
    for (const auto& r : rows)
      j.push_back({{"variable", r.variable},
                   {"value", r.value},
                   {"mae", r.mae},
                   {"rmse", r.rmse},
                   {"sorrqp_mae", r.sorrqp_mae},
                   {"sorrqp_rmse", r.sorrqp_rmse}});
    print_json(j);
    return Ok;
  }
  std::cout << std::left << std::setw(16) << study << std::right << "  ARRQP MAE  ARRQP RMSE  SORRQP MAE  SORRQP RMSE\n";
  for (const auto& r : rows)
    std::cout << std::left << std::setw(16) << r.value << std::right << "  " << std::setw(9) << fixed(r.mae) << "  "
              << std::setw(10) << fixed(r.rmse) << "  " << std::setw(10) << fixed(r.sorrqp_mae) << "  "
              << std::setw(11) << fixed(r.sorrqp_rmse) << "\n";
  return Ok;
}

void silent(const std::string&) {}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return Data;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return Data;
  } catch (const GenerationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return Data;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return Data;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return Usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Runtime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARRQP: anomaly-resilient QoS prediction"};
  app.require_subcommand(1);
  app.fallthrough();
  bool as_json = false, quiet = false;
  app.add_flag("--json", as_json, "machine-readable output")->configurable(false);
  app.add_flag("-q,--quiet", quiet, "suppress warnings");
  Overrides o;

  auto* ingest = app.add_subcommand("ingest", "validate a dataset and print its statistics");
  add_data_options(ingest, o);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with planted anomalies");
  add_data_options(synth, o);
  std::string synth_out, synth_matrix;
  synth->add_option("--out", synth_out, "output JSON file")->required();
  synth->add_option("--matrix-out", synth_matrix, "also write the matrix in WS-DREAM text format");

  auto* train = app.add_subcommand("train", "run the full pipeline and report test metrics");
  add_data_options(train, o);
  add_model_options(train, o);
  std::string report_path;
  train->add_option("--report", report_path, "write the report JSON here");

  auto* detect = app.add_subcommand("detect", "anomaly detection only");
  detect->require_subcommand(1);
  std::string mode = "full", csv;
  double c_value = 2.0, lambda_value = 0.1;
  auto* greysheep = detect->add_subcommand("greysheep", "grey-sheep users and services");
  add_data_options(greysheep, o);
  greysheep->add_option("--c", c_value, "threshold multiplier")->capture_default_str();
  greysheep->add_option("--mode", mode, "full data or the training split")->check(CLI::IsMember({"full", "train"}));
  greysheep->add_option("--csv", csv, "write scores as CSV");
  auto* outliers = detect->add_subcommand("outliers", "isolation-forest outlier entries");
  add_data_options(outliers, o);
  outliers->add_option("--lambda", lambda_value, "fraction of entries to flag")->capture_default_str();
  outliers->add_option("--mode", mode, "full data or the training split")->check(CLI::IsMember({"full", "train"}));
  outliers->add_option("--csv", csv, "write flagged entries as CSV");

  auto* predict = app.add_subcommand("predict", "predict QoS with a trained bundle");
  add_data_options(predict, o);
  std::string bundle, pairs_file, predict_out;
  std::optional<std::size_t> user, service;
  predict->add_option("--bundle", bundle, "artifact directory written by train");
  predict->add_option("--out", predict_out, "write predictions as CSV");
  predict->add_option("--user", user, "user index (0-based)");
  predict->add_option("--service", service, "service index (0-based)");
  predict->add_option("--pairs", pairs_file, "file of 'user service' index lines")->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand("evaluate", "metrics from a predictions CSV or a stored report");
  std::string predictions_file, report_file;
  auto* pf = evaluate->add_option("--predictions", predictions_file, "CSV with predicted and actual columns")
                 ->check(CLI::ExistingFile);
  auto* rf = evaluate->add_option("--report", report_file, "report.json or a bundle directory")->check(CLI::ExistingPath);
  pf->excludes(rf);

  auto* ablate = app.add_subcommand("ablate", "feature/model ablations and parameter sweeps");
  add_data_options(ablate, o);
  add_model_options(ablate, o);
  std::string study = "features";
  std::vector<std::string> values;
  ablate->add_option("--study", study, "features|models|density|gamma|heads|c|lambda")->capture_default_str();
  ablate->add_option("--values", values, "override the swept values")->delimiter(',');
  ablate->add_option("--csv", csv, "write the sweep as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : Usage;
  }
  if (quiet) set_warning_sink(silent);

  return guarded([&]() -> int {
    if (*ingest) return cmd_ingest(o, as_json);
    if (*synth) return cmd_synth(o, synth_out, synth_matrix, as_json);
    if (*train) return cmd_train(o, as_json, report_path);
    if (*greysheep) return cmd_greysheep(o, mode, c_value, csv, as_json);
    if (*outliers) return cmd_outliers(o, mode, lambda_value, csv, as_json);
    if (*predict) return cmd_predict(o, bundle, user, service, pairs_file, predict_out, as_json);
    if (*evaluate) {
      if (!predictions_file.empty()) return evaluate_predictions(predictions_file, as_json);
      if (!report_file.empty()) return evaluate_report(report_file, as_json);
      throw std::invalid_argument("evaluate needs --predictions or --report");
    }
    if (*ablate) return cmd_ablate(o, study, values, csv, as_json);
    return Usage;
  });
}
