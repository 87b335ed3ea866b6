#include <cstdlib>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "arrqp/pipeline.hpp"
#include "arrqp/serialize.hpp"

namespace arrqp {

const char* to_string(ModelFamily family) { return family == ModelFamily::MhGcmf ? "mhgcmf" : "mhgat"; }

ModelFamily parse_model_family(const std::string& text) {
  if (text == "mhgcmf") return ModelFamily::MhGcmf;
  if (text == "mhgat") return ModelFamily::MhGat;
  throw std::invalid_argument("unknown model family '" + text + "' (mhgcmf|mhgat)");
}

double ArrqpConfig::effective_gamma() const {
  if (gamma) return *gamma;
  return kind == ParameterKind::ResponseTime ? 0.25 : 10.0;
}

double ArrqpConfig::effective_head_gamma() const { return head_gamma ? *head_gamma : effective_gamma(); }

void ArrqpConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  require(density > 0.0 && density < 100.0, "split.density must lie in (0, 100)");
  require(validation_percent >= 0.0 && validation_percent < 100.0, "split.validation_percent must lie in [0, 100)");
  require(runs >= 1, "runs must be >= 1");
  require(c >= 0.0, "anomaly.c must be >= 0");
  require(lambda >= 0.0 && lambda < 1.0, "anomaly.lambda must lie in [0, 1)");
  require(iforest.n_trees >= 1 && iforest.subsample >= 2, "anomaly iforest needs >= 1 tree and subsample >= 2");
  require(features.nmf_dim >= 1 && features.similarity_dim >= 1 && features.context_dim >= 1,
          "features.d_n, d_s, d_c must be >= 1");
  require(effective_gamma() > 0.0 && effective_head_gamma() > 0.0, "gamma must be > 0");
  require(!mlp.hidden.empty(), "heads.hidden must list at least one layer");
  require(mlp.validation_fraction >= 0.0 && mlp.validation_fraction < 1.0,
          "heads.validation_fraction must lie in [0, 1)");
  require(mlp.min_pairs >= 0, "heads.min_pairs must be non-negative");
  gcmf.validate();
  gat.validate();
  train.validate();
  require(gcmf.n_heads == gat.n_heads, "model.n_heads is shared by both families");
  require(users_path.empty() == services_path.empty(), "data.users and data.services go together");
  require(matrix_path.empty() ? users_path.empty() : true, "data.users and data.services need data.matrix");
}

// --- JSON ----------------------------------------------------------------------------------------

namespace {

nlohmann::json synthetic_json(const SyntheticSpec& s) {
  return {{"n_users", s.n_users},
          {"n_services", s.n_services},
          {"rank", s.rank},
          {"density", s.density},
          {"noise_std", s.noise_std},
          {"outlier_fraction", s.outlier_fraction},
          {"outlier_scale", s.outlier_scale},
          {"greysheep_users", s.greysheep_users},
          {"greysheep_level", s.greysheep_level},
          {"cold_users", s.cold_users},
          {"cold_services", s.cold_services},
          {"user_regions", s.user_regions},
          {"service_regions", s.service_regions},
          {"seed", s.seed}};
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

using Setter = std::function<void(const nlohmann::json&)>;

void overlay(const nlohmann::json& j, const std::string& section, const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw std::invalid_argument("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + section + "." + key + "': " + e.what());
    }
  }
}

template <typename T>
Setter set(T& target) {
  return [&target](const nlohmann::json& v) { target = v.get<T>(); };
}

Setter set_optional(std::optional<double>& target) {
  return [&target](const nlohmann::json& v) {
    if (v.is_null()) {
      target.reset();
    } else {
      target = v.get<double>();
    }
  };
}

}  // namespace

nlohmann::json to_json(const ArrqpConfig& c) {
  nlohmann::json j;
  j["data"] = {{"matrix", c.matrix_path},
               {"users", c.users_path},
               {"services", c.services_path},
               {"synthetic_file", c.synthetic_path},
               {"synthetic", synthetic_json(c.synthetic)},
               {"kind", to_string(c.kind)}};
  j["split"] = {{"density", c.density}, {"validation_percent", c.validation_percent}};
  j["seed"] = c.seed;
  j["runs"] = c.runs;
  const auto& f = c.features;
  j["features"] = {{"d_n", f.nmf_dim},
                   {"d_s", f.similarity_dim},
                   {"d_c", f.context_dim},
                   {"nmf_max_iters", f.nmf_max_iters},
                   {"nmf_tol", f.nmf_tol},
                   {"similarity_layout", to_string(f.similarity_layout)},
                   {"context_layout", to_string(f.context_layout)},
                   {"autoencoder_max_epochs", f.autoencoder_max_epochs},
                   {"autoencoder_patience", f.autoencoder_patience},
                   {"autoencoder_batch_size", f.autoencoder_batch_size},
                   {"autoencoder_learning_rate", f.autoencoder_learning_rate},
                   {"minmax_scale", f.minmax_scale},
                   {"feature_set", to_string(f.feature_set)}};
  j["anomaly"] = {{"c", c.c},
                  {"lambda", c.lambda},
                  {"iforest_trees", c.iforest.n_trees},
                  {"iforest_subsample", c.iforest.subsample},
                  {"iforest_max_depth", c.iforest.max_depth},
                  {"outlier_features", to_string(c.outlier_features)}};
  j["model"] = {{"family", to_string(c.family)},
                {"n_heads", c.gcmf.n_heads},
                {"blocks", c.gcmf.blocks},
                {"hidden_dim", c.gcmf.hidden_dim},
                {"embedding_dim", c.gcmf.embedding_dim},
                {"dense_wiring", to_string(c.gcmf.wiring)},
                {"gat_layers", c.gat.layers},
                {"gat_head_dim", c.gat.head_dim},
                {"leaky_slope", c.gat.leaky_slope},
                {"optimizer", nn::to_string(c.train.optimizer)},
                {"learning_rate", c.train.learning_rate},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"warmup_epochs", c.train.warmup_epochs},
                {"restore_best", c.train.restore_best},
                {"center_features", c.center_features},
                {"loss", nn::to_string(c.loss.kind)},
                {"gamma", optional_json(c.gamma)},
                {"huber_delta", c.loss.delta}};
  j["heads"] = {{"enable_grrqp", c.enable_grrqp},
                {"enable_crrqp", c.enable_crrqp},
                {"hidden", c.mlp.hidden},
                {"optimizer", nn::to_string(c.mlp.optimizer)},
                {"learning_rate", c.mlp.learning_rate},
                {"max_epochs", c.mlp.max_epochs},
                {"patience", c.mlp.patience},
                {"batch_size", c.mlp.batch_size},
                {"validation_fraction", c.mlp.validation_fraction},
                {"min_pairs", c.mlp.min_pairs},
                {"loss", nn::to_string(c.mlp.loss.kind)},
                {"gamma", optional_json(c.head_gamma)},
                {"cold_collaborative", to_string(c.cold_collaborative)}};
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

ArrqpConfig config_from_json(const nlohmann::json& j, ArrqpConfig c) {
  std::string kind = to_string(c.kind);
  std::string sim_layout = to_string(c.features.similarity_layout);
  std::string ctx_layout = to_string(c.features.context_layout);
  std::string feature_set = to_string(c.features.feature_set);
  std::string outlier_features = to_string(c.outlier_features);
  std::string family = to_string(c.family);
  std::string wiring = to_string(c.gcmf.wiring);
  std::string optimizer = nn::to_string(c.train.optimizer);
  std::string loss = nn::to_string(c.loss.kind);
  std::string head_optimizer = nn::to_string(c.mlp.optimizer);
  std::string head_loss = nn::to_string(c.mlp.loss.kind);
  std::string cold = to_string(c.cold_collaborative);
  int n_heads = c.gcmf.n_heads;

  auto& s = c.synthetic;
  const std::map<std::string, Setter> synthetic = {
      {"n_users", set(s.n_users)},           {"n_services", set(s.n_services)},
      {"rank", set(s.rank)},                 {"density", set(s.density)},
      {"noise_std", set(s.noise_std)},       {"outlier_fraction", set(s.outlier_fraction)},
      {"outlier_scale", set(s.outlier_scale)}, {"greysheep_users", set(s.greysheep_users)},
      {"greysheep_level", set(s.greysheep_level)}, {"cold_users", set(s.cold_users)},
      {"cold_services", set(s.cold_services)}, {"user_regions", set(s.user_regions)},
      {"service_regions", set(s.service_regions)}, {"seed", set(s.seed)}};
  const std::map<std::string, Setter> data = {
      {"matrix", set(c.matrix_path)},
      {"users", set(c.users_path)},
      {"services", set(c.services_path)},
      {"synthetic_file", set(c.synthetic_path)},
      {"synthetic", [&](const nlohmann::json& v) { overlay(v, "data.synthetic", synthetic); }},
      {"kind", set(kind)}};
  const std::map<std::string, Setter> split = {{"density", set(c.density)},
                                               {"validation_percent", set(c.validation_percent)}};
  auto& f = c.features;
  const std::map<std::string, Setter> features = {
      {"d_n", set(f.nmf_dim)},
      {"d_s", set(f.similarity_dim)},
      {"d_c", set(f.context_dim)},
      {"nmf_max_iters", set(f.nmf_max_iters)},
      {"nmf_tol", set(f.nmf_tol)},
      {"similarity_layout", set(sim_layout)},
      {"context_layout", set(ctx_layout)},
      {"autoencoder_max_epochs", set(f.autoencoder_max_epochs)},
      {"autoencoder_patience", set(f.autoencoder_patience)},
      {"autoencoder_batch_size", set(f.autoencoder_batch_size)},
      {"autoencoder_learning_rate", set(f.autoencoder_learning_rate)},
      {"minmax_scale", set(f.minmax_scale)},
      {"feature_set", set(feature_set)}};
  const std::map<std::string, Setter> anomaly = {{"c", set(c.c)},
                                                 {"lambda", set(c.lambda)},
                                                 {"iforest_trees", set(c.iforest.n_trees)},
                                                 {"iforest_subsample", set(c.iforest.subsample)},
                                                 {"iforest_max_depth", set(c.iforest.max_depth)},
                                                 {"outlier_features", set(outlier_features)}};
  const std::map<std::string, Setter> model = {{"family", set(family)},
                                               {"n_heads", set(n_heads)},
                                               {"blocks", set(c.gcmf.blocks)},
                                               {"hidden_dim", set(c.gcmf.hidden_dim)},
                                               {"embedding_dim", set(c.gcmf.embedding_dim)},
                                               {"dense_wiring", set(wiring)},
                                               {"gat_layers", set(c.gat.layers)},
                                               {"gat_head_dim", set(c.gat.head_dim)},
                                               {"leaky_slope", set(c.gat.leaky_slope)},
                                               {"optimizer", set(optimizer)},
                                               {"learning_rate", set(c.train.learning_rate)},
                                               {"max_epochs", set(c.train.max_epochs)},
                                               {"patience", set(c.train.patience)},
                                               {"warmup_epochs", set(c.train.warmup_epochs)},
                                               {"restore_best", set(c.train.restore_best)},
                                               {"center_features", set(c.center_features)},
                                               {"loss", set(loss)},
                                               {"gamma", set_optional(c.gamma)},
                                               {"huber_delta", set(c.loss.delta)}};
  const std::map<std::string, Setter> heads = {{"enable_grrqp", set(c.enable_grrqp)},
                                               {"enable_crrqp", set(c.enable_crrqp)},
                                               {"hidden", set(c.mlp.hidden)},
                                               {"optimizer", set(head_optimizer)},
                                               {"learning_rate", set(c.mlp.learning_rate)},
                                               {"max_epochs", set(c.mlp.max_epochs)},
                                               {"patience", set(c.mlp.patience)},
                                               {"batch_size", set(c.mlp.batch_size)},
                                               {"validation_fraction", set(c.mlp.validation_fraction)},
                                               {"min_pairs", set(c.mlp.min_pairs)},
                                               {"loss", set(head_loss)},
                                               {"gamma", set_optional(c.head_gamma)},
                                               {"cold_collaborative", set(cold)}};
  const std::map<std::string, Setter> output = {{"dir", set(c.output_dir)}};
  const std::map<std::string, Setter> top = {
      {"data", [&](const nlohmann::json& v) { overlay(v, "data", data); }},
      {"split", [&](const nlohmann::json& v) { overlay(v, "split", split); }},
      {"seed", set(c.seed)},
      {"runs", set(c.runs)},
      {"features", [&](const nlohmann::json& v) { overlay(v, "features", features); }},
      {"anomaly", [&](const nlohmann::json& v) { overlay(v, "anomaly", anomaly); }},
      {"model", [&](const nlohmann::json& v) { overlay(v, "model", model); }},
      {"heads", [&](const nlohmann::json& v) { overlay(v, "heads", heads); }},
      {"output", [&](const nlohmann::json& v) { overlay(v, "output", output); }}};
  overlay(j, "", top);

  c.kind = parse_parameter_kind(kind);
  f.similarity_layout = parse_autoencoder_layout(sim_layout);
  f.context_layout = parse_autoencoder_layout(ctx_layout);
  f.feature_set = parse_feature_set(feature_set);
  c.outlier_features = parse_outlier_features(outlier_features);
  c.family = parse_model_family(family);
  c.gcmf.wiring = parse_dense_wiring(wiring);
  c.gcmf.n_heads = n_heads;
  c.gat.n_heads = n_heads;
  c.train.optimizer = nn::parse_optimizer_kind(optimizer);
  c.loss.kind = nn::parse_loss_kind(loss);
  c.mlp.optimizer = nn::parse_optimizer_kind(head_optimizer);
  c.mlp.loss.kind = nn::parse_loss_kind(head_loss);
  c.cold_collaborative = parse_cold_collaborative(cold);
  return c;
}

ArrqpConfig load_config(const std::filesystem::path& path, ArrqpConfig base) {
  return config_from_json(read_json(path), std::move(base));
}

std::string fingerprint(const ArrqpConfig& config) {
  nlohmann::json j = to_json(config);
  j.erase("output");  // where artifacts go does not change what they contain
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::filesystem::path artifact_dir(const ArrqpConfig& config) {
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("ARRQP_CACHE_DIR"); env && *env) {
    return std::filesystem::path(env) / fingerprint(config);
  }
  return {};
}

}  // namespace arrqp
