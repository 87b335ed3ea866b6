#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/anomaly.hpp"
#include "arrqp/dataset.hpp"
#include "arrqp/eval.hpp"
#include "arrqp/factorization.hpp"
#include "arrqp/features.hpp"
#include "arrqp/graph.hpp"
#include "arrqp/heads.hpp"
#include "arrqp/mhgat.hpp"
#include "arrqp/mhgcmf.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

enum class ModelFamily { MhGcmf, MhGat };

const char* to_string(ModelFamily family);
ModelFamily parse_model_family(const std::string& text);

struct ArrqpConfig {
  // data: WS-DREAM files, a saved synthetic dataset, or a synthetic spec (in that order)
  std::string matrix_path;
  std::string users_path;
  std::string services_path;
  std::string synthetic_path;
  SyntheticSpec synthetic;
  ParameterKind kind = ParameterKind::ResponseTime;

  double density = 10.0;  // train percent x
  double validation_percent = 20.0;
  std::uint64_t seed = 0;
  int runs = 10;

  FeatureConfig features;

  double c = 2.0;
  double lambda = 0.1;
  IsolationForestOptions iforest;
  OutlierFeatures outlier_features = OutlierFeatures::Residual;

  ModelFamily family = ModelFamily::MhGcmf;
  MhGcmfConfig gcmf;
  MhGatConfig gat;
  nn::TrainConfig train{.warmup_epochs = 50};  // Adam, 0.001, 20000 epochs, patience 300
  bool center_features = true;  // subtract F0 column means before the graph model
  nn::LossSpec loss;
  std::optional<double> gamma;  // unset: 0.25 for RT, 10 for TP

  MlpConfig mlp;
  std::optional<double> head_gamma;  // unset: same as gamma
  bool enable_grrqp = true;
  bool enable_crrqp = true;
  ColdCollaborative cold_collaborative = ColdCollaborative::Zero;

  std::string output_dir;

  double effective_gamma() const;
  double effective_head_gamma() const;
  bool uses_wsdream() const { return !matrix_path.empty(); }
  /// Throws std::invalid_argument for out-of-range hyperparameters.
  void validate() const;
};

nlohmann::json to_json(const ArrqpConfig& config);
/// Overlays the keys present in j onto base; unknown keys throw std::invalid_argument.
ArrqpConfig config_from_json(const nlohmann::json& j, ArrqpConfig base = {});
ArrqpConfig load_config(const std::filesystem::path& path, ArrqpConfig base = {});
/// FNV-1a (64 bit) of the canonical config JSON, as 16 hex digits.
std::string fingerprint(const ArrqpConfig& config);
/// config.output_dir, else $ARRQP_CACHE_DIR/<fingerprint>, else empty (no persistence).
std::filesystem::path artifact_dir(const ArrqpConfig& config);

/// Untrained model of the configured family for feature_dim input columns.
std::shared_ptr<EmbeddingModel> make_model(const ArrqpConfig& config, Eigen::Index feature_dim, std::uint64_t seed);

/// SORRQP: the configured model trained with the configured loss (gamma resolved per dataset kind).
TrainedSorrqp train_sorrqp(const QosMatrix& train, const QosMatrix& validation, const FeatureEmbedding& f0,
                           const SparseMatrix& adjacency, const ArrqpConfig& config, std::uint64_t seed);

// --- routing -------------------------------------------------------------------------------------

enum class RouteKind { Sorrqp, Grrqp, Crrqp };

struct RoutingDecision {
  std::size_t user = 0;
  std::size_t service = 0;
  RouteKind kind = RouteKind::Sorrqp;
  GreysheepCategory greysheep = GreysheepCategory::GsUserGsService;  // valid for Grrqp
  ColdCategory cold = ColdCategory::ColdBoth;                        // valid for Crrqp

  std::string label() const;
};

/// Cold entities first, then grey-sheep categories, else SORRQP.
RoutingDecision route(std::size_t user, std::size_t service, const GreysheepReport& report,
                      const ColdRegistry& cold);

/// Everything needed to answer a prediction query.
struct Predictor {
  TrainedSorrqp sorrqp;
  HeadSet heads;
  HeadFeatureSource source;
  GreysheepReport greysheep;
  ColdRegistry cold;

  /// Routes the pair and predicts. Untrained heads fall back to SORRQP; their names are added to
  /// `fallbacks` when given.
  double predict(std::size_t user, std::size_t service, RoutingDecision* decision = nullptr,
                 std::set<std::string>* fallbacks = nullptr) const;
};

// --- pipeline ------------------------------------------------------------------------------------

struct LoadedData {
  Dataset dataset;
  std::optional<GroundTruth> truth;
};

LoadedData load_data(const ArrqpConfig& config);

/// One full train/evaluate pass at one seed.
struct RunArtifacts {
  std::uint64_t seed = 0;
  Split split;
  std::vector<Entry> test_entries;  // split.test plus held-back cold-entity entries
  OutlierReport outliers;
  QosMatrix clean_train;
  FeatureArtifacts features;
  SparseMatrix adjacency;
  Predictor predictor;
  std::vector<Entry> clean_test_entries;
  nlohmann::json report;
};

RunArtifacts run_once(const ArrqpConfig& config, const LoadedData& data, std::uint64_t run_seed);

struct PipelineResult {
  nlohmann::json report;
  RunArtifacts first;
  std::filesystem::path bundle_dir;  // empty when nothing was persisted
};

/// load -> split -> outliers -> features -> graph -> SORRQP -> grey sheep -> GRRQP -> CRRQP ->
/// evaluation, repeated config.runs times with derived seeds. Persists the first run's bundle to
/// artifact_dir(config) when that is non-empty.
PipelineResult run_pipeline(const ArrqpConfig& config);

/// Seed of the r-th repeated run.
std::uint64_t run_seed(const ArrqpConfig& config, int r);

/// Copy of the report without the "meta" block (timestamps, host data).
nlohmann::json strip_meta(const nlohmann::json& report);

void save_bundle(const std::filesystem::path& dir, const ArrqpConfig& config, const RunArtifacts& run,
                 const nlohmann::json& report);
/// Loads the predictor of a persisted bundle; missing head files degrade to SORRQP.
Predictor load_bundle(const std::filesystem::path& dir);

// --- ablations -----------------------------------------------------------------------------------

struct AblationRow {
  std::string variable;
  std::string value;
  double mae = 0.0;
  double rmse = 0.0;
  double sorrqp_mae = 0.0;
  double sorrqp_rmse = 0.0;
};

/// Runs the pipeline once per variant (a JSON overlay on base) and records the mean test metrics.
std::vector<AblationRow> run_ablation(const ArrqpConfig& base, const std::string& variable,
                                      const std::vector<std::pair<std::string, nlohmann::json>>& variants);
void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

}  // namespace arrqp
