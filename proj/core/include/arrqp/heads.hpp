#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/anomaly.hpp"
#include "arrqp/common.hpp"
#include "arrqp/dataset.hpp"
#include "arrqp/features.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

struct MlpConfig {
  std::vector<Eigen::Index> hidden = {128, 50};
  nn::Activation hidden_activation = nn::Activation::Sigmoid;
  nn::LossSpec loss;  // gamma in QoS units; rescaled with the targets
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  double learning_rate = 0.001;
  int max_epochs = 500;
  int patience = 3;
  int batch_size = 32;
  double validation_fraction = 0.2;
  // Heads with fewer training pairs stay untrained (their pairs fall back to SORRQP).
  int min_pairs = 30;
};

/// Sigmoid-terminated MLP; predictions are made on standardized inputs and inverse-scaled targets.
class Mlp {
 public:
  Mlp() = default;
  Mlp(Eigen::Index input_dim, const MlpConfig& config, std::uint64_t seed);

  /// Training-mode forward (caches for backward).
  Vector forward(const Matrix& x);
  void backward(const Vector& d_out);
  /// Pure forward pass; safe to call concurrently.
  Vector evaluate(const Matrix& x) const;

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  nn::ParameterList parameters();
  std::vector<const nn::Parameter*> parameters() const;

 private:
  std::vector<nn::Dense> layers_;
};

struct HeadModel {
  std::string name;
  bool trained = false;
  Mlp net;
  RowVector feature_mean;
  RowVector feature_scale;
  double target_min = 0.0;
  double target_max = 1.0;
  std::size_t training_pairs = 0;
  nn::TrainHistory history;

  double predict(const RowVector& features) const;
  Vector predict(const Matrix& features) const;
};

/// Min-max scales y, standardizes x, trains with mini-batches and early stopping on a seeded
/// validation split. Fewer than config.min_pairs rows yield an untrained head.
HeadModel train_head(const std::string& name, const Matrix& x, const Vector& y, const MlpConfig& config,
                     std::uint64_t seed);

enum class GreysheepCategory { RegularUserGsService, GsUserRegularService, GsUserGsService };
enum class ColdCategory { ColdUser, ColdService, ColdBoth };

const char* to_string(GreysheepCategory c);
const char* to_string(ColdCategory c);

/// How a cold entity's collaborative block is filled: zeros, or the mean NMF factor of warm entities.
enum class ColdCollaborative { Zero, Mean };

const char* to_string(ColdCollaborative c);
ColdCollaborative parse_cold_collaborative(const std::string& text);

/// Entities without training observations.
struct ColdRegistry {
  std::vector<bool> users;
  std::vector<bool> services;

  static ColdRegistry from_matrix(const QosMatrix& train);
  bool user(std::size_t i) const { return i < users.size() && users[i]; }
  bool service(std::size_t j) const { return j < services.size() && services[j]; }
  std::size_t cold_user_count() const;
  std::size_t cold_service_count() const;
};

/// Everything the head feature builders read.
struct HeadFeatureSource {
  Matrix user_embedding;     // E_u (n x 64)
  Matrix service_embedding;  // E_s
  Matrix user_initial;       // F0 rows of users
  Matrix service_initial;
  Vector user_ga;
  Vector service_ga;
  std::vector<std::size_t> user_counts;
  std::vector<std::size_t> service_counts;
  Matrix user_context;  // encoded context codes
  Matrix service_context;
  Matrix user_nmf;
  Matrix service_nmf;
  RowVector user_nmf_mean;  // over warm users
  RowVector service_nmf_mean;
  ColdCollaborative cold_collaborative = ColdCollaborative::Zero;

  /// [E] for a regular entity, [E | F0 | GA | count] for a grey-sheep one.
  RowVector greysheep_entity(Side side, std::size_t index, bool greysheep) const;
  /// [context code | collaborative block].
  RowVector cold_entity(Side side, std::size_t index) const;
  RowVector known_entity(Side side, std::size_t index) const;
};

HeadFeatureSource make_head_source(const Matrix& user_embedding, const Matrix& service_embedding,
                                   const FeatureArtifacts& features, const GaScores& ga,
                                   const ColdRegistry& cold, ColdCollaborative collaborative);

/// Throws RoutingError when the pair does not belong to the category.
RowVector build_grrqp_features(const HeadFeatureSource& src, GreysheepCategory category, std::size_t user,
                               std::size_t service, const GreysheepReport& report);
/// Builds the cold-style features for the pair. With `simulate` set the cold side is represented
/// as cold even though it has data (used to train on observed pairs); otherwise a category
/// mismatch throws RoutingError.
RowVector build_crrqp_features(const HeadFeatureSource& src, ColdCategory category, std::size_t user,
                               std::size_t service, const ColdRegistry& cold, bool simulate = false);

/// Three grey-sheep heads and three cold-start heads.
struct HeadSet {
  std::array<HeadModel, 3> grrqp;
  std::array<HeadModel, 3> crrqp;

  HeadModel& grrqp_head(GreysheepCategory c) { return grrqp[static_cast<std::size_t>(c)]; }
  HeadModel& crrqp_head(ColdCategory c) { return crrqp[static_cast<std::size_t>(c)]; }
  const HeadModel& grrqp_head(GreysheepCategory c) const { return grrqp[static_cast<std::size_t>(c)]; }
  const HeadModel& crrqp_head(ColdCategory c) const { return crrqp[static_cast<std::size_t>(c)]; }
};

/// Category of a training pair for the grey-sheep heads, if any.
std::optional<GreysheepCategory> greysheep_category(std::size_t user, std::size_t service,
                                                    const GreysheepReport& report);

HeadSet train_grrqp(const QosMatrix& train, const HeadFeatureSource& src, const GreysheepReport& report,
                    const MlpConfig& config, std::uint64_t seed, HeadSet heads = {});

/// Trains a cold head only when the corresponding cold category can occur (cold users for CSU,
/// cold services for CSS, both for CSB). Training pairs are observed pairs among warm entities
/// with the cold side represented cold-style.
HeadSet train_crrqp(const QosMatrix& train, const HeadFeatureSource& src, const ColdRegistry& cold,
                    const MlpConfig& config, std::uint64_t seed, HeadSet heads = {});

void save_heads(const std::filesystem::path& dir, const HeadSet& heads);
/// Missing head files leave the head untrained.
HeadSet load_heads(const std::filesystem::path& dir);

}  // namespace arrqp
