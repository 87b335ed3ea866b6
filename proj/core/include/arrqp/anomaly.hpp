#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/common.hpp"
#include "arrqp/dataset.hpp"

namespace arrqp {

// --- grey sheep ----------------------------------------------------------------------------------

/// 1 - min-max-normalized population std of each QIV. Entities without observations score 0 and
/// are left out of the min/max; if all remaining std values are equal every one of them scores 1.
struct ReliabilityScores {
  Vector user;
  Vector service;
};

ReliabilityScores reliability_scores(const QosMatrix& train);

/// Mean without one minimum and one maximum; plain mean for <= 2 values, 0 when empty.
double trimmed_mean(std::span<const double> values);

struct GaScores {
  Vector user;
  Vector service;
  std::vector<std::size_t> user_counts;  // invocations per entity; 0 marks an entity without data
  std::vector<std::size_t> service_counts;
};

GaScores ga_scores(const QosMatrix& train, const ReliabilityScores& reliability);

struct GreysheepReport {
  double c = 2.0;
  double tau_user = 0.0;
  double tau_service = 0.0;
  std::vector<std::size_t> users;     // ascending
  std::vector<std::size_t> services;  // ascending
  Vector user_scores;
  Vector service_scores;

  bool is_user(std::size_t i) const;
  bool is_service(std::size_t j) const;
};

/// tau = mean + c * std (population) over each side's scores of entities with data; flags
/// score > tau. When counts are absent every entity takes part.
GreysheepReport detect_greysheep(const GaScores& ga, double c);
GreysheepReport detect_greysheep(const QosMatrix& train, double c);

// --- isolation forest ----------------------------------------------------------------------------

/// Average path length of an unsuccessful BST search over n points: 2H(n-1) - 2(n-1)/n.
double average_path_length(std::size_t n);

struct IsolationForestOptions {
  int n_trees = 100;
  std::size_t subsample = 256;
  int max_depth = 0;  // <= 0: ceil(log2(subsample))
  std::uint64_t seed = 0;
};

class IsolationForest {
 public:
  static IsolationForest fit(const Matrix& points, const IsolationForestOptions& options);

  /// Path length of x averaged over the trees.
  double mean_path_length(const Eigen::Ref<const RowVector>& x) const;
  /// 2^(-E[h(x)] / c(psi)) for every row.
  Vector score(const Matrix& points) const;

  std::size_t sample_size() const { return psi_; }
  std::size_t n_trees() const { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    std::size_t size = 0;
  };
  using Tree = std::vector<Node>;

  static int grow(Tree& tree, const Matrix& points, std::vector<Eigen::Index>& idx, std::size_t lo,
                  std::size_t hi, int depth, int max_depth, std::mt19937_64& rng);

  std::vector<Tree> trees_;
  std::size_t psi_ = 0;
};

Vector isolation_forest_scores(const Matrix& points, const IsolationForestOptions& options);

// --- outliers ------------------------------------------------------------------------------------

enum class OutlierFeatures { Residual, Raw };

const char* to_string(OutlierFeatures f);
OutlierFeatures parse_outlier_features(const std::string& text);

/// One row per observed entry (QosMatrix::entries order): [q] or [q, q - mu_user, q - mu_service].
Matrix outlier_features(const QosMatrix& train, OutlierFeatures features);

struct OutlierReport {
  double lambda = 0.0;
  std::vector<Entry> entries;       // observed entries scored
  Vector scores;                    // per entry, higher = more anomalous
  std::vector<std::size_t> removed; // indices into entries, highest score first
};

/// Entries ranked by (score desc, user asc, service asc); the first round(lambda * count) of them.
std::vector<std::size_t> select_outliers(const std::vector<Entry>& entries, const Vector& scores,
                                         double lambda);
/// Copy of train with the selected entries unobserved.
QosMatrix remove_outliers(const QosMatrix& train, const std::vector<Entry>& entries, const Vector& scores,
                          double lambda);

OutlierReport detect_outliers(const QosMatrix& train, double lambda, const IsolationForestOptions& options,
                              OutlierFeatures features = OutlierFeatures::Residual);
QosMatrix apply_removal(const QosMatrix& train, const OutlierReport& report);

nlohmann::json to_json(const GreysheepReport& report);
nlohmann::json to_json(const OutlierReport& report);
/// "side,index,score,flagged" rows.
void write_greysheep_csv(const std::filesystem::path& path, const GreysheepReport& report);
/// "user,service,value,score,removed" rows.
void write_outlier_csv(const std::filesystem::path& path, const OutlierReport& report);

}  // namespace arrqp
