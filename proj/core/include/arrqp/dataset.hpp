#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/common.hpp"

namespace arrqp {

enum class ParameterKind { ResponseTime, Throughput };

const char* to_string(ParameterKind kind);
ParameterKind parse_parameter_kind(const std::string& text);

/// One observed invocation (user i, service j, value q_ij).
struct Entry {
  std::size_t user = 0;
  std::size_t service = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Partially observed n x m QoS log. Unobserved cells hold 0; observed cells are strictly positive.
class QosMatrix {
 public:
  QosMatrix() = default;
  QosMatrix(std::size_t n_users, std::size_t n_services);

  std::size_t n_users() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t n_services() const { return static_cast<std::size_t>(values_.cols()); }

  bool observed(std::size_t i, std::size_t j) const { return mask_(i, j) != 0; }
  double value(std::size_t i, std::size_t j) const { return values_(i, j); }

  /// Marks (i, j) observed with value v. Throws std::invalid_argument for v <= 0.
  void set(std::size_t i, std::size_t j, double v);
  void clear(std::size_t i, std::size_t j);

  std::size_t observed_count() const { return observed_; }
  /// Observed entries in row-major order.
  std::vector<Entry> entries() const;

  /// Observed values of user i's row (side = User) or service j's column (side = Service).
  std::vector<double> qiv(Side side, std::size_t index) const;
  std::size_t invocation_count(Side side, std::size_t index) const;

  /// Dense values with zeros at unobserved cells.
  const Matrix& values() const { return values_; }
  /// 1.0 where observed, 0.0 elsewhere.
  Matrix mask_matrix() const;

  friend bool operator==(const QosMatrix& a, const QosMatrix& b);

 private:
  Matrix values_;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask_;
  std::size_t observed_ = 0;
};

/// Categorical context for users (region, AS) or services (region, provider).
struct ContextTable {
  Side kind = Side::User;
  std::vector<std::string> ids;
  std::vector<std::size_t> region;
  std::vector<std::size_t> group;
  std::vector<std::string> region_names;
  std::vector<std::string> group_names;

  std::size_t size() const { return ids.size(); }
  std::size_t region_cardinality() const { return region_names.size(); }
  std::size_t group_cardinality() const { return group_names.size(); }

  /// Checks index ranges and per-column lengths; throws DimensionError.
  void validate() const;
};

struct Dataset {
  QosMatrix matrix;
  ContextTable user_context;
  ContextTable service_context;
  ParameterKind kind = ParameterKind::ResponseTime;

  void validate() const;
};

/// Column layout of a tab-separated entity list file (0-based column indices).
struct ContextColumns {
  std::size_t id = 0;
  std::size_t region = 2;
  std::size_t group = 4;

  static ContextColumns wsdream_users() { return {0, 2, 4}; }
  static ContextColumns wsdream_services() { return {0, 4, 2}; }
};

QosMatrix read_qos_matrix(const std::filesystem::path& path);
/// Writes one row per user; unobserved cells are written as -1.
void write_qos_matrix(const std::filesystem::path& path, const QosMatrix& matrix);

ContextTable read_context_table(const std::filesystem::path& path, Side kind,
                                const ContextColumns& columns);

Dataset load_wsdream(const std::filesystem::path& matrix_path,
                     const std::filesystem::path& user_list_path,
                     const std::filesystem::path& service_list_path, ParameterKind kind,
                     const ContextColumns& user_columns = ContextColumns::wsdream_users(),
                     const ContextColumns& service_columns = ContextColumns::wsdream_services());

/// Contexts with a single region/group each; used when no list files are available.
ContextTable trivial_context(Side kind, std::size_t count);

struct SplitSpec {
  double train_percent = 10.0;
  double validation_percent_of_train = 20.0;
  std::uint64_t seed = 0;
};

struct Split {
  QosMatrix train;
  QosMatrix validation;
  QosMatrix test;
};

/// Partitions the observed entries uniformly at random. |train u val| = round(x% of observed).
Split split(const QosMatrix& matrix, const SplitSpec& spec);

struct DatasetSummary {
  std::size_t n_users = 0;
  std::size_t n_services = 0;
  std::size_t user_regions = 0;
  std::size_t user_groups = 0;
  std::size_t service_regions = 0;
  std::size_t service_groups = 0;
  std::size_t observed = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
};

DatasetSummary summarize(const Dataset& dataset);

// --- synthetic data -------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t n_users = 30;
  std::size_t n_services = 50;
  std::size_t rank = 3;
  double density = 0.2;
  double noise_std = 0.05;
  double outlier_fraction = 0.0;
  double outlier_scale = 100.0;
  std::size_t greysheep_users = 0;
  std::size_t cold_users = 0;
  std::size_t cold_services = 0;
  std::uint64_t seed = 0;
  std::size_t user_regions = 4;
  std::size_t service_regions = 5;
  /// Grey-sheep rows are drawn around greysheep_level x (global mean of the low-rank part).
  double greysheep_level = 6.0;
};

/// What was planted by generate_synthetic. Cold entities have no observed cells in the dataset;
/// cold_entries holds the values they would have had, for evaluation.
struct GroundTruth {
  std::vector<Entry> outliers;  // value = pre-scaling value
  std::vector<std::size_t> greysheep_users;
  std::vector<std::size_t> cold_users;
  std::vector<std::size_t> cold_services;
  std::vector<Entry> cold_entries;
};

struct SyntheticDataset {
  Dataset dataset;
  GroundTruth truth;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

nlohmann::json to_json(const Dataset& dataset);
nlohmann::json to_json(const GroundTruth& truth);
Dataset dataset_from_json(const nlohmann::json& j);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

void save_synthetic(const std::filesystem::path& path, const SyntheticDataset& data);
SyntheticDataset load_synthetic(const std::filesystem::path& path);

}  // namespace arrqp
