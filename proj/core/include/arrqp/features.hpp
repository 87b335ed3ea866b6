#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "arrqp/autoencoder.hpp"
#include "arrqp/common.hpp"
#include "arrqp/dataset.hpp"

namespace arrqp {

/// Five summary statistics of one QoS invocation vector (observed entries only).
struct StatFeatures {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population
  bool empty = true;    // no observations: all fields are zero

  std::array<double, 5> as_array() const { return {min, max, mean, median, stddev}; }
};

StatFeatures statistical_features(std::span<const double> observed);
/// One row of statistics per user (side = User) or service.
Matrix statistical_block(const QosMatrix& train, Side side);

struct NmfOptions {
  std::size_t rank = 50;
  int max_iters = 500;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct NmfFactors {
  Matrix user_factors;     // n x d, >= 0
  Matrix service_factors;  // m x d, >= 0
  std::vector<double> objective;  // masked squared error; [0] is the initial value
  int iterations = 0;
};

/// Masked squared reconstruction error sum over observed (i, j) of (q_ij - u_i . v_j)^2.
double nmf_objective(const QosMatrix& train, const Matrix& user_factors, const Matrix& service_factors);

/// Multiplicative updates restricted to observed cells. Stops when the relative objective
/// improvement drops below tol or after max_iters.
NmfFactors nmf_decompose(const QosMatrix& train, const NmfOptions& options);

/// Pairwise cosine similarity of QIVs (unobserved cells read as 0). Zero-norm rows give 0.
Matrix cosine_similarity(const QosMatrix& train, Side axis);

/// [one-hot id | one-hot region | one-hot group] per entity.
Matrix onehot_context(const ContextTable& context);

enum class AutoencoderLayout { Table, Proportional };

const char* to_string(AutoencoderLayout layout);
AutoencoderLayout parse_autoencoder_layout(const std::string& text);

/// Hidden sizes 120;80 (users) or 1000;250 (services) as tabulated, or the same ratios of the
/// tabulated input widths (507 / 8598) applied to input_dim.
AutoencoderConfig make_autoencoder_config(Side side, AutoencoderLayout layout, Eigen::Index input_dim,
                                          Eigen::Index bottleneck);

enum class FeatureSet { Combined, QosOnly, ContextOnly };

const char* to_string(FeatureSet set);
FeatureSet parse_feature_set(const std::string& text);

struct FeatureConfig {
  std::size_t nmf_dim = 50;
  std::size_t similarity_dim = 50;
  std::size_t context_dim = 50;
  int nmf_max_iters = 500;
  double nmf_tol = 1e-6;
  AutoencoderLayout similarity_layout = AutoencoderLayout::Proportional;
  AutoencoderLayout context_layout = AutoencoderLayout::Table;
  int autoencoder_max_epochs = 500;
  int autoencoder_patience = 3;
  int autoencoder_batch_size = 32;
  double autoencoder_learning_rate = 0.001;
  bool minmax_scale = true;
  FeatureSet feature_set = FeatureSet::Combined;
};

/// Per-entity feature blocks for one side; all have the same row count.
struct EntityBlocks {
  Matrix stat;        // 5 columns
  Matrix nmf;         // d_n
  Matrix similarity;  // d_s
  Matrix context;     // d_c
};

/// Initial node features F0: rows 0..n-1 are users, n..n+m-1 services; each row is
/// [stat | nmf | similarity | context].
struct FeatureEmbedding {
  Matrix values;
  std::size_t n_users = 0;
  std::array<Eigen::Index, 4> widths{5, 0, 0, 0};
  bool scaled = false;
  RowVector column_min;
  RowVector column_max;

  std::size_t n_nodes() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_services() const { return n_nodes() - n_users; }
  Eigen::Index width() const { return values.cols(); }
  auto user_row(std::size_t i) const { return values.row(static_cast<Eigen::Index>(i)); }
  auto service_row(std::size_t j) const { return values.row(static_cast<Eigen::Index>(n_users + j)); }
};

/// Concatenates the blocks per entity, stacks users above services and optionally applies
/// per-column min-max scaling to [0, 1] (constant columns map to 0).
FeatureEmbedding assemble_embedding(const EntityBlocks& users, const EntityBlocks& services, bool scale);

void save_embedding(const std::filesystem::path& stem, const FeatureEmbedding& f);
FeatureEmbedding load_embedding(const std::filesystem::path& stem);

/// Everything the feature stage produces; the NMF factors and encoded contexts are reused by the
/// cold-start heads.
struct FeatureArtifacts {
  FeatureEmbedding embedding;
  NmfFactors nmf;
  Matrix user_context_code;
  Matrix service_context_code;
};

FeatureArtifacts build_features(const QosMatrix& train, const ContextTable& users,
                                const ContextTable& services, const FeatureConfig& config,
                                std::uint64_t seed);

}  // namespace arrqp
