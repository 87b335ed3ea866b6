#pragma once

#include <cstdint>
#include <vector>

#include "arrqp/factorization.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

struct MhGatConfig {
  int n_heads = 1;
  int layers = 2;
  Eigen::Index head_dim = 128;  // residual width is head_dim * n_heads
  Eigen::Index embedding_dim = 64;
  double leaky_slope = 0.2;

  void validate() const;
};

/// One multi-head attention layer with residual: F' = F + ||_k ReLU(sum_j alpha^k_ij W^k F_j).
class GatLayer {
 public:
  GatLayer() = default;
  GatLayer(const std::string& name, Eigen::Index width, int n_heads, Eigen::Index head_dim,
           double leaky_slope, std::mt19937_64& rng);

  Matrix forward(const std::vector<std::vector<Eigen::Index>>& neighbors, const Matrix& f);
  Matrix backward(const Matrix& d_out);

  /// Attention weights of node i over neighbors[i] for one head.
  Vector attention_coefficients(const std::vector<std::vector<Eigen::Index>>& neighbors, const Matrix& f,
                                std::size_t node, std::size_t head) const;

  int n_heads() const { return static_cast<int>(w_.size()); }
  nn::Parameter& weight(std::size_t head) { return w_.at(head); }
  nn::Parameter& attention(std::size_t head) { return a_.at(head); }  // 2*head_dim x 1
  nn::ParameterList parameters();

 private:
  struct HeadCache {
    Matrix z, m;
    std::vector<Vector> alpha, pre;  // per node over its neighbours
  };

  Eigen::Index width_ = 0;
  Eigen::Index head_dim_ = 0;
  double slope_ = 0.2;
  std::vector<nn::Parameter> w_, a_;
  const std::vector<std::vector<Eigen::Index>>* neighbors_ = nullptr;
  Matrix f_;
  std::vector<HeadCache> cache_;
};

/// Pre-projection to the residual width, stacked attention layers, then a linear layer to the
/// embedding width.
class MhGat final : public EmbeddingModel {
 public:
  MhGat(Eigen::Index feature_dim, const MhGatConfig& config, std::uint64_t seed);

  Matrix forward(const SparseMatrix& adjacency, const Matrix& features) override;
  void backward(const Matrix& d_embedding) override;
  nn::ParameterList parameters() override;
  Eigen::Index embedding_dim() const override { return config_.embedding_dim; }
  nlohmann::json describe() const override;

  GatLayer& layer(std::size_t k) { return layers_.at(k); }
  nn::Dense& projection() { return projection_; }
  nn::Dense& output() { return output_; }

 private:
  Eigen::Index feature_dim_;
  MhGatConfig config_;
  nn::Dense projection_;
  std::vector<GatLayer> layers_;
  nn::Dense output_;
  std::vector<std::vector<Eigen::Index>> neighbors_;
  const SparseMatrix* neighbors_source_ = nullptr;
  Eigen::Index neighbors_nnz_ = 0;
};

}  // namespace arrqp
