#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arrqp/factorization.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

/// How the initial dense layer is wired in front of the first block.
/// PreTransform: one f -> f linear layer (identity initialized) shared by all heads; block-1 W1 is f x 128.
/// PerHead: one f -> 128 linear layer per head; block-1 W1 is 128 x 128.
enum class DenseWiring { PreTransform, PerHead };

const char* to_string(DenseWiring wiring);
DenseWiring parse_dense_wiring(const std::string& text);

struct MhGcmfConfig {
  int n_heads = 1;
  int blocks = 2;  // t
  Eigen::Index hidden_dim = 128;
  Eigen::Index embedding_dim = 64;
  DenseWiring wiring = DenseWiring::PreTransform;

  void validate() const;
};

/// ReLU(A ReLU(A X W1) W2).
class GcmfUnit {
 public:
  GcmfUnit() = default;
  GcmfUnit(const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::mt19937_64& rng);

  Matrix forward(const SparseMatrix& adjacency, const Matrix& x);
  Matrix backward(const Matrix& d_out);

  nn::Parameter& w1() { return w1_; }
  nn::Parameter& w2() { return w2_; }
  nn::ParameterList parameters() { return {&w1_, &w2_}; }

 private:
  nn::Parameter w1_, w2_;
  const SparseMatrix* adjacency_ = nullptr;
  Matrix x_, h1_pre_, h1_, h2_pre_;
};

class MhGcmf final : public EmbeddingModel {
 public:
  MhGcmf(Eigen::Index feature_dim, const MhGcmfConfig& config, std::uint64_t seed);

  Matrix forward(const SparseMatrix& adjacency, const Matrix& features) override;
  void backward(const Matrix& d_embedding) override;
  nn::ParameterList parameters() override;
  Eigen::Index embedding_dim() const override { return config_.embedding_dim; }
  nlohmann::json describe() const override;

  const MhGcmfConfig& config() const { return config_; }
  nn::Dense& dense(std::size_t k) { return dense_.at(k); }
  GcmfUnit& unit(std::size_t block, std::size_t head) { return units_.at(block).at(head); }
  nn::Conv1x1& block_conv(std::size_t block) { return block_convs_.at(block); }
  nn::Conv1x1& final_conv() { return final_conv_; }

 private:
  Eigen::Index feature_dim_;
  MhGcmfConfig config_;
  std::vector<nn::Dense> dense_;
  std::vector<std::vector<GcmfUnit>> units_;
  std::vector<nn::Conv1x1> block_convs_;
  nn::Conv1x1 final_conv_;
};

}  // namespace arrqp
