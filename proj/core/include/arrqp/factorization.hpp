#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrqp/common.hpp"
#include "arrqp/dataset.hpp"
#include "arrqp/graph.hpp"
#include "arrqp/nn.hpp"

namespace arrqp {

/// A graph model that maps (normalized adjacency, node features) to one embedding row per node.
class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;
  virtual Matrix forward(const SparseMatrix& adjacency, const Matrix& features) = 0;
  /// Back-propagates dL/dE through the last forward() call, accumulating parameter gradients.
  virtual void backward(const Matrix& d_embedding) = 0;
  virtual nn::ParameterList parameters() = 0;
  virtual Eigen::Index embedding_dim() const = 0;
  virtual nlohmann::json describe() const = 0;
};

/// Sum of the loss over observed pairs of `target`, predicting q_ij = E_i . E_(n+j).
double factorization_loss(const Matrix& embedding, std::size_t n_users, const QosMatrix& target,
                          const nn::LossSpec& loss);
/// dL/dE for the same loss.
Matrix factorization_loss_grad(const Matrix& embedding, std::size_t n_users, const QosMatrix& target,
                               const nn::LossSpec& loss);

/// Final user and service embeddings; Q-hat = E_u E_s^T is computed on first use.
class TrainedSorrqp {
 public:
  TrainedSorrqp() = default;
  TrainedSorrqp(Matrix user_embeddings, Matrix service_embeddings);

  std::size_t n_users() const { return static_cast<std::size_t>(eu_.rows()); }
  std::size_t n_services() const { return static_cast<std::size_t>(es_.rows()); }
  /// Throws std::out_of_range for bad indices.
  double predict(std::size_t user, std::size_t service) const;
  const Matrix& predicted_matrix() const;

  const Matrix& user_embeddings() const { return eu_; }
  const Matrix& service_embeddings() const { return es_; }

  std::string model_name;
  nlohmann::json model_description;
  nn::TrainHistory history;
  std::shared_ptr<EmbeddingModel> model;  // absent when loaded from disk

 private:
  struct Cache {
    std::once_flag once;
    Matrix q_hat;
  };
  Matrix eu_, es_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

/// Full-batch training on the observed training pairs with early stopping on the validation loss
/// (the training loss is used when the validation matrix is empty).
TrainedSorrqp train_factorization(std::shared_ptr<EmbeddingModel> model, const SparseMatrix& adjacency,
                                  const Matrix& features, const QosMatrix& train,
                                  const QosMatrix& validation, const nn::TrainConfig& config,
                                  const nn::LossSpec& loss);

/// <dir>/embeddings_users.{bin,json}, <dir>/embeddings_services.{bin,json} and, when the model is
/// present, <dir>/model_params.{bin,json}.
void save_trained(const std::filesystem::path& dir, const TrainedSorrqp& model);
TrainedSorrqp load_trained(const std::filesystem::path& dir);

/// CSV rows "user_id,service_id,predicted,actual" for each pair; actual is empty when unknown.
void write_predictions_csv(const std::filesystem::path& path, const TrainedSorrqp& model,
                           const std::vector<Entry>& pairs, bool with_actual,
                           const std::vector<std::string>& user_ids,
                           const std::vector<std::string>& service_ids);

}  // namespace arrqp
