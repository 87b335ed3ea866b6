#include "arrqp/factorization.hpp"

#include <fstream>
#include <stdexcept>

#include "arrqp/serialize.hpp"

namespace arrqp {

namespace {

void pair_vectors(const Matrix& embedding, std::size_t n_users, const QosMatrix& target, Vector& actual,
                  Vector& predicted, std::vector<Entry>& entries) {
  if (static_cast<std::size_t>(embedding.rows()) != target.n_users() + target.n_services() ||
      n_users != target.n_users()) {
    throw DimensionError("embedding rows do not match the QoS matrix dimensions");
  }
  entries = target.entries();
  actual.resize(static_cast<Eigen::Index>(entries.size()));
  predicted.resize(actual.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    const auto kk = static_cast<Eigen::Index>(k);
    actual(kk) = e.value;
    predicted(kk) = embedding.row(static_cast<Eigen::Index>(e.user))
                        .dot(embedding.row(static_cast<Eigen::Index>(n_users + e.service)));
  }
}

}  // namespace

double factorization_loss(const Matrix& embedding, std::size_t n_users, const QosMatrix& target,
                          const nn::LossSpec& loss) {
  Vector actual, predicted;
  std::vector<Entry> entries;
  pair_vectors(embedding, n_users, target, actual, predicted, entries);
  return nn::loss_value(loss, actual, predicted);
}

Matrix factorization_loss_grad(const Matrix& embedding, std::size_t n_users, const QosMatrix& target,
                               const nn::LossSpec& loss) {
  Vector actual, predicted;
  std::vector<Entry> entries;
  pair_vectors(embedding, n_users, target, actual, predicted, entries);
  const Vector g = nn::loss_grad(loss, actual, predicted);
  Matrix d = Matrix::Zero(embedding.rows(), embedding.cols());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto u = static_cast<Eigen::Index>(entries[k].user);
    const auto s = static_cast<Eigen::Index>(n_users + entries[k].service);
    const double gk = g(static_cast<Eigen::Index>(k));
    d.row(u) += gk * embedding.row(s);
    d.row(s) += gk * embedding.row(u);
  }
  return d;
}

// --- TrainedSorrqp -------------------------------------------------------------------------------

TrainedSorrqp::TrainedSorrqp(Matrix user_embeddings, Matrix service_embeddings)
    : eu_(std::move(user_embeddings)), es_(std::move(service_embeddings)) {
  if (eu_.cols() != es_.cols()) throw DimensionError("user and service embedding widths differ");
}

double TrainedSorrqp::predict(std::size_t user, std::size_t service) const {
  if (user >= n_users() || service >= n_services()) {
    throw std::out_of_range("pair (" + std::to_string(user) + ", " + std::to_string(service) +
                            ") outside the " + std::to_string(n_users()) + " x " +
                            std::to_string(n_services()) + " model");
  }
  return eu_.row(static_cast<Eigen::Index>(user)).dot(es_.row(static_cast<Eigen::Index>(service)));
}

const Matrix& TrainedSorrqp::predicted_matrix() const {
  std::call_once(cache_->once, [this] { cache_->q_hat = eu_ * es_.transpose(); });
  return cache_->q_hat;
}

// --- training ------------------------------------------------------------------------------------

TrainedSorrqp train_factorization(std::shared_ptr<EmbeddingModel> model, const SparseMatrix& adjacency,
                                  const Matrix& features, const QosMatrix& train,
                                  const QosMatrix& validation, const nn::TrainConfig& config,
                                  const nn::LossSpec& loss) {
  if (train.observed_count() == 0) throw TrainingError("training matrix has no observed entries");
  const std::size_t n = train.n_users();
  const bool has_validation = validation.observed_count() > 0;

  nn::TrainHooks hooks;
  hooks.params = model->parameters();
  hooks.train_epoch = [&](nn::Optimizer& opt, int) {
    nn::zero_grads(hooks.params);
    const Matrix e = model->forward(adjacency, features);
    const double value = factorization_loss(e, n, train, loss);
    model->backward(factorization_loss_grad(e, n, train, loss));
    opt.step(hooks.params);
    return value;
  };
  hooks.validation_loss = [&] {
    const Matrix e = model->forward(adjacency, features);
    return factorization_loss(e, n, has_validation ? validation : train, loss);
  };

  nn::TrainHistory history;
  try {
    history = nn::train_loop(hooks, config);
  } catch (const TrainingError& e) {
    throw TrainingError(model->describe().value("family", std::string("model")) + ": " + e.what());
  }

  const Matrix e = model->forward(adjacency, features);
  const auto n_rows = static_cast<Eigen::Index>(n);
  TrainedSorrqp out(e.topRows(n_rows), e.bottomRows(e.rows() - n_rows));
  out.history = std::move(history);
  out.model_description = model->describe();
  out.model_name = out.model_description.value("family", std::string("unknown"));
  out.model = std::move(model);
  return out;
}

// --- persistence ---------------------------------------------------------------------------------

void save_trained(const std::filesystem::path& dir, const TrainedSorrqp& model) {
  std::filesystem::create_directories(dir);
  save_matrix(dir / "embeddings_users", model.user_embeddings(), {{"model", model.model_name}});
  save_matrix(dir / "embeddings_services", model.service_embeddings(), {{"model", model.model_name}});
  if (model.model) {
    std::vector<const nn::Parameter*> params;
    for (auto* p : model.model->parameters()) params.push_back(p);
    save_parameters(dir / "model_params", params,
                    {{"model", model.model_description},
                     {"best_epoch", model.history.best_epoch},
                     {"epochs_run", model.history.epochs_run}});
  }
}

TrainedSorrqp load_trained(const std::filesystem::path& dir) {
  nlohmann::json meta;
  Matrix eu = load_matrix(dir / "embeddings_users", &meta);
  Matrix es = load_matrix(dir / "embeddings_services");
  TrainedSorrqp out(std::move(eu), std::move(es));
  out.model_name = meta.value("model", std::string("unknown"));
  return out;
}

void write_predictions_csv(const std::filesystem::path& path, const TrainedSorrqp& model,
                           const std::vector<Entry>& pairs, bool with_actual,
                           const std::vector<std::string>& user_ids,
                           const std::vector<std::string>& service_ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(10);
  out << "user_id,service_id,predicted,actual\n";
  for (const auto& p : pairs) {
    out << (p.user < user_ids.size() ? user_ids[p.user] : std::to_string(p.user)) << ','
        << (p.service < service_ids.size() ? service_ids[p.service] : std::to_string(p.service)) << ','
        << model.predict(p.user, p.service) << ',';
    if (with_actual) out << p.value;
    out << '\n';
  }
}

}  // namespace arrqp
