#include "arrqp/mhgat.hpp"

#include <cmath>

namespace arrqp {

void MhGatConfig::validate() const {
  if (n_heads < 1 || n_heads > 8) throw std::invalid_argument("number of heads must lie in 1..8");
  if (layers < 1) throw std::invalid_argument("number of attention layers must be >= 1");
  if (head_dim <= 0 || embedding_dim <= 0) throw std::invalid_argument("layer widths must be positive");
}

GatLayer::GatLayer(const std::string& name, Eigen::Index width, int n_heads, Eigen::Index head_dim,
                   double leaky_slope, std::mt19937_64& rng)
    : width_(width), head_dim_(head_dim), slope_(leaky_slope) {
  if (width != head_dim * n_heads) throw DimensionError("residual width must equal head_dim * n_heads");
  for (int k = 0; k < n_heads; ++k) {
    const auto tag = name + ".head" + std::to_string(k);
    w_.emplace_back(tag + ".w", nn::glorot_uniform(width, head_dim, rng));
    a_.emplace_back(tag + ".a", nn::glorot_uniform(2 * head_dim, 1, rng));
  }
}

nn::ParameterList GatLayer::parameters() {
  nn::ParameterList out;
  for (std::size_t k = 0; k < w_.size(); ++k) {
    out.push_back(&w_[k]);
    out.push_back(&a_[k]);
  }
  return out;
}

namespace {

double leaky(double x, double slope) { return x > 0.0 ? x : slope * x; }

Vector softmax(const Vector& x) {
  const double mx = x.maxCoeff();
  Vector e = (x.array() - mx).exp().matrix();
  return e / e.sum();
}

}  // namespace

Vector GatLayer::attention_coefficients(const std::vector<std::vector<Eigen::Index>>& neighbors,
                                        const Matrix& f, std::size_t node, std::size_t head) const {
  const Matrix z = f * w_.at(head).value;
  const auto& nb = neighbors.at(node);
  if (nb.empty()) throw std::logic_error("attention over an empty neighbourhood");
  const auto a_left = a_[head].value.topRows(head_dim_);
  const auto a_right = a_[head].value.bottomRows(head_dim_);
  const double s = z.row(static_cast<Eigen::Index>(node)).dot(a_left.col(0).transpose());
  Vector pre(static_cast<Eigen::Index>(nb.size()));
  for (std::size_t k = 0; k < nb.size(); ++k)
    pre(static_cast<Eigen::Index>(k)) = leaky(s + z.row(nb[k]).dot(a_right.col(0).transpose()), slope_);
  return softmax(pre);
}

Matrix GatLayer::forward(const std::vector<std::vector<Eigen::Index>>& neighbors, const Matrix& f) {
  if (f.cols() != width_) {
    throw DimensionError("attention layer expects width " + std::to_string(width_) + ", got " +
                         std::to_string(f.cols()));
  }
  if (static_cast<Eigen::Index>(neighbors.size()) != f.rows()) {
    throw DimensionError("neighbourhood count does not match feature rows");
  }
  neighbors_ = &neighbors;
  f_ = f;
  cache_.assign(w_.size(), {});
  Matrix out = f;
  const auto n = static_cast<std::size_t>(f.rows());
  for (std::size_t h = 0; h < w_.size(); ++h) {
    auto& c = cache_[h];
    c.z = f * w_[h].value;
    const Vector s = c.z * a_[h].value.topRows(head_dim_);
    const Vector t = c.z * a_[h].value.bottomRows(head_dim_);
    c.m = Matrix::Zero(f.rows(), head_dim_);
    c.alpha.resize(n);
    c.pre.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& nb = neighbors[i];
      if (nb.empty()) throw std::logic_error("attention over an empty neighbourhood");
      Vector pre(static_cast<Eigen::Index>(nb.size()));
      for (std::size_t k = 0; k < nb.size(); ++k)
        pre(static_cast<Eigen::Index>(k)) = s(static_cast<Eigen::Index>(i)) + t(nb[k]);
      Vector e = pre.unaryExpr([this](double x) { return leaky(x, slope_); });
      c.alpha[i] = softmax(e);
      c.pre[i] = std::move(pre);
      for (std::size_t k = 0; k < nb.size(); ++k)
        c.m.row(static_cast<Eigen::Index>(i)) += c.alpha[i](static_cast<Eigen::Index>(k)) * c.z.row(nb[k]);
    }
    out.middleCols(static_cast<Eigen::Index>(h) * head_dim_, head_dim_) += nn::relu(c.m);
  }
  return out;
}

Matrix GatLayer::backward(const Matrix& d_out) {
  Matrix d_f = d_out;
  const auto& neighbors = *neighbors_;
  for (std::size_t h = 0; h < w_.size(); ++h) {
    const auto& c = cache_[h];
    const Matrix d_m = d_out.middleCols(static_cast<Eigen::Index>(h) * head_dim_, head_dim_)
                           .cwiseProduct((c.m.array() > 0.0).cast<double>().matrix());
    Matrix d_z = Matrix::Zero(c.z.rows(), c.z.cols());
    Vector d_s = Vector::Zero(c.z.rows());
    Vector d_t = Vector::Zero(c.z.rows());
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      const auto& nb = neighbors[i];
      const auto ii = static_cast<Eigen::Index>(i);
      const Vector& alpha = c.alpha[i];
      Vector d_alpha(alpha.size());
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        d_alpha(kk) = d_m.row(ii).dot(c.z.row(nb[k]));
        d_z.row(nb[k]) += alpha(kk) * d_m.row(ii);
      }
      const double inner = alpha.dot(d_alpha);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double d_e = alpha(kk) * (d_alpha(kk) - inner);
        const double d_pre = d_e * (c.pre[i](kk) > 0.0 ? 1.0 : slope_);
        d_s(ii) += d_pre;
        d_t(nb[k]) += d_pre;
      }
    }
    const auto a_left = a_[h].value.topRows(head_dim_);
    const auto a_right = a_[h].value.bottomRows(head_dim_);
    a_[h].grad.topRows(head_dim_) += c.z.transpose() * d_s;
    a_[h].grad.bottomRows(head_dim_) += c.z.transpose() * d_t;
    d_z += d_s * a_left.transpose() + d_t * a_right.transpose();
    w_[h].grad += f_.transpose() * d_z;
    d_f += d_z * w_[h].value.transpose();
  }
  return d_f;
}

// --- MhGAT ---------------------------------------------------------------------------------------

MhGat::MhGat(Eigen::Index feature_dim, const MhGatConfig& config, std::uint64_t seed)
    : feature_dim_(feature_dim), config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const Eigen::Index width = config_.head_dim * config_.n_heads;
  projection_ = nn::Dense("projection", feature_dim, width, nn::Activation::Linear, rng);
  for (int l = 0; l < config_.layers; ++l)
    layers_.emplace_back("gat" + std::to_string(l), width, config_.n_heads, config_.head_dim,
                         config_.leaky_slope, rng);
  output_ = nn::Dense("output", width, config_.embedding_dim, nn::Activation::Linear, rng);
}

Matrix MhGat::forward(const SparseMatrix& adjacency, const Matrix& features) {
  if (features.cols() != feature_dim_) {
    throw DimensionError("MhGAT expects " + std::to_string(feature_dim_) + " feature columns, got " +
                         std::to_string(features.cols()));
  }
  if (neighbors_source_ != &adjacency || neighbors_.size() != static_cast<std::size_t>(adjacency.rows()) ||
      neighbors_nnz_ != adjacency.nonZeros()) {
    neighbors_ = neighborhoods(adjacency);
    neighbors_source_ = &adjacency;
    neighbors_nnz_ = adjacency.nonZeros();
  }
  Matrix h = projection_.forward(features);
  for (auto& l : layers_) h = l.forward(neighbors_, h);
  return output_.forward(h);
}

void MhGat::backward(const Matrix& d_embedding) {
  Matrix d = output_.backward(d_embedding);
  for (std::size_t k = layers_.size(); k-- > 0;) d = layers_[k].backward(d);
  projection_.backward(d);
}

nn::ParameterList MhGat::parameters() {
  nn::ParameterList out = projection_.parameters();
  for (auto& l : layers_)
    for (auto* p : l.parameters()) out.push_back(p);
  for (auto* p : output_.parameters()) out.push_back(p);
  return out;
}

nlohmann::json MhGat::describe() const {
  return {{"family", "mhgat"},
          {"feature_dim", feature_dim_},
          {"n_heads", config_.n_heads},
          {"layers", config_.layers},
          {"head_dim", config_.head_dim},
          {"embedding_dim", config_.embedding_dim},
          {"leaky_slope", config_.leaky_slope}};
}

}  // namespace arrqp
