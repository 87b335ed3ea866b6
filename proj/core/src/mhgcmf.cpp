#include "arrqp/mhgcmf.hpp"

namespace arrqp {

const char* to_string(DenseWiring wiring) {
  return wiring == DenseWiring::PreTransform ? "pre_transform" : "per_head";
}

DenseWiring parse_dense_wiring(const std::string& text) {
  if (text == "pre_transform") return DenseWiring::PreTransform;
  if (text == "per_head") return DenseWiring::PerHead;
  throw std::invalid_argument("unknown dense wiring '" + text + "' (pre_transform|per_head)");
}

void MhGcmfConfig::validate() const {
  if (n_heads < 1 || n_heads > 8) throw std::invalid_argument("number of heads must lie in 1..8");
  if (blocks < 1) throw std::invalid_argument("number of blocks must be >= 1");
  if (hidden_dim <= 0 || embedding_dim <= 0) throw std::invalid_argument("layer widths must be positive");
}

// --- GCMFU ---------------------------------------------------------------------------------------

GcmfUnit::GcmfUnit(const std::string& name, Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                   std::mt19937_64& rng)
    : w1_(name + ".w1", nn::glorot_uniform(in, hidden, rng)),
      w2_(name + ".w2", nn::glorot_uniform(hidden, out, rng)) {}

Matrix GcmfUnit::forward(const SparseMatrix& adjacency, const Matrix& x) {
  if (x.cols() != w1_.value.rows()) {
    throw DimensionError("GCMFU input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(w1_.value.rows()));
  }
  if (adjacency.rows() != x.rows()) throw DimensionError("adjacency size does not match feature rows");
  adjacency_ = &adjacency;
  x_ = x;
  h1_pre_ = adjacency * (x * w1_.value);
  h1_ = nn::relu(h1_pre_);
  h2_pre_ = adjacency * (h1_ * w2_.value);
  return nn::relu(h2_pre_);
}

Matrix GcmfUnit::backward(const Matrix& d_out) {
  const Matrix d_h2 = d_out.cwiseProduct((h2_pre_.array() > 0.0).cast<double>().matrix());
  const Matrix g2 = adjacency_->transpose() * d_h2;
  w2_.grad += h1_.transpose() * g2;
  const Matrix d_h1 = (g2 * w2_.value.transpose()).cwiseProduct((h1_pre_.array() > 0.0).cast<double>().matrix());
  const Matrix g1 = adjacency_->transpose() * d_h1;
  w1_.grad += x_.transpose() * g1;
  return g1 * w1_.value.transpose();
}

// --- MhGCMF --------------------------------------------------------------------------------------

MhGcmf::MhGcmf(Eigen::Index feature_dim, const MhGcmfConfig& config, std::uint64_t seed)
    : feature_dim_(feature_dim), config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  const auto h = config_.hidden_dim;
  const auto e = config_.embedding_dim;

  Eigen::Index block1_in = feature_dim;
  if (config_.wiring == DenseWiring::PreTransform) {
    dense_.emplace_back("dense", feature_dim, feature_dim, nn::Activation::Linear, rng);
    dense_[0].weight().value.setIdentity();
  } else {
    for (std::size_t k = 0; k < heads; ++k)
      dense_.emplace_back("dense." + std::to_string(k), feature_dim, h, nn::Activation::Linear, rng);
    block1_in = h;
  }

  for (int b = 0; b < config_.blocks; ++b) {
    std::vector<GcmfUnit> block;
    const Eigen::Index in = b == 0 ? block1_in : e;
    for (std::size_t k = 0; k < heads; ++k)
      block.emplace_back("block" + std::to_string(b) + ".head" + std::to_string(k), in, h, e, rng);
    units_.push_back(std::move(block));
    block_convs_.emplace_back("block" + std::to_string(b) + ".conv", config_.n_heads);
  }
  final_conv_ = nn::Conv1x1("final_conv", config_.blocks);
}

Matrix MhGcmf::forward(const SparseMatrix& adjacency, const Matrix& features) {
  if (features.cols() != feature_dim_) {
    throw DimensionError("MhGCMF expects " + std::to_string(feature_dim_) + " feature columns, got " +
                         std::to_string(features.cols()));
  }
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  std::vector<Matrix> block_outputs;
  Matrix shared;
  if (config_.wiring == DenseWiring::PreTransform) shared = dense_[0].forward(features);
  for (std::size_t b = 0; b < units_.size(); ++b) {
    std::vector<Matrix> head_outputs;
    for (std::size_t k = 0; k < heads; ++k) {
      if (b > 0) {
        head_outputs.push_back(units_[b][k].forward(adjacency, block_outputs.back()));
      } else if (config_.wiring == DenseWiring::PreTransform) {
        head_outputs.push_back(units_[b][k].forward(adjacency, shared));
      } else {
        head_outputs.push_back(units_[b][k].forward(adjacency, dense_[k].forward(features)));
      }
    }
    block_outputs.push_back(block_convs_[b].forward(head_outputs));
  }
  return final_conv_.forward(block_outputs);
}

void MhGcmf::backward(const Matrix& d_embedding) {
  const auto heads = static_cast<std::size_t>(config_.n_heads);
  std::vector<Matrix> d_blocks = final_conv_.backward(d_embedding);
  Matrix d_shared;
  for (std::size_t b = units_.size(); b-- > 0;) {
    const auto d_heads = block_convs_[b].backward(d_blocks[b]);
    for (std::size_t k = 0; k < heads; ++k) {
      Matrix d_in = units_[b][k].backward(d_heads[k]);
      if (b > 0) {
        d_blocks[b - 1] += d_in;
      } else if (config_.wiring == DenseWiring::PreTransform) {
        if (d_shared.size() == 0) {
          d_shared = std::move(d_in);
        } else {
          d_shared += d_in;
        }
      } else {
        dense_[k].backward(d_in);
      }
    }
  }
  if (config_.wiring == DenseWiring::PreTransform) dense_[0].backward(d_shared);
}

nn::ParameterList MhGcmf::parameters() {
  nn::ParameterList out;
  for (auto& d : dense_)
    for (auto* p : d.parameters()) out.push_back(p);
  for (std::size_t b = 0; b < units_.size(); ++b) {
    for (auto& u : units_[b])
      for (auto* p : u.parameters()) out.push_back(p);
    for (auto* p : block_convs_[b].parameters()) out.push_back(p);
  }
  for (auto* p : final_conv_.parameters()) out.push_back(p);
  return out;
}

nlohmann::json MhGcmf::describe() const {
  return {{"family", "mhgcmf"},
          {"feature_dim", feature_dim_},
          {"n_heads", config_.n_heads},
          {"blocks", config_.blocks},
          {"hidden_dim", config_.hidden_dim},
          {"embedding_dim", config_.embedding_dim},
          {"dense_wiring", to_string(config_.wiring)}};
}

}  // namespace arrqp
