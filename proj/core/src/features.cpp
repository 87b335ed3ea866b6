#include "arrqp/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "arrqp/serialize.hpp"

namespace arrqp {

StatFeatures statistical_features(std::span<const double> observed) {
  StatFeatures f;
  if (observed.empty()) return f;
  std::vector<double> v(observed.begin(), observed.end());
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  f.empty = false;
  f.min = v.front();
  f.max = v.back();
  f.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  f.median = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double ss = 0.0;
  for (double x : v) ss += (x - f.mean) * (x - f.mean);
  f.stddev = std::sqrt(ss / static_cast<double>(n));
  return f;
}

Matrix statistical_block(const QosMatrix& train, Side side) {
  const std::size_t count = side == Side::User ? train.n_users() : train.n_services();
  Matrix out(static_cast<Eigen::Index>(count), 5);
  for (std::size_t k = 0; k < count; ++k) {
    const auto qiv = train.qiv(side, k);
    const auto s = statistical_features(qiv).as_array();
    for (Eigen::Index c = 0; c < 5; ++c) out(static_cast<Eigen::Index>(k), c) = s[static_cast<std::size_t>(c)];
  }
  return out;
}

// --- NMF -----------------------------------------------------------------------------------------

double nmf_objective(const QosMatrix& train, const Matrix& user_factors, const Matrix& service_factors) {
  double sum = 0.0;
  for (const auto& e : train.entries()) {
    const double r = e.value - user_factors.row(static_cast<Eigen::Index>(e.user))
                                   .dot(service_factors.row(static_cast<Eigen::Index>(e.service)));
    sum += r * r;
  }
  return sum;
}

NmfFactors nmf_decompose(const QosMatrix& train, const NmfOptions& options) {
  const auto n = static_cast<Eigen::Index>(train.n_users());
  const auto m = static_cast<Eigen::Index>(train.n_services());
  const auto d = static_cast<Eigen::Index>(options.rank);
  if (options.rank == 0 || options.rank > std::min(train.n_users(), train.n_services())) {
    throw std::invalid_argument("NMF rank must lie in [1, min(n, m)]");
  }
  NmfFactors f;
  if (train.observed_count() == 0) {
    warn("NMF on a matrix with no observed entries; returning zero factors");
    f.user_factors = Matrix::Zero(n, d);
    f.service_factors = Matrix::Zero(m, d);
    f.objective.push_back(0.0);
    return f;
  }

  const Matrix mask = train.mask_matrix();
  const Matrix& q = train.values();
  double mean = 0.0;
  for (const auto& e : train.entries()) mean += e.value;
  mean /= static_cast<double>(train.observed_count());
  const double scale = std::sqrt(mean / static_cast<double>(d));

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  f.user_factors.resize(n, d);
  f.service_factors.resize(m, d);
  for (Eigen::Index k = 0; k < f.user_factors.size(); ++k) f.user_factors.data()[k] = unit(rng) * scale;
  for (Eigen::Index k = 0; k < f.service_factors.size(); ++k) f.service_factors.data()[k] = unit(rng) * scale;

  constexpr double eps = 1e-12;
  Matrix& u = f.user_factors;
  Matrix& v = f.service_factors;
  auto objective = [&] { return (mask.cwiseProduct(u * v.transpose()) - q).squaredNorm(); };
  f.objective.push_back(objective());
  for (int it = 1; it <= options.max_iters; ++it) {
    Matrix approx = mask.cwiseProduct(u * v.transpose());
    u = u.cwiseProduct((q * v).cwiseQuotient((approx * v).array().matrix() + Matrix::Constant(n, d, eps)));
    approx = mask.cwiseProduct(u * v.transpose());
    v = v.cwiseProduct((q.transpose() * u)
                           .cwiseQuotient((approx.transpose() * u) + Matrix::Constant(m, d, eps)));
    const double cur = objective();
    const double prev = f.objective.back();
    f.objective.push_back(cur);
    f.iterations = it;
    if (prev <= 0.0 || (prev - cur) / prev < options.tol) break;
  }
  return f;
}

// --- similarity and context ----------------------------------------------------------------------

Matrix cosine_similarity(const QosMatrix& train, Side axis) {
  const Matrix x = axis == Side::User ? train.values() : Matrix(train.values().transpose());
  Matrix sim = x * x.transpose();
  const Vector norms = x.rowwise().norm();
  for (Eigen::Index a = 0; a < sim.rows(); ++a) {
    for (Eigen::Index b = 0; b < sim.cols(); ++b) {
      const double denom = norms(a) * norms(b);
      sim(a, b) = denom > 0.0 ? sim(a, b) / denom : 0.0;
    }
    if (norms(a) > 0.0) sim(a, a) = 1.0;
  }
  return sim;
}

Matrix onehot_context(const ContextTable& context) {
  context.validate();
  const auto n = static_cast<Eigen::Index>(context.size());
  const auto r = static_cast<Eigen::Index>(context.region_cardinality());
  const auto g = static_cast<Eigen::Index>(context.group_cardinality());
  Matrix out = Matrix::Zero(n, n + r + g);
  for (Eigen::Index k = 0; k < n; ++k) {
    out(k, k) = 1.0;
    out(k, n + static_cast<Eigen::Index>(context.region[static_cast<std::size_t>(k)])) = 1.0;
    out(k, n + r + static_cast<Eigen::Index>(context.group[static_cast<std::size_t>(k)])) = 1.0;
  }
  return out;
}

// --- autoencoder layouts -------------------------------------------------------------------------

const char* to_string(AutoencoderLayout layout) {
  return layout == AutoencoderLayout::Table ? "table" : "proportional";
}

AutoencoderLayout parse_autoencoder_layout(const std::string& text) {
  if (text == "table") return AutoencoderLayout::Table;
  if (text == "proportional") return AutoencoderLayout::Proportional;
  throw std::invalid_argument("unknown autoencoder layout '" + text + "'");
}

AutoencoderConfig make_autoencoder_config(Side side, AutoencoderLayout layout, Eigen::Index input_dim,
                                          Eigen::Index bottleneck) {
  const bool user = side == Side::User;
  Eigen::Index h1 = user ? 120 : 1000;
  Eigen::Index h2 = user ? 80 : 250;
  if (layout == AutoencoderLayout::Proportional) {
    const double table_in = user ? 507.0 : 8598.0;
    auto scaled = [&](Eigen::Index h) {
      const auto s = static_cast<Eigen::Index>(std::llround(static_cast<double>(h) * static_cast<double>(input_dim) / table_in));
      return std::max(s, bottleneck);
    };
    h1 = scaled(h1);
    h2 = scaled(h2);
  }
  using nn::Activation;
  AutoencoderConfig c;
  c.encoder_sizes = {h1, h2, bottleneck};
  c.decoder_sizes = {h2, h1, input_dim};
  c.encoder_activations = {Activation::Tanh, Activation::Tanh, Activation::Linear};
  c.decoder_activations = {Activation::Tanh, Activation::Tanh, Activation::Linear};
  c.encoder_dropout = {0.6, 0.4};
  c.decoder_dropout = {0.6, 0.4};
  return c;
}

const char* to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::Combined: return "combined";
    case FeatureSet::QosOnly: return "qos";
    case FeatureSet::ContextOnly: return "context";
  }
  return "?";
}

FeatureSet parse_feature_set(const std::string& text) {
  if (text == "combined") return FeatureSet::Combined;
  if (text == "qos") return FeatureSet::QosOnly;
  if (text == "context") return FeatureSet::ContextOnly;
  throw std::invalid_argument("unknown feature set '" + text + "' (combined|qos|context)");
}

// --- assembly ------------------------------------------------------------------------------------

FeatureEmbedding assemble_embedding(const EntityBlocks& users, const EntityBlocks& services, bool scale) {
  auto check_side = [](const EntityBlocks& b, const char* what) {
    const auto rows = b.stat.rows();
    if (b.nmf.rows() != rows || b.similarity.rows() != rows || b.context.rows() != rows) {
      throw DimensionError(std::string(what) + " feature blocks have differing row counts");
    }
    if (b.stat.cols() != 5) throw DimensionError(std::string(what) + " statistical block must be 5 wide");
  };
  check_side(users, "user");
  check_side(services, "service");
  if (users.nmf.cols() != services.nmf.cols() || users.similarity.cols() != services.similarity.cols() ||
      users.context.cols() != services.context.cols()) {
    throw DimensionError("user and service feature block widths differ");
  }

  FeatureEmbedding f;
  f.n_users = static_cast<std::size_t>(users.stat.rows());
  f.widths = {5, users.nmf.cols(), users.similarity.cols(), users.context.cols()};
  const Eigen::Index width = 5 + f.widths[1] + f.widths[2] + f.widths[3];
  f.values.resize(users.stat.rows() + services.stat.rows(), width);
  auto place = [&](const EntityBlocks& b, Eigen::Index row0) {
    const auto rows = b.stat.rows();
    Eigen::Index col = 0;
    for (const Matrix* block : {&b.stat, &b.nmf, &b.similarity, &b.context}) {
      f.values.block(row0, col, rows, block->cols()) = *block;
      col += block->cols();
    }
  };
  place(users, 0);
  place(services, users.stat.rows());

  f.scaled = scale;
  if (f.values.rows() > 0) {
    f.column_min = f.values.colwise().minCoeff();
    f.column_max = f.values.colwise().maxCoeff();
  } else {
    f.column_min = RowVector::Zero(width);
    f.column_max = RowVector::Zero(width);
  }
  if (scale) {
    for (Eigen::Index c = 0; c < width; ++c) {
      const double range = f.column_max(c) - f.column_min(c);
      if (range > 0.0) {
        f.values.col(c) = (f.values.col(c).array() - f.column_min(c)) / range;
      } else {
        f.values.col(c).setZero();
      }
    }
  }
  return f;
}

void save_embedding(const std::filesystem::path& stem, const FeatureEmbedding& f) {
  nlohmann::json meta;
  meta["n_users"] = f.n_users;
  meta["block_widths"] = {f.widths[0], f.widths[1], f.widths[2], f.widths[3]};
  meta["scaled"] = f.scaled;
  meta["column_min"] = std::vector<double>(f.column_min.data(), f.column_min.data() + f.column_min.size());
  meta["column_max"] = std::vector<double>(f.column_max.data(), f.column_max.data() + f.column_max.size());
  save_matrix(stem, f.values, meta);
}

FeatureEmbedding load_embedding(const std::filesystem::path& stem) {
  nlohmann::json meta;
  FeatureEmbedding f;
  f.values = load_matrix(stem, &meta);
  try {
    f.n_users = meta.at("n_users").get<std::size_t>();
    const auto w = meta.at("block_widths").get<std::vector<Eigen::Index>>();
    if (w.size() != 4) throw FormatError("block_widths must have 4 entries");
    std::copy(w.begin(), w.end(), f.widths.begin());
    f.scaled = meta.at("scaled").get<bool>();
    const auto lo = meta.at("column_min").get<std::vector<double>>();
    const auto hi = meta.at("column_max").get<std::vector<double>>();
    f.column_min = Eigen::Map<const RowVector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    f.column_max = Eigen::Map<const RowVector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("embedding sidecar: ") + e.what());
  }
  if (f.widths[0] + f.widths[1] + f.widths[2] + f.widths[3] != f.values.cols() || f.n_users > f.n_nodes()) {
    throw FormatError("embedding sidecar does not match the stored matrix");
  }
  return f;
}

// --- full feature stage --------------------------------------------------------------------------

namespace {

Matrix encode_with_autoencoder(const Matrix& inputs, Side side, AutoencoderLayout layout,
                               Eigen::Index bottleneck, const FeatureConfig& config, std::uint64_t seed) {
  auto ae_config = make_autoencoder_config(side, layout, inputs.cols(), bottleneck);
  ae_config.max_epochs = config.autoencoder_max_epochs;
  ae_config.patience = config.autoencoder_patience;
  ae_config.batch_size = config.autoencoder_batch_size;
  ae_config.learning_rate = config.autoencoder_learning_rate;
  auto ae = train_autoencoder(inputs, ae_config, seed);
  return ae.encode(inputs);
}

}  // namespace

FeatureArtifacts build_features(const QosMatrix& train, const ContextTable& users,
                                const ContextTable& services, const FeatureConfig& config,
                                std::uint64_t seed) {
  if (users.size() != train.n_users() || services.size() != train.n_services()) {
    throw DimensionError("context tables do not match the QoS matrix dimensions");
  }
  if (config.similarity_dim == 0 || config.context_dim == 0) {
    throw std::invalid_argument("feature dimensions must be positive");
  }
  FeatureArtifacts out;
  NmfOptions nmf;
  nmf.rank = config.nmf_dim;
  nmf.max_iters = config.nmf_max_iters;
  nmf.tol = config.nmf_tol;
  nmf.seed = mix_seed(seed, 10);
  out.nmf = nmf_decompose(train, nmf);

  const auto ds = static_cast<Eigen::Index>(config.similarity_dim);
  const auto dc = static_cast<Eigen::Index>(config.context_dim);
  EntityBlocks ub, sb;
  ub.stat = statistical_block(train, Side::User);
  sb.stat = statistical_block(train, Side::Service);
  ub.nmf = out.nmf.user_factors;
  sb.nmf = out.nmf.service_factors;
  ub.similarity = encode_with_autoencoder(cosine_similarity(train, Side::User), Side::User,
                                          config.similarity_layout, ds, config, mix_seed(seed, 11));
  sb.similarity = encode_with_autoencoder(cosine_similarity(train, Side::Service), Side::Service,
                                          config.similarity_layout, ds, config, mix_seed(seed, 12));
  out.user_context_code = encode_with_autoencoder(onehot_context(users), Side::User,
                                                  config.context_layout, dc, config, mix_seed(seed, 13));
  out.service_context_code = encode_with_autoencoder(onehot_context(services), Side::Service,
                                                     config.context_layout, dc, config, mix_seed(seed, 14));
  ub.context = out.user_context_code;
  sb.context = out.service_context_code;

  out.embedding = assemble_embedding(ub, sb, config.minmax_scale);
  auto& v = out.embedding.values;
  const auto& w = out.embedding.widths;
  if (config.feature_set == FeatureSet::QosOnly) {
    v.rightCols(w[3]).setZero();
  } else if (config.feature_set == FeatureSet::ContextOnly) {
    v.leftCols(w[0] + w[1] + w[2]).setZero();
  }
  return out;
}

}  // namespace arrqp
