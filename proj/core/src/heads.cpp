#include "arrqp/heads.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "arrqp/serialize.hpp"

namespace arrqp {

// --- MLP -----------------------------------------------------------------------------------------

Mlp::Mlp(Eigen::Index input_dim, const MlpConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::Index in = input_dim;
  for (std::size_t k = 0; k < config.hidden.size(); ++k) {
    layers_.emplace_back("hidden" + std::to_string(k), in, config.hidden[k], config.hidden_activation, rng);
    in = config.hidden[k];
  }
  layers_.emplace_back("output", in, 1, nn::Activation::Sigmoid, rng);
}

Vector Mlp::forward(const Matrix& x) {
  Matrix h = x;
  for (auto& l : layers_) h = l.forward(h);
  return h.col(0);
}

void Mlp::backward(const Vector& d_out) {
  Matrix d = d_out;
  for (std::size_t k = layers_.size(); k-- > 0;) d = layers_[k].backward(d);
}

Vector Mlp::evaluate(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("head expects " + std::to_string(input_dim()) + " features, got " +
                         std::to_string(x.cols()));
  }
  Matrix h = x;
  for (const auto& l : layers_) {
    const Matrix pre = (h * l.weight().value).rowwise() + l.bias().value.row(0);
    h = nn::activate(l.activation(), pre);
  }
  return h.col(0);
}

nn::ParameterList Mlp::parameters() {
  nn::ParameterList out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

std::vector<const nn::Parameter*> Mlp::parameters() const {
  std::vector<const nn::Parameter*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  return out;
}

double HeadModel::predict(const RowVector& features) const {
  Matrix x = features;
  return predict(x)(0);
}

Vector HeadModel::predict(const Matrix& features) const {
  if (!trained) throw RoutingError("head '" + name + "' is not trained");
  const Matrix z = (features.rowwise() - feature_mean).array().rowwise() / feature_scale.array();
  return (net.evaluate(z).array() * (target_max - target_min) + target_min).matrix();
}

namespace {

Matrix gather(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

Vector gather(const Vector& y, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(k)) = y(rows[k]);
  return out;
}

}  // namespace

HeadModel train_head(const std::string& name, const Matrix& x, const Vector& y, const MlpConfig& config,
                     std::uint64_t seed) {
  if (x.rows() != y.size()) throw DimensionError("head training: feature and target counts differ");
  HeadModel head;
  head.name = name;
  head.training_pairs = static_cast<std::size_t>(x.rows());
  if (x.rows() == 0 || x.rows() < config.min_pairs) return head;

  head.feature_mean = x.colwise().mean();
  head.feature_scale = ((x.rowwise() - head.feature_mean).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index c = 0; c < head.feature_scale.size(); ++c)
    if (!(head.feature_scale(c) > 0.0)) head.feature_scale(c) = 1.0;
  head.target_min = y.minCoeff();
  head.target_max = y.maxCoeff();
  const double range = head.target_max > head.target_min ? head.target_max - head.target_min : 1.0;
  if (!(head.target_max > head.target_min)) head.target_max = head.target_min + range;

  const Matrix z = (x.rowwise() - head.feature_mean).array().rowwise() / head.feature_scale.array();
  const Vector t = ((y.array() - head.target_min) / range).matrix();
  nn::LossSpec loss = config.loss;
  loss.gamma /= range;
  loss.delta /= range;

  std::mt19937_64 split_rng(mix_seed(seed, 1));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_val = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) n_val = 0;
  std::vector<Eigen::Index> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const Matrix zx = gather(z, train_rows);
  const Vector zt = gather(t, train_rows);
  const Matrix vx = val_rows.empty() ? zx : gather(z, val_rows);
  const Vector vt = val_rows.empty() ? zt : gather(t, val_rows);

  head.net = Mlp(x.cols(), config, mix_seed(seed, 2));
  std::mt19937_64 batch_rng(mix_seed(seed, 3));
  const auto n_train = static_cast<std::size_t>(zx.rows());
  const std::size_t batch =
      config.batch_size <= 0 ? n_train : std::min(n_train, static_cast<std::size_t>(config.batch_size));
  std::vector<Eigen::Index> perm(n_train);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});

  nn::TrainHooks hooks;
  hooks.params = head.net.parameters();
  hooks.train_epoch = [&](nn::Optimizer& opt, int) {
    std::shuffle(perm.begin(), perm.end(), batch_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::vector<Eigen::Index> rows(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                           perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, start + batch)));
      const Matrix bx = gather(zx, rows);
      const Vector bt = gather(zt, rows);
      nn::zero_grads(hooks.params);
      const Vector p = head.net.forward(bx);
      total += nn::loss_value(loss, bt, p);
      head.net.backward(nn::loss_grad(loss, bt, p));
      opt.step(hooks.params);
    }
    return total;
  };
  hooks.validation_loss = [&] { return nn::loss_value(loss, vt, head.net.evaluate(vx)); };

  nn::TrainConfig tc;
  tc.optimizer = config.optimizer;
  tc.learning_rate = config.learning_rate;
  tc.max_epochs = config.max_epochs;
  tc.patience = config.patience;
  tc.seed = seed;
  try {
    head.history = nn::train_loop(hooks, tc);
  } catch (const TrainingError& e) {
    throw TrainingError("head " + name + ": " + e.what());
  }
  head.trained = true;
  return head;
}

// --- categories and registries -------------------------------------------------------------------

const char* to_string(GreysheepCategory c) {
  switch (c) {
    case GreysheepCategory::RegularUserGsService: return "regularU+GSS";
    case GreysheepCategory::GsUserRegularService: return "GSU+regularS";
    case GreysheepCategory::GsUserGsService: return "GSU+GSS";
  }
  return "?";
}

const char* to_string(ColdCategory c) {
  switch (c) {
    case ColdCategory::ColdUser: return "CSU";
    case ColdCategory::ColdService: return "CSS";
    case ColdCategory::ColdBoth: return "CSB";
  }
  return "?";
}

const char* to_string(ColdCollaborative c) { return c == ColdCollaborative::Zero ? "zero" : "mean"; }

ColdCollaborative parse_cold_collaborative(const std::string& text) {
  if (text == "zero") return ColdCollaborative::Zero;
  if (text == "mean") return ColdCollaborative::Mean;
  throw std::invalid_argument("unknown cold collaborative mode '" + text + "' (zero|mean)");
}

ColdRegistry ColdRegistry::from_matrix(const QosMatrix& train) {
  ColdRegistry r;
  r.users.resize(train.n_users());
  r.services.resize(train.n_services());
  for (std::size_t i = 0; i < r.users.size(); ++i) r.users[i] = train.invocation_count(Side::User, i) == 0;
  for (std::size_t j = 0; j < r.services.size(); ++j)
    r.services[j] = train.invocation_count(Side::Service, j) == 0;
  return r;
}

std::size_t ColdRegistry::cold_user_count() const {
  return static_cast<std::size_t>(std::count(users.begin(), users.end(), true));
}

std::size_t ColdRegistry::cold_service_count() const {
  return static_cast<std::size_t>(std::count(services.begin(), services.end(), true));
}

// --- features ------------------------------------------------------------------------------------

namespace {

RowVector concat(const RowVector& a, const RowVector& b) {
  RowVector out(a.size() + b.size());
  out << a, b;
  return out;
}

RowVector warm_mean(const Matrix& factors, const std::vector<bool>& cold) {
  RowVector sum = RowVector::Zero(factors.cols());
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < factors.rows(); ++r) {
    if (static_cast<std::size_t>(r) < cold.size() && cold[static_cast<std::size_t>(r)]) continue;
    sum += factors.row(r);
    ++count;
  }
  return count > 0 ? RowVector(sum / static_cast<double>(count)) : sum;
}

}  // namespace

RowVector HeadFeatureSource::known_entity(Side side, std::size_t index) const {
  const Matrix& e = side == Side::User ? user_embedding : service_embedding;
  return e.row(static_cast<Eigen::Index>(index));
}

RowVector HeadFeatureSource::greysheep_entity(Side side, std::size_t index, bool greysheep) const {
  const RowVector e = known_entity(side, index);
  if (!greysheep) return e;
  const auto k = static_cast<Eigen::Index>(index);
  const Matrix& f0 = side == Side::User ? user_initial : service_initial;
  const double ga = side == Side::User ? user_ga(k) : service_ga(k);
  const auto count = side == Side::User ? user_counts.at(index) : service_counts.at(index);
  RowVector out(e.size() + f0.cols() + 2);
  out << e, f0.row(k), ga, static_cast<double>(count);
  return out;
}

RowVector HeadFeatureSource::cold_entity(Side side, std::size_t index) const {
  const auto k = static_cast<Eigen::Index>(index);
  const Matrix& ctx = side == Side::User ? user_context : service_context;
  const RowVector& mean = side == Side::User ? user_nmf_mean : service_nmf_mean;
  const RowVector collab = cold_collaborative == ColdCollaborative::Mean ? mean : RowVector::Zero(mean.size());
  return concat(ctx.row(k), collab);
}

HeadFeatureSource make_head_source(const Matrix& user_embedding, const Matrix& service_embedding,
                                   const FeatureArtifacts& features, const GaScores& ga,
                                   const ColdRegistry& cold, ColdCollaborative collaborative) {
  HeadFeatureSource s;
  const auto n = static_cast<Eigen::Index>(features.embedding.n_users);
  s.user_embedding = user_embedding;
  s.service_embedding = service_embedding;
  s.user_initial = features.embedding.values.topRows(n);
  s.service_initial = features.embedding.values.bottomRows(features.embedding.values.rows() - n);
  s.user_ga = ga.user;
  s.service_ga = ga.service;
  s.user_counts = ga.user_counts;
  s.service_counts = ga.service_counts;
  s.user_context = features.user_context_code;
  s.service_context = features.service_context_code;
  s.user_nmf = features.nmf.user_factors;
  s.service_nmf = features.nmf.service_factors;
  s.user_nmf_mean = warm_mean(s.user_nmf, cold.users);
  s.service_nmf_mean = warm_mean(s.service_nmf, cold.services);
  s.cold_collaborative = collaborative;
  return s;
}

std::optional<GreysheepCategory> greysheep_category(std::size_t user, std::size_t service,
                                                    const GreysheepReport& report) {
  const bool gu = report.is_user(user);
  const bool gs = report.is_service(service);
  if (gu && gs) return GreysheepCategory::GsUserGsService;
  if (gu) return GreysheepCategory::GsUserRegularService;
  if (gs) return GreysheepCategory::RegularUserGsService;
  return std::nullopt;
}

RowVector build_grrqp_features(const HeadFeatureSource& src, GreysheepCategory category, std::size_t user,
                               std::size_t service, const GreysheepReport& report) {
  const auto actual = greysheep_category(user, service, report);
  if (!actual || *actual != category) {
    throw RoutingError("pair (" + std::to_string(user) + ", " + std::to_string(service) +
                       ") is not in grey-sheep category " + to_string(category));
  }
  return concat(src.greysheep_entity(Side::User, user, report.is_user(user)),
                src.greysheep_entity(Side::Service, service, report.is_service(service)));
}

RowVector build_crrqp_features(const HeadFeatureSource& src, ColdCategory category, std::size_t user,
                               std::size_t service, const ColdRegistry& cold, bool simulate) {
  const bool cold_user = category != ColdCategory::ColdService;
  const bool cold_service = category != ColdCategory::ColdUser;
  if (!simulate && (cold.user(user) != cold_user || cold.service(service) != cold_service)) {
    throw RoutingError("pair (" + std::to_string(user) + ", " + std::to_string(service) +
                       ") is not in cold-start category " + to_string(category));
  }
  return concat(cold_user ? src.cold_entity(Side::User, user) : src.known_entity(Side::User, user),
                cold_service ? src.cold_entity(Side::Service, service)
                             : src.known_entity(Side::Service, service));
}

// --- training ------------------------------------------------------------------------------------

namespace {

HeadModel fit(const std::string& name, const std::vector<RowVector>& rows, const std::vector<double>& targets,
              const MlpConfig& config, std::uint64_t seed) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = rows[k];
    y(static_cast<Eigen::Index>(k)) = targets[k];
  }
  return train_head(name, x, y, config, seed);
}

}  // namespace

HeadSet train_grrqp(const QosMatrix& train, const HeadFeatureSource& src, const GreysheepReport& report,
                    const MlpConfig& config, std::uint64_t seed, HeadSet heads) {
  std::array<std::vector<RowVector>, 3> rows;
  std::array<std::vector<double>, 3> targets;
  for (const auto& e : train.entries()) {
    const auto category = greysheep_category(e.user, e.service, report);
    if (!category) continue;
    const auto k = static_cast<std::size_t>(*category);
    rows[k].push_back(build_grrqp_features(src, *category, e.user, e.service, report));
    targets[k].push_back(e.value);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto category = static_cast<GreysheepCategory>(k);
    heads.grrqp[k] = fit(std::string("grrqp:") + to_string(category), rows[k], targets[k], config,
                         mix_seed(seed, 100 + k));
  }
  return heads;
}

HeadSet train_crrqp(const QosMatrix& train, const HeadFeatureSource& src, const ColdRegistry& cold,
                    const MlpConfig& config, std::uint64_t seed, HeadSet heads) {
  const bool any_user = cold.cold_user_count() > 0;
  const bool any_service = cold.cold_service_count() > 0;
  const std::array<bool, 3> needed = {any_user, any_service, any_user && any_service};
  std::array<std::vector<RowVector>, 3> rows;
  std::array<std::vector<double>, 3> targets;
  for (const auto& e : train.entries()) {
    for (std::size_t k = 0; k < 3; ++k) {
      if (!needed[k]) continue;
      rows[k].push_back(build_crrqp_features(src, static_cast<ColdCategory>(k), e.user, e.service, cold, true));
      targets[k].push_back(e.value);
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto category = static_cast<ColdCategory>(k);
    heads.crrqp[k] = fit(std::string("crrqp:") + to_string(category), rows[k], targets[k], config,
                         mix_seed(seed, 200 + k));
  }
  return heads;
}

// --- persistence ---------------------------------------------------------------------------------

namespace {

std::string file_stem(const std::string& name) {
  std::string s;
  for (char c : name) s += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return s;
}

std::vector<double> to_std(const RowVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void save_heads(const std::filesystem::path& dir, const HeadSet& heads) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  auto save_one = [&](const HeadModel& h) {
    nlohmann::json entry = {{"name", h.name}, {"trained", h.trained}, {"training_pairs", h.training_pairs}};
    if (h.trained) {
      const auto stem = file_stem(h.name);
      std::vector<Eigen::Index> hidden;
      const auto params = h.net.parameters();
      for (std::size_t k = 0; k + 2 < params.size(); k += 2) hidden.push_back(params[k]->value.cols());
      save_parameters(dir / stem, params,
                      {{"input_dim", h.net.input_dim()},
                       {"hidden", hidden},
                       {"feature_mean", to_std(h.feature_mean)},
                       {"feature_scale", to_std(h.feature_scale)},
                       {"target_min", h.target_min},
                       {"target_max", h.target_max},
                       {"target_scaling", "minmax"},
                       {"output_activation", "sigmoid"}});
      entry["file"] = stem;
      entry["best_epoch"] = h.history.best_epoch;
    }
    index.push_back(entry);
  };
  for (const auto& h : heads.grrqp) save_one(h);
  for (const auto& h : heads.crrqp) save_one(h);
  write_json(dir / "heads.json", index);
}

HeadSet load_heads(const std::filesystem::path& dir) {
  HeadSet heads;
  const auto index_path = dir / "heads.json";
  if (!std::filesystem::exists(index_path)) return heads;
  const auto index = read_json(index_path);
  std::size_t k = 0;
  for (const auto& entry : index) {
    if (k >= 6) break;
    HeadModel& h = k < 3 ? heads.grrqp[k] : heads.crrqp[k - 3];
    ++k;
    h.name = entry.value("name", std::string());
    h.training_pairs = entry.value("training_pairs", std::size_t{0});
    if (!entry.value("trained", false) || !entry.contains("file")) continue;
    const auto stem = dir / entry.at("file").get<std::string>();
    if (!std::filesystem::exists(stem.string() + ".json")) {
      warn("head file for " + h.name + " is missing; the head stays untrained");
      continue;
    }
    const auto manifest = read_json(stem.string() + ".json").at("meta");
    MlpConfig config;
    config.hidden = manifest.at("hidden").get<std::vector<Eigen::Index>>();
    h.net = Mlp(manifest.at("input_dim").get<Eigen::Index>(), config, 0);
    load_parameters(stem, h.net.parameters());
    const auto mean = manifest.at("feature_mean").get<std::vector<double>>();
    const auto scale = manifest.at("feature_scale").get<std::vector<double>>();
    h.feature_mean = Eigen::Map<const RowVector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    h.feature_scale = Eigen::Map<const RowVector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    h.target_min = manifest.at("target_min").get<double>();
    h.target_max = manifest.at("target_max").get<double>();
    h.trained = true;
  }
  return heads;
}

}  // namespace arrqp
