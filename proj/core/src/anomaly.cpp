#include "arrqp/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "arrqp/features.hpp"

namespace arrqp {

namespace {

Vector side_reliability(const QosMatrix& train, Side side) {
  const std::size_t count = side == Side::User ? train.n_users() : train.n_services();
  Vector sigma(static_cast<Eigen::Index>(count));
  std::vector<bool> has(count, false);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < count; ++k) {
    const auto qiv = train.qiv(side, k);
    const auto f = statistical_features(qiv);
    sigma(static_cast<Eigen::Index>(k)) = f.stddev;
    has[k] = !f.empty;
    if (has[k]) {
      lo = std::min(lo, f.stddev);
      hi = std::max(hi, f.stddev);
    }
  }
  Vector r = Vector::Zero(static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    if (!has[k]) continue;
    const auto kk = static_cast<Eigen::Index>(k);
    r(kk) = hi > lo ? 1.0 - (sigma(kk) - lo) / (hi - lo) : 1.0;
  }
  return r;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ReliabilityScores reliability_scores(const QosMatrix& train) {
  return {side_reliability(train, Side::User), side_reliability(train, Side::Service)};
}

double trimmed_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  if (values.size() <= 2) return sum / static_cast<double>(values.size());
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return (sum - *mn - *mx) / static_cast<double>(values.size() - 2);
}

GaScores ga_scores(const QosMatrix& train, const ReliabilityScores& reliability) {
  const std::size_t n = train.n_users();
  const std::size_t m = train.n_services();
  if (static_cast<std::size_t>(reliability.user.size()) != n ||
      static_cast<std::size_t>(reliability.service.size()) != m) {
    throw DimensionError("reliability scores do not match the QoS matrix");
  }
  std::vector<double> user_mean(n), user_trim(n), service_mean(m), service_trim(m);
  GaScores ga;
  ga.user_counts.resize(n);
  ga.service_counts.resize(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = train.qiv(Side::User, i);
    user_mean[i] = mean_of(q);
    user_trim[i] = trimmed_mean(q);
    ga.user_counts[i] = q.size();
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto q = train.qiv(Side::Service, j);
    service_mean[j] = mean_of(q);
    service_trim[j] = trimmed_mean(q);
    ga.service_counts[j] = q.size();
  }
  ga.user = Vector::Zero(static_cast<Eigen::Index>(n));
  ga.service = Vector::Zero(static_cast<Eigen::Index>(m));
  for (const auto& e : train.entries()) {
    const auto i = static_cast<Eigen::Index>(e.user);
    const auto j = static_cast<Eigen::Index>(e.service);
    ga.user(i) += std::abs(e.value - user_mean[e.user] - service_trim[e.service]) * reliability.service(j);
    ga.service(j) += std::abs(e.value - service_mean[e.service] - user_trim[e.user]) * reliability.user(i);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (ga.user_counts[i] > 0) ga.user(static_cast<Eigen::Index>(i)) /= static_cast<double>(ga.user_counts[i]);
  for (std::size_t j = 0; j < m; ++j)
    if (ga.service_counts[j] > 0)
      ga.service(static_cast<Eigen::Index>(j)) /= static_cast<double>(ga.service_counts[j]);
  return ga;
}

bool GreysheepReport::is_user(std::size_t i) const {
  return std::binary_search(users.begin(), users.end(), i);
}

bool GreysheepReport::is_service(std::size_t j) const {
  return std::binary_search(services.begin(), services.end(), j);
}

namespace {

double threshold(const Vector& scores, const std::vector<std::size_t>& counts, double c) {
  std::vector<double> v;
  for (Eigen::Index k = 0; k < scores.size(); ++k)
    if (counts.empty() || counts[static_cast<std::size_t>(k)] > 0) v.push_back(scores(k));
  if (v.empty()) return std::numeric_limits<double>::infinity();
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return mu + c * std::sqrt(ss / static_cast<double>(v.size()));
}

std::vector<std::size_t> above(const Vector& scores, double tau) {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < scores.size(); ++k)
    if (scores(k) > tau) out.push_back(static_cast<std::size_t>(k));
  return out;
}

}  // namespace

GreysheepReport detect_greysheep(const GaScores& ga, double c) {
  GreysheepReport r;
  r.c = c;
  r.user_scores = ga.user;
  r.service_scores = ga.service;
  r.tau_user = threshold(ga.user, ga.user_counts, c);
  r.tau_service = threshold(ga.service, ga.service_counts, c);
  r.users = above(ga.user, r.tau_user);
  r.services = above(ga.service, r.tau_service);
  return r;
}

GreysheepReport detect_greysheep(const QosMatrix& train, double c) {
  return detect_greysheep(ga_scores(train, reliability_scores(train)), c);
}

// --- outliers ------------------------------------------------------------------------------------

const char* to_string(OutlierFeatures f) { return f == OutlierFeatures::Residual ? "residual" : "raw"; }

OutlierFeatures parse_outlier_features(const std::string& text) {
  if (text == "residual") return OutlierFeatures::Residual;
  if (text == "raw") return OutlierFeatures::Raw;
  throw std::invalid_argument("unknown outlier feature set '" + text + "' (residual|raw)");
}

Matrix outlier_features(const QosMatrix& train, OutlierFeatures features) {
  const auto entries = train.entries();
  const Eigen::Index width = features == OutlierFeatures::Raw ? 1 : 3;
  Matrix x(static_cast<Eigen::Index>(entries.size()), width);
  std::vector<double> mu_u(train.n_users()), mu_s(train.n_services());
  if (features == OutlierFeatures::Residual) {
    for (std::size_t i = 0; i < mu_u.size(); ++i) mu_u[i] = mean_of(train.qiv(Side::User, i));
    for (std::size_t j = 0; j < mu_s.size(); ++j) mu_s[j] = mean_of(train.qiv(Side::Service, j));
  }
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    const auto r = static_cast<Eigen::Index>(k);
    x(r, 0) = e.value;
    if (width == 3) {
      x(r, 1) = e.value - mu_u[e.user];
      x(r, 2) = e.value - mu_s[e.service];
    }
  }
  return x;
}

std::vector<std::size_t> select_outliers(const std::vector<Entry>& entries, const Vector& scores,
                                         double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in [0, 1)");
  if (static_cast<std::size_t>(scores.size()) != entries.size()) {
    throw DimensionError("one score per entry required");
  }
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores(static_cast<Eigen::Index>(a));
    const double sb = scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return std::tie(entries[a].user, entries[a].service) < std::tie(entries[b].user, entries[b].service);
  });
  const auto count = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(entries.size())));
  order.resize(std::min(count, order.size()));
  return order;
}

QosMatrix remove_outliers(const QosMatrix& train, const std::vector<Entry>& entries, const Vector& scores,
                          double lambda) {
  QosMatrix out = train;
  for (auto k : select_outliers(entries, scores, lambda)) out.clear(entries[k].user, entries[k].service);
  return out;
}

OutlierReport detect_outliers(const QosMatrix& train, double lambda, const IsolationForestOptions& options,
                              OutlierFeatures features) {
  OutlierReport r;
  r.lambda = lambda;
  r.entries = train.entries();
  r.scores = r.entries.size() < 2 ? Vector(Vector::Zero(static_cast<Eigen::Index>(r.entries.size())))
                                  : isolation_forest_scores(outlier_features(train, features), options);
  r.removed = select_outliers(r.entries, r.scores, lambda);
  return r;
}

QosMatrix apply_removal(const QosMatrix& train, const OutlierReport& report) {
  QosMatrix out = train;
  for (auto k : report.removed) out.clear(report.entries.at(k).user, report.entries.at(k).service);
  return out;
}

// --- reports -------------------------------------------------------------------------------------

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json to_json(const GreysheepReport& r) {
  return {{"c", r.c},
          {"tau_user", r.tau_user},
          {"tau_service", r.tau_service},
          {"greysheep_users", r.users},
          {"greysheep_services", r.services},
          {"user_scores", to_std(r.user_scores)},
          {"service_scores", to_std(r.service_scores)}};
}

nlohmann::json to_json(const OutlierReport& r) {
  nlohmann::json removed = nlohmann::json::array();
  for (auto k : r.removed) {
    const auto& e = r.entries[k];
    removed.push_back({e.user, e.service, e.value, r.scores(static_cast<Eigen::Index>(k))});
  }
  return {{"lambda", r.lambda}, {"scored", r.entries.size()}, {"removed_count", r.removed.size()},
          {"removed", removed}};
}

void write_greysheep_csv(const std::filesystem::path& path, const GreysheepReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  out << "side,index,score,flagged\n";
  for (Eigen::Index i = 0; i < r.user_scores.size(); ++i)
    out << "user," << i << ',' << r.user_scores(i) << ',' << r.is_user(static_cast<std::size_t>(i)) << '\n';
  for (Eigen::Index j = 0; j < r.service_scores.size(); ++j)
    out << "service," << j << ',' << r.service_scores(j) << ',' << r.is_service(static_cast<std::size_t>(j))
        << '\n';
}

void write_outlier_csv(const std::filesystem::path& path, const OutlierReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(12);
  std::vector<bool> removed(r.entries.size(), false);
  for (auto k : r.removed) removed[k] = true;
  out << "user,service,value,score,removed\n";
  for (std::size_t k = 0; k < r.entries.size(); ++k) {
    const auto& e = r.entries[k];
    out << e.user << ',' << e.service << ',' << e.value << ',' << r.scores(static_cast<Eigen::Index>(k)) << ','
        << removed[k] << '\n';
  }
}

}  // namespace arrqp
