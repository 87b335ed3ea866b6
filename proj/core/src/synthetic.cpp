#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "arrqp/dataset.hpp"

namespace arrqp {

namespace {

std::vector<std::size_t> pick(std::vector<std::size_t> pool, std::size_t count, std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

bool contains(const std::vector<std::size_t>& sorted, std::size_t x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

// Entities in the same region share a latent center, so context predicts QoS behaviour; a
// per-entity scale adds the usual fast/slow client and service main effects.
Matrix regional_factors(std::size_t count, std::size_t rank, std::size_t regions,
                        std::vector<std::size_t>& region_of, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> center(0.1, 1.5);
  std::uniform_real_distribution<double> jitter(0.75, 1.25);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  std::uniform_int_distribution<std::size_t> region(0, regions - 1);
  Matrix centers(static_cast<Eigen::Index>(regions), static_cast<Eigen::Index>(rank));
  for (Eigen::Index r = 0; r < centers.rows(); ++r)
    for (Eigen::Index k = 0; k < centers.cols(); ++k) centers(r, k) = center(rng);

  Matrix f(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(rank));
  region_of.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    region_of[i] = region(rng);
    const double s = scale(rng);
    for (std::size_t k = 0; k < rank; ++k) {
      f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          s * centers(static_cast<Eigen::Index>(region_of[i]), static_cast<Eigen::Index>(k)) * jitter(rng);
    }
  }
  return f;
}

ContextTable make_context(Side kind, const std::vector<std::size_t>& region_of, std::size_t regions,
                          std::mt19937_64& rng) {
  ContextTable t;
  t.kind = kind;
  const std::string prefix = kind == Side::User ? "u" : "s";
  const std::string group_prefix = kind == Side::User ? "AS" : "provider";
  for (std::size_t r = 0; r < regions; ++r) {
    t.region_names.push_back("region-" + std::to_string(r));
    // Two groups nested inside each region.
    t.group_names.push_back(group_prefix + "-" + std::to_string(2 * r));
    t.group_names.push_back(group_prefix + "-" + std::to_string(2 * r + 1));
  }
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < region_of.size(); ++i) {
    t.ids.push_back(prefix + std::to_string(i));
    t.region.push_back(region_of[i]);
    t.group.push_back(2 * region_of[i] + (coin(rng) ? 1 : 0));
  }
  return t;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  const auto n = spec.n_users;
  const auto m = spec.n_services;
  if (n == 0 || m == 0) throw std::invalid_argument("synthetic dataset needs n, m > 0");
  if (spec.rank == 0 || spec.rank > std::min(n, m)) {
    throw std::invalid_argument("rank must lie in [1, min(n, m)]");
  }
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(spec.density) || !in_unit(spec.outlier_fraction)) {
    throw std::invalid_argument("density and outlier_fraction must lie in [0, 1]");
  }
  if (spec.greysheep_users + spec.cold_users > n || spec.cold_services > m) {
    throw std::invalid_argument("more planted entities than available");
  }
  if (spec.user_regions == 0 || spec.service_regions == 0) {
    throw std::invalid_argument("region counts must be positive");
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<std::size_t> user_region, service_region;
  const Matrix a = regional_factors(n, spec.rank, spec.user_regions, user_region, rng);
  const Matrix b = regional_factors(m, spec.rank, spec.service_regions, service_region, rng);
  Matrix full = a * b.transpose();
  const double level = full.mean();

  std::normal_distribution<double> noise(0.0, spec.noise_std);
  const double floor_value = 1e-3 * level;
  for (Eigen::Index i = 0; i < full.rows(); ++i)
    for (Eigen::Index j = 0; j < full.cols(); ++j)
      full(i, j) = std::max(full(i, j) + (spec.noise_std > 0 ? noise(rng) : 0.0), floor_value);

  std::vector<std::size_t> users(n), services(m);
  std::iota(users.begin(), users.end(), 0);
  std::iota(services.begin(), services.end(), 0);

  GroundTruth truth;
  truth.cold_users = pick(users, spec.cold_users, rng);
  std::vector<std::size_t> warm_users;
  for (auto u : users)
    if (!contains(truth.cold_users, u)) warm_users.push_back(u);
  truth.greysheep_users = pick(warm_users, spec.greysheep_users, rng);
  truth.cold_services = pick(services, spec.cold_services, rng);

  // Grey-sheep rows ignore the shared low-rank structure: each has its own level and
  // independent per-entry multipliers.
  std::uniform_real_distribution<double> gs_level(0.6 * spec.greysheep_level, 1.4 * spec.greysheep_level);
  std::uniform_real_distribution<double> gs_pattern(0.1, 1.9);
  for (auto u : truth.greysheep_users) {
    const double row_level = gs_level(rng) * level;
    for (Eigen::Index j = 0; j < full.cols(); ++j)
      full(static_cast<Eigen::Index>(u), j) = row_level * gs_pattern(rng);
  }

  std::vector<std::pair<std::size_t, std::size_t>> warm_pairs, cold_pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const bool cold_u = contains(truth.cold_users, i);
    for (std::size_t j = 0; j < m; ++j) {
      if (cold_u || contains(truth.cold_services, j)) {
        cold_pairs.emplace_back(i, j);
      } else {
        warm_pairs.emplace_back(i, j);
      }
    }
  }
  std::shuffle(warm_pairs.begin(), warm_pairs.end(), rng);
  const auto n_obs = static_cast<std::size_t>(
      std::llround(spec.density * static_cast<double>(warm_pairs.size())));
  if (n_obs == 0) throw GenerationError("density too low: no observed entries");
  warm_pairs.resize(n_obs);
  std::sort(warm_pairs.begin(), warm_pairs.end());

  QosMatrix matrix(n, m);
  for (auto [i, j] : warm_pairs)
    matrix.set(i, j, full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));

  for (auto u : truth.greysheep_users) {
    if (matrix.invocation_count(Side::User, u) == 0) {
      throw GenerationError("density too low: grey-sheep user " + std::to_string(u) +
                            " has no observed entries");
    }
  }

  if (!cold_pairs.empty()) {
    std::shuffle(cold_pairs.begin(), cold_pairs.end(), rng);
    const auto n_cold = static_cast<std::size_t>(
        std::llround(spec.density * static_cast<double>(cold_pairs.size())));
    if (n_cold == 0) throw GenerationError("density too low: no evaluation entries for cold entities");
    cold_pairs.resize(n_cold);
    std::sort(cold_pairs.begin(), cold_pairs.end());
    for (auto [i, j] : cold_pairs) {
      truth.cold_entries.push_back({i, j, full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
    }
  }

  if (spec.outlier_fraction > 0.0) {
    auto entries = matrix.entries();
    const auto n_out = static_cast<std::size_t>(
        std::llround(spec.outlier_fraction * static_cast<double>(entries.size())));
    if (n_out == 0) throw GenerationError("density too low: outlier fraction selects no entries");
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(n_out);
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
      return std::tie(x.user, x.service) < std::tie(y.user, y.service);
    });
    for (const auto& e : entries) {
      matrix.set(e.user, e.service, e.value * spec.outlier_scale);
      truth.outliers.push_back(e);
    }
  }

  SyntheticDataset out;
  out.dataset.matrix = std::move(matrix);
  out.dataset.kind = ParameterKind::ResponseTime;
  out.dataset.user_context = make_context(Side::User, user_region, spec.user_regions, rng);
  out.dataset.service_context = make_context(Side::Service, service_region, spec.service_regions, rng);
  out.truth = std::move(truth);
  return out;
}

}  // namespace arrqp
