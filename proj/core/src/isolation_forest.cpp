#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "arrqp/anomaly.hpp"

namespace arrqp {

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  constexpr double euler_gamma = 0.5772156649015329;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + euler_gamma) - 2.0 * m / static_cast<double>(n);
}

int IsolationForest::grow(Tree& tree, const Matrix& points, std::vector<Eigen::Index>& idx, std::size_t lo,
                          std::size_t hi, int depth, int max_depth, std::mt19937_64& rng) {
  const int id = static_cast<int>(tree.size());
  tree.push_back({});
  tree[static_cast<std::size_t>(id)].size = hi - lo;
  if (hi - lo <= 1 || depth >= max_depth) return id;

  // Only attributes that still vary inside this node can split it.
  std::vector<int> candidates;
  std::vector<std::pair<double, double>> ranges(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index f = 0; f < points.cols(); ++f) {
    double mn = points(idx[lo], f), mx = mn;
    for (std::size_t k = lo + 1; k < hi; ++k) {
      mn = std::min(mn, points(idx[k], f));
      mx = std::max(mx, points(idx[k], f));
    }
    ranges[static_cast<std::size_t>(f)] = {mn, mx};
    if (mx > mn) candidates.push_back(static_cast<int>(f));
  }
  if (candidates.empty()) return id;

  const int feature = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  const auto [mn, mx] = ranges[static_cast<std::size_t>(feature)];
  double split = std::uniform_real_distribution<double>(mn, mx)(rng);
  if (split <= mn) split = std::nextafter(mn, mx);
  const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                  idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                  [&](Eigen::Index r) { return points(r, feature) < split; });
  const auto cut = static_cast<std::size_t>(mid - idx.begin());

  const int left = grow(tree, points, idx, lo, cut, depth + 1, max_depth, rng);
  const int right = grow(tree, points, idx, cut, hi, depth + 1, max_depth, rng);
  auto& node = tree[static_cast<std::size_t>(id)];
  node.feature = feature;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

IsolationForest IsolationForest::fit(const Matrix& points, const IsolationForestOptions& options) {
  if (points.rows() < 2) throw std::invalid_argument("isolation forest needs at least 2 points");
  if (options.n_trees < 1 || options.subsample < 2) {
    throw std::invalid_argument("isolation forest needs >= 1 tree and subsample >= 2");
  }
  IsolationForest forest;
  forest.psi_ = std::min(options.subsample, static_cast<std::size_t>(points.rows()));
  const int max_depth = options.max_depth > 0
                            ? options.max_depth
                            : static_cast<int>(std::ceil(std::log2(static_cast<double>(forest.psi_))));
  std::vector<Eigen::Index> all(static_cast<std::size_t>(points.rows()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  for (int t = 0; t < options.n_trees; ++t) {
    std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> sample;
    sample.reserve(forest.psi_);
    std::sample(all.begin(), all.end(), std::back_inserter(sample), forest.psi_, rng);
    Tree tree;
    grow(tree, points, sample, 0, sample.size(), 0, max_depth, rng);
    forest.trees_.push_back(std::move(tree));
  }
  return forest;
}

double IsolationForest::mean_path_length(const Eigen::Ref<const RowVector>& x) const {
  double total = 0.0;
  for (const auto& tree : trees_) {
    int node = 0;
    int depth = 0;
    while (tree[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = tree[static_cast<std::size_t>(node)];
      node = x(nd.feature) < nd.split ? nd.left : nd.right;
      ++depth;
    }
    total += depth + average_path_length(tree[static_cast<std::size_t>(node)].size);
  }
  return total / static_cast<double>(trees_.size());
}

Vector IsolationForest::score(const Matrix& points) const {
  const double c = average_path_length(psi_);
  Vector s(points.rows());
  for (Eigen::Index r = 0; r < points.rows(); ++r) s(r) = std::pow(2.0, -mean_path_length(points.row(r)) / c);
  return s;
}

Vector isolation_forest_scores(const Matrix& points, const IsolationForestOptions& options) {
  return IsolationForest::fit(points, options).score(points);
}

}  // namespace arrqp
