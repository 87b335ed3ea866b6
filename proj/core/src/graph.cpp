#include "arrqp/graph.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace arrqp {

Qig Qig::from_matrix(const QosMatrix& train) {
  Qig g;
  g.n_users = train.n_users();
  g.n_services = train.n_services();
  for (const auto& e : train.entries()) g.edges.emplace_back(e.user, e.service);
  return g;
}

SparseMatrix build_adjacency(const Qig& graph) {
  const auto n = static_cast<Eigen::Index>(graph.n_nodes());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(graph.n_nodes() + 2 * graph.edges.size());
  for (Eigen::Index k = 0; k < n; ++k) t.emplace_back(k, k, 1.0);
  for (auto [u, s] : graph.edges) {
    if (u >= graph.n_users || s >= graph.n_services) throw DimensionError("edge endpoint out of range");
    const auto a = static_cast<Eigen::Index>(u);
    const auto b = static_cast<Eigen::Index>(graph.n_users + s);
    t.emplace_back(a, b, 1.0);
    t.emplace_back(b, a, 1.0);
  }
  SparseMatrix a(n, n);
  // Duplicate edges collapse to a single 1.
  a.setFromTriplets(t.begin(), t.end(), [](double, double) { return 1.0; });
  a.makeCompressed();
  return a;
}

SparseMatrix build_adjacency(const QosMatrix& train) { return build_adjacency(Qig::from_matrix(train)); }

SparseMatrix normalize(const SparseMatrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) throw DimensionError("adjacency must be square");
  Vector inv_sqrt(adjacency.rows());
  for (Eigen::Index r = 0; r < adjacency.outerSize(); ++r) {
    double deg = 0.0;
    for (SparseMatrix::InnerIterator it(adjacency, r); it; ++it) deg += it.value();
    if (!(deg > 0.0)) throw std::logic_error("zero-degree row " + std::to_string(r) + " in adjacency");
    inv_sqrt(r) = 1.0 / std::sqrt(deg);
  }
  SparseMatrix out = adjacency;
  for (Eigen::Index r = 0; r < out.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(out, r); it; ++it) it.valueRef() *= inv_sqrt(r) * inv_sqrt(it.col());
  return out;
}

std::vector<std::vector<Eigen::Index>> neighborhoods(const SparseMatrix& adjacency) {
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(adjacency.rows()));
  for (Eigen::Index r = 0; r < adjacency.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(adjacency, r); it; ++it)
      if (it.value() != 0.0) out[static_cast<std::size_t>(r)].push_back(it.col());
  return out;
}

void export_coo(const std::filesystem::path& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) out << r << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace arrqp
