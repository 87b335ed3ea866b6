#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "arrqp/common.hpp"
#include "arrqp/dataset.hpp"

namespace arrqp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Bipartite QoS invocation graph. Node ids: users 0..n-1, services n..n+m-1.
struct Qig {
  std::size_t n_users = 0;
  std::size_t n_services = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (user, service), row-major order

  std::size_t n_nodes() const { return n_users + n_services; }
  static Qig from_matrix(const QosMatrix& train);
};

/// Binary adjacency with self-loops: a_ij = 1 iff i == j or (i, j) is an observed edge.
SparseMatrix build_adjacency(const Qig& graph);
SparseMatrix build_adjacency(const QosMatrix& train);

/// D^-1/2 A D^-1/2 with d_ii the row sum of A. Throws std::logic_error on a zero-degree row.
SparseMatrix normalize(const SparseMatrix& adjacency);

/// Per-node neighbour lists (including the node itself), ascending.
std::vector<std::vector<Eigen::Index>> neighborhoods(const SparseMatrix& adjacency);

/// Writes "i j value" lines in row-major order.
void export_coo(const std::filesystem::path& path, const SparseMatrix& m);

}  // namespace arrqp
