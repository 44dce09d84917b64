#pragma once

#include "mdeflate/mdeflate.hpp"

#include <Eigen/Eigenvalues>

#include <filesystem>
#include <string>

namespace testing_support {

using namespace mdeflate;

/// Points i*h on the x-axis of R^3.
inline PointCloud line_cloud(Index n, double h) {
  PointCloud pc;
  pc.points = Matrix::Zero(n, 3);
  for (Index i = 0; i < n; ++i) pc.points(i, 0) = static_cast<double>(i) * h;
  pc.truth = Matrix(pc.points.col(0));
  pc.truth_names = {"x"};
  return pc;
}

/// Unit-weight graph from an explicit undirected edge list.
inline NeighborGraph graph_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edges) {
  NeighborGraph g;
  g.n = n;
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  g.distances.assign(static_cast<std::size_t>(n), {});
  for (auto [a, b] : edges) {
    g.neighbors[static_cast<std::size_t>(a)].push_back(b);
    g.distances[static_cast<std::size_t>(a)].push_back(1.0);
  }
  g.weights.assign(static_cast<std::size_t>(n), {});
  for (std::size_t i = 0; i < g.neighbors.size(); ++i) g.weights[i].assign(g.neighbors[i].size(), 1.0);
  g.mean_neighbor_distance = 1.0;
  return symmetrize(g);
}

/// Dense eigenpairs of M restricted to the orthogonal complement of the
/// columns of `constraints` (and of the constant vector), ascending.
inline Eigen::SelfAdjointEigenSolver<Matrix> dense_restricted(const Matrix& m, const std::vector<Vector>& extra,
                                                              Matrix& basis) {
  const Index n = m.rows();
  Matrix c(n, static_cast<Index>(extra.size()) + 1);
  c.col(0) = Vector::Ones(n);
  for (std::size_t i = 0; i < extra.size(); ++i) c.col(static_cast<Index>(i) + 1) = extra[i];
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullU);
  const Index r = svd.rank();
  basis = svd.matrixU().rightCols(n - r);
  const Matrix h = basis.transpose() * m * basis;
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (h + h.transpose()));
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("mdeflate_test_" + name)).string();
}

}  // namespace testing_support
