#pragma once

#include "mdeflate/common.hpp"
#include "mdeflate/datasets.hpp"
#include "mdeflate/graph.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <fstream>
#include <string>
#include <vector>

namespace mdeflate {

using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Sparse n x n directional-derivative estimator. Row i is supported on the
/// neighborhood used to estimate it; degenerate rows are stored empty.
struct VectorFieldOperator {
  Index n = 0;
  RowSparseMatrix rows;
  std::vector<Index> degenerate_rows;  // sorted

  Vector apply(const Vector& f) const { return rows * f; }

  bool is_degenerate(Index i) const {
    return std::binary_search(degenerate_rows.begin(), degenerate_rows.end(), i);
  }

  bool all_degenerate() const { return static_cast<Index>(degenerate_rows.size()) == n; }

  std::vector<Index> support(Index i) const {
    std::vector<Index> idx;
    for (RowSparseMatrix::InnerIterator it(rows, i); it; ++it) idx.push_back(it.col());
    return idx;
  }

  Vector row_values(Index i) const {
    Vector vals(rows.outerIndexPtr()[i + 1] - rows.outerIndexPtr()[i]);
    Index c = 0;
    for (RowSparseMatrix::InnerIterator it(rows, i); it; ++it) vals[c++] = it.value();
    return vals;
  }
};

struct TdeOptions {
  /// Include node i in its own neighborhood (the intercept point of the
  /// local regression).
  bool include_self = true;
  /// Rows with centered energy below this fraction of max|phi - mean(phi)|^2
  /// are zeroed.
  double degeneracy_threshold = 1e-12;
};

namespace detail {

struct RowBuffer {
  std::vector<Index> cols;
  std::vector<double> vals;
  bool degenerate = false;
};

inline VectorFieldOperator assemble(Index n, std::vector<RowBuffer>& rows) {
  VectorFieldOperator v;
  v.n = n;
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.degenerate ? 0 : r.cols.size();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nnz);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].degenerate) {
      v.degenerate_rows.push_back(static_cast<Index>(i));
      continue;
    }
    for (std::size_t e = 0; e < rows[i].cols.size(); ++e)
      trips.emplace_back(static_cast<Index>(i), rows[i].cols[e], rows[i].vals[e]);
  }
  v.rows.resize(n, n);
  v.rows.setFromTriplets(trips.begin(), trips.end());
  v.rows.makeCompressed();
  return v;
}

inline std::vector<RowBuffer> unpack(const VectorFieldOperator& v) {
  std::vector<RowBuffer> rows(static_cast<std::size_t>(v.n));
  for (Index i = 0; i < v.n; ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.degenerate = v.is_degenerate(i);
    for (RowSparseMatrix::InnerIterator it(v.rows, i); it; ++it) {
      r.cols.push_back(it.col());
      r.vals.push_back(it.value());
    }
  }
  return rows;
}

inline Matrix gather_rows(const Matrix& points, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), points.cols());
  for (std::size_t a = 0; a < idx.size(); ++a) out.row(static_cast<Index>(a)) = points.row(idx[a]);
  return out;
}

inline Eigen::Map<const Vector> as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline Eigen::Map<Vector> as_vector(std::vector<double>& v) {
  return Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace detail

/// Tangent Derivation Estimator: on each neighborhood A of node i,
/// row_{i,A} = (phi_A - mean(phi_A)) / ||phi_A - mean(phi_A)||^2.
inline VectorFieldOperator tde(const Vector& phi, const NeighborGraph& g, const TdeOptions& opt = {},
                               unsigned threads = 1) {
  if (phi.size() != g.n) throw ParameterError("tde: phi length does not match the graph");
  if (!phi.allFinite()) throw ParameterError("tde: phi has non-finite entries");
  const double spread = g.n > 0 ? (phi.array() - phi.mean()).abs().maxCoeff() : 0.0;
  const double floor = opt.degeneracy_threshold * spread * spread;

  std::vector<detail::RowBuffer> rows(static_cast<std::size_t>(g.n));
  parallel_for(rows.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& r = rows[i];
      r.cols = opt.include_self ? g.closed_neighborhood(static_cast<Index>(i)) : g.neighbors[i];
      if (r.cols.empty()) {
        r.degenerate = true;
        continue;
      }
      double mean = 0.0;
      for (Index j : r.cols) mean += phi[j];
      mean /= static_cast<double>(r.cols.size());
      r.vals.resize(r.cols.size());
      double energy = 0.0;
      for (std::size_t e = 0; e < r.cols.size(); ++e) {
        r.vals[e] = phi[r.cols[e]] - mean;
        energy += r.vals[e] * r.vals[e];
      }
      if (!(energy > 0.0) || energy < floor) {
        r.degenerate = true;
        continue;
      }
      for (double& x : r.vals) x /= energy;
    }
  });
  return detail::assemble(g.n, rows);
}

/// Curvature refinement: replace each row by its orthogonal projection onto
/// the span of the neighborhood's ambient coordinates, centered at their
/// mean. Directions with singular value <= 1e-10 * sigma_max are dropped.
inline VectorFieldOperator refine_project(const VectorFieldOperator& v, const PointCloud& pc,
                                          const NeighborGraph& g, unsigned threads = 1) {
  if (pc.size() != v.n || g.n != v.n) throw ParameterError("refine_project: size mismatch");
  auto rows = detail::unpack(v);
  parallel_for(rows.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& r = rows[i];
      if (r.degenerate) continue;
      Matrix c = detail::gather_rows(pc.points, r.cols);
      c.rowwise() -= c.colwise().mean();
      Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinU);
      const auto& sv = svd.singularValues();
      if (sv.size() == 0 || !(sv[0] > 0.0)) {
        r.degenerate = true;
        continue;
      }
      Index rank = 0;
      while (rank < sv.size() && sv[rank] > 1e-10 * sv[0]) ++rank;
      const auto u = svd.matrixU().leftCols(rank);
      auto row = detail::as_vector(r.vals);
      const Vector projected = u * (u.transpose() * row);
      row = projected;
    }
  });
  return detail::assemble(v.n, rows);
}

/// Scale refinement: each row scaled so that ||row_i (Y_J - 1 y_i)|| = 1.
/// Rows where that norm is below 1e-14 become degenerate.
inline VectorFieldOperator refine_rescale(const VectorFieldOperator& v, const PointCloud& pc,
                                          const NeighborGraph& g, unsigned threads = 1) {
  if (pc.size() != v.n || g.n != v.n) throw ParameterError("refine_rescale: size mismatch");
  auto rows = detail::unpack(v);
  parallel_for(rows.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& r = rows[i];
      if (r.degenerate) continue;
      Matrix y = detail::gather_rows(pc.points, r.cols);
      y.rowwise() -= pc.points.row(static_cast<Index>(i));
      const double t = (detail::as_vector(r.vals).transpose() * y).norm();
      if (!(t >= 1e-14)) {
        r.degenerate = true;
        continue;
      }
      for (double& x : r.vals) x /= t;
    }
  });
  return detail::assemble(v.n, rows);
}

/// Scales each non-degenerate row to unit Euclidean norm.
inline VectorFieldOperator row_normalize(const VectorFieldOperator& v) {
  auto rows = detail::unpack(v);
  for (auto& r : rows) {
    if (r.degenerate) continue;
    const double norm = detail::as_vector(r.vals).norm();
    if (!(norm > 0.0)) {
      r.degenerate = true;
      continue;
    }
    for (double& x : r.vals) x /= norm;
  }
  return detail::assemble(v.n, rows);
}

/// P = c V^T V with c chosen so that ||P||_F = ||L||_F.
inline SparseSymmetric penalty(const VectorFieldOperator& v, const SparseSymmetric& l) {
  if (v.n != l.size()) throw ParameterError("penalty: operator and Laplacian sizes differ");
  const SparseMatrix vc = v.rows;
  const SparseMatrix vtv = SparseMatrix(vc.transpose()) * vc;
  SparseSymmetric gram = SparseSymmetric::symmetrized(vtv);
  if (!(gram.frobenius_norm() > 0.0))
    throw NumericalError("penalty: vector field is identically zero, cannot scale");
  const double scale = l.frobenius_norm() / gram.frobenius_norm();
  SparseMatrix scaled = scale * gram.matrix();
  return SparseSymmetric(std::move(scaled));
}

/// Sparse triplet dump `i,j,value`.
inline void write_triplets(const VectorFieldOperator& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "i,j,value\n";
  for (Index i = 0; i < v.rows.outerSize(); ++i)
    for (RowSparseMatrix::InnerIterator it(v.rows, i); it; ++it)
      out << i << ',' << it.col() << ',' << detail::format_double(it.value()) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace mdeflate
