#pragma once

#include "mdeflate/common.hpp"
#include "mdeflate/datasets.hpp"

#include <Eigen/SparseCore>

#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace mdeflate {

/// Symmetric neighborhood graph. Lists are sorted by neighbor index and never
/// contain the node itself. Weights are 1 until gaussian_weights is applied.
struct NeighborGraph {
  Index n = 0;
  std::vector<std::vector<Index>> neighbors;
  std::vector<std::vector<double>> distances;
  std::vector<std::vector<double>> weights;
  /// Mean over the directed (pre-symmetrization) neighbor pairs.
  double mean_neighbor_distance = 0.0;
  /// Gaussian bandwidth sigma; 0 while unweighted.
  double bandwidth = 0.0;

  std::size_t edge_count() const {
    std::size_t total = 0;
    for (const auto& row : neighbors) total += row.size();
    return total / 2;
  }

  /// N(i) together with i, sorted.
  std::vector<Index> closed_neighborhood(Index i) const {
    const auto& row = neighbors[static_cast<std::size_t>(i)];
    std::vector<Index> out;
    out.reserve(row.size() + 1);
    auto it = std::lower_bound(row.begin(), row.end(), i);
    out.insert(out.end(), row.begin(), it);
    out.push_back(i);
    out.insert(out.end(), it, row.end());
    return out;
  }

  /// Weight of edge (i, j), or 0 when absent.
  double weight(Index i, Index j) const {
    const auto& row = neighbors[static_cast<std::size_t>(i)];
    auto it = std::lower_bound(row.begin(), row.end(), j);
    if (it == row.end() || *it != j) return 0.0;
    return weights[static_cast<std::size_t>(i)][static_cast<std::size_t>(it - row.begin())];
  }

  bool has_edge(Index i, Index j) const {
    const auto& row = neighbors[static_cast<std::size_t>(i)];
    return std::binary_search(row.begin(), row.end(), j);
  }
};

/// Union symmetrization: j in N(i) or i in N(j) makes an undirected edge.
/// Idempotent on an already symmetric graph.
inline NeighborGraph symmetrize(const NeighborGraph& directed) {
  const auto n = static_cast<std::size_t>(directed.n);
  std::vector<std::vector<std::pair<Index, std::pair<double, double>>>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& nb = directed.neighbors[i];
    for (std::size_t e = 0; e < nb.size(); ++e) {
      const auto j = static_cast<std::size_t>(nb[e]);
      if (j == i) continue;
      const double w = directed.weights.empty() ? 1.0 : directed.weights[i][e];
      rows[i].push_back({nb[e], {directed.distances[i][e], w}});
      rows[j].push_back({static_cast<Index>(i), {directed.distances[i][e], w}});
    }
  }
  NeighborGraph g;
  g.n = directed.n;
  g.mean_neighbor_distance = directed.mean_neighbor_distance;
  g.bandwidth = directed.bandwidth;
  g.neighbors.resize(n);
  g.distances.resize(n);
  g.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::stable_sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t e = 0; e < r.size(); ++e) {
      if (e > 0 && r[e].first == r[e - 1].first) continue;
      g.neighbors[i].push_back(r[e].first);
      g.distances[i].push_back(r[e].second.first);
      g.weights[i].push_back(r[e].second.second);
    }
  }
  return g;
}

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double euclidean(const RowMatrix& p, Index i, Index j) {
  return std::sqrt((p.row(i) - p.row(j)).squaredNorm());
}

}  // namespace detail

/// Exact k-nearest-neighbor graph by brute force, union-symmetrized.
/// Ties in distance go to the smaller index.
inline NeighborGraph knn_graph(const PointCloud& pc, Index k, unsigned threads = 1) {
  const Index n = pc.size();
  if (k < 1) throw ParameterError("knn_graph: k must be >= 1");
  if (k >= n) throw ParameterError("knn_graph: k must be < n (k=" + std::to_string(k) +
                                   ", n=" + std::to_string(n) + ")");
  const detail::RowMatrix p = pc.points;

  NeighborGraph directed;
  directed.n = n;
  directed.neighbors.assign(static_cast<std::size_t>(n), {});
  directed.distances.assign(static_cast<std::size_t>(n), {});

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(n - 1));
    for (std::size_t qi = begin; qi < end; ++qi) {
      const auto q = static_cast<Index>(qi);
      std::size_t c = 0;
      for (Index j = 0; j < n; ++j)
        if (j != q) cand[c++] = {detail::euclidean(p, q, j), j};
      const auto kk = static_cast<std::ptrdiff_t>(k);
      std::nth_element(cand.begin(), cand.begin() + kk - 1, cand.end());
      std::sort(cand.begin(), cand.begin() + kk);
      auto& nb = directed.neighbors[qi];
      auto& ds = directed.distances[qi];
      for (std::ptrdiff_t e = 0; e < kk; ++e) {
        nb.push_back(cand[static_cast<std::size_t>(e)].second);
        ds.push_back(cand[static_cast<std::size_t>(e)].first);
      }
    }
  });

  double total = 0.0;
  for (const auto& ds : directed.distances)
    for (double d : ds) total += d;
  directed.mean_neighbor_distance = total / static_cast<double>(n * k);
  return symmetrize(directed);
}

/// All pairs at Euclidean distance <= radius. Already symmetric.
inline NeighborGraph epsilon_graph(const PointCloud& pc, double radius, unsigned threads = 1) {
  if (!(radius > 0.0)) throw ParameterError("epsilon_graph: radius must be > 0");
  const Index n = pc.size();
  const detail::RowMatrix p = pc.points;
  NeighborGraph g;
  g.n = n;
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  g.distances.assign(static_cast<std::size_t>(n), {});
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t qi = begin; qi < end; ++qi) {
      const auto q = static_cast<Index>(qi);
      for (Index j = 0; j < n; ++j) {
        if (j == q) continue;
        const double d = detail::euclidean(p, q, j);
        if (d <= radius) {
          g.neighbors[qi].push_back(j);
          g.distances[qi].push_back(d);
        }
      }
    }
  });
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ds : g.distances) {
    for (double d : ds) total += d;
    count += ds.size();
  }
  g.mean_neighbor_distance = count ? total / static_cast<double>(count) : 0.0;
  g.weights.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < g.neighbors.size(); ++i) g.weights[i].assign(g.neighbors[i].size(), 1.0);
  return g;
}

inline constexpr double kDefaultBandwidthMultiplier = 5.0;

/// weight = exp(-d^2 / sigma^2), sigma = multiplier * mean neighbor distance.
inline NeighborGraph gaussian_weights(const NeighborGraph& g,
                                      double bandwidth_multiplier = kDefaultBandwidthMultiplier) {
  if (!(bandwidth_multiplier > 0.0) || !std::isfinite(bandwidth_multiplier))
    throw ParameterError("gaussian_weights: bandwidth multiplier must be > 0");
  NeighborGraph out = g;
  const double sigma = bandwidth_multiplier * g.mean_neighbor_distance;
  out.bandwidth = sigma;
  for (std::size_t i = 0; i < out.neighbors.size(); ++i) {
    out.weights[i].resize(out.neighbors[i].size());
    for (std::size_t e = 0; e < out.neighbors[i].size(); ++e) {
      const double d = out.distances[i][e];
      out.weights[i][e] = sigma > 0.0 ? std::exp(-(d * d) / (sigma * sigma)) : 1.0;
    }
  }
  return out;
}

/// Edge-list dump `i,j,distance,weight`, one line per undirected edge (i < j).
inline void write_edge_list(const NeighborGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "i,j,distance,weight\n";
  for (std::size_t i = 0; i < g.neighbors.size(); ++i)
    for (std::size_t e = 0; e < g.neighbors[i].size(); ++e)
      if (static_cast<std::size_t>(g.neighbors[i][e]) > i)
        out << i << ',' << g.neighbors[i][e] << ',' << detail::format_double(g.distances[i][e]) << ','
            << detail::format_double(g.weights[i][e]) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

using SparseMatrix = Eigen::SparseMatrix<double>;

inline bool is_exactly_symmetric(const SparseMatrix& m) {
  if (m.rows() != m.cols()) return false;
  for (Index col = 0; col < m.outerSize(); ++col)
    for (SparseMatrix::InnerIterator it(m, col); it; ++it)
      if (it.value() != m.coeff(it.col(), it.row())) return false;
  return true;
}

/// Sparse matrix with exact structural and numerical symmetry and a cached
/// Frobenius norm.
class SparseSymmetric {
public:
  SparseSymmetric() = default;

  explicit SparseSymmetric(SparseMatrix m) : m_(std::move(m)) {
    m_.makeCompressed();
    if (!is_exactly_symmetric(m_)) throw ParameterError("SparseSymmetric: matrix is not exactly symmetric");
    frobenius_ = m_.norm();
  }

  /// Averages m with its transpose first; a + b == b + a keeps the result exact.
  static SparseSymmetric symmetrized(const SparseMatrix& m) {
    SparseMatrix t = m.transpose();
    SparseMatrix s = 0.5 * (m + t);
    return SparseSymmetric(std::move(s));
  }

  const SparseMatrix& matrix() const { return m_; }
  Index size() const { return m_.rows(); }
  double frobenius_norm() const { return frobenius_; }

  Vector operator*(const Vector& x) const { return m_ * x; }

  double quadratic_form(const Vector& x) const { return x.dot(m_ * x); }

  /// this + scale * other
  SparseSymmetric plus_scaled(const SparseSymmetric& other, double scale) const {
    if (other.size() != size()) throw ParameterError("SparseSymmetric: size mismatch");
    SparseMatrix sum = m_ + scale * other.m_;
    return SparseSymmetric(std::move(sum));
  }

  Matrix dense() const { return Matrix(m_); }

private:
  SparseMatrix m_;
  double frobenius_ = 0.0;
};

/// Unnormalized graph Laplacian L = D - W.
inline SparseSymmetric laplacian(const NeighborGraph& g) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.edge_count() + static_cast<std::size_t>(g.n));
  for (std::size_t i = 0; i < g.neighbors.size(); ++i) {
    double degree = 0.0;
    for (std::size_t e = 0; e < g.neighbors[i].size(); ++e) {
      const double w = g.weights[i][e];
      degree += w;
      trips.emplace_back(static_cast<Index>(i), g.neighbors[i][e], -w);
    }
    trips.emplace_back(static_cast<Index>(i), static_cast<Index>(i), degree);
  }
  SparseMatrix l(g.n, g.n);
  l.setFromTriplets(trips.begin(), trips.end());
  return SparseSymmetric(std::move(l));
}

}  // namespace mdeflate
