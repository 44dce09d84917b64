#pragma once

#include "mdeflate/common.hpp"
#include "mdeflate/datasets.hpp"
#include "mdeflate/graph.hpp"
#include "mdeflate/solver.hpp"
#include "mdeflate/tangent.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace mdeflate {

/// Post-processing applied to each estimated vector field.
enum class Refinement {
  none,
  project_rescale,  // low-dimensional data
  row_normalize,    // high-dimensional data
};

inline std::string to_string(Refinement r) {
  switch (r) {
    case Refinement::none: return "none";
    case Refinement::project_rescale: return "project-rescale";
    case Refinement::row_normalize: return "row-normalize";
  }
  return "none";
}

inline Refinement refinement_from_string(const std::string& s) {
  if (s == "none") return Refinement::none;
  if (s == "project-rescale") return Refinement::project_rescale;
  if (s == "row-normalize") return Refinement::row_normalize;
  throw ParameterError("unknown refinement '" + s + "' (expected none, project-rescale, row-normalize)");
}

inline constexpr double kDefaultLambdaSynthetic = 3.0;
inline constexpr double kDefaultLambdaHighDim = 2.0;

struct DeflationOptions {
  double lambda = kDefaultLambdaSynthetic;
  Refinement refinement = Refinement::project_rescale;
  bool include_self = true;
  /// Keep each new coordinate orthogonal to the previous ones as well.
  bool orthogonalize = true;
  EigenOptions solver;
  unsigned threads = 1;
};

struct Embedding {
  std::vector<Vector> coords;
  std::vector<double> eigenvalues;
  std::vector<double> residuals;
  std::vector<VectorFieldOperator> fields;  // empty for the baseline
  std::vector<std::string> warnings;
  nlohmann::json config;

  Index dimension() const { return static_cast<Index>(coords.size()); }

  Matrix as_matrix() const {
    if (coords.empty()) return {};
    Matrix out(coords.front().size(), static_cast<Index>(coords.size()));
    for (std::size_t c = 0; c < coords.size(); ++c) out.col(static_cast<Index>(c)) = coords[c];
    return out;
  }
};

inline nlohmann::json solver_json(const EigenOptions& s) {
  return {{"tol", s.tol}, {"max_iter", s.max_iter}, {"seed", s.seed}, {"block_extra", s.block_extra}};
}

/// Vector field of `phi` with the configured refinement applied.
inline VectorFieldOperator estimate_field(const Vector& phi, const PointCloud& pc, const NeighborGraph& g,
                                          Refinement refinement, bool include_self, unsigned threads = 1) {
  TdeOptions topt;
  topt.include_self = include_self;
  VectorFieldOperator v = tde(phi, g, topt, threads);
  switch (refinement) {
    case Refinement::none: break;
    case Refinement::project_rescale:
      v = refine_rescale(refine_project(v, pc, g, threads), pc, g, threads);
      break;
    case Refinement::row_normalize: v = row_normalize(v); break;
  }
  return v;
}

namespace detail {

inline EigenPair next_coordinate(const SparseSymmetric& m, const std::vector<Vector>& previous,
                                 const EigenOptions& solver, bool orthogonalize, std::size_t k,
                                 std::vector<std::string>& warnings) {
  try {
    EigenResult r = smallest_nonconstant_eigenpairs(m, 1, solver, orthogonalize ? previous : std::vector<Vector>{});
    for (auto& w : r.warnings) warnings.push_back("coordinate " + std::to_string(k) + ": " + w);
    return std::move(r.pairs.front());
  } catch (const NumericalError& e) {
    throw NumericalError("coordinate " + std::to_string(k) + ": " + e.what(), e.residual());
  }
}

}  // namespace detail

/// Manifold Deflation. Starting from M_1 = L, coordinate k is the bottom
/// non-constant eigenvector of M_k; its vector field V_k is estimated and
/// M_{k+1} = M_k + lambda * penalty(V_k, L).
inline Embedding deflate_embed(const SparseSymmetric& l, const PointCloud& pc, const NeighborGraph& g, Index m,
                               const DeflationOptions& opt = {}) {
  if (m < 1) throw ParameterError("deflate_embed: target dimension must be >= 1");
  if (!(opt.lambda >= 0.0) || !std::isfinite(opt.lambda))
    throw ParameterError("deflate_embed: lambda must be >= 0");
  if (pc.size() != l.size() || g.n != l.size()) throw ParameterError("deflate_embed: size mismatch");

  Embedding emb;
  SparseSymmetric current = l;
  for (Index k = 1; k <= m; ++k) {
    EigenPair pair = detail::next_coordinate(current, emb.coords, opt.solver, opt.orthogonalize,
                                             static_cast<std::size_t>(k), emb.warnings);
    VectorFieldOperator field = estimate_field(pair.vector, pc, g, opt.refinement, opt.include_self, opt.threads);
    if (field.all_degenerate())
      throw NumericalError("coordinate " + std::to_string(k) + ": every row of its vector field is degenerate");
    if (k < m && opt.lambda > 0.0) current = current.plus_scaled(penalty(field, l), opt.lambda);
    emb.coords.push_back(std::move(pair.vector));
    emb.eigenvalues.push_back(pair.value);
    emb.residuals.push_back(pair.residual);
    emb.fields.push_back(std::move(field));
  }
  emb.config = {{"method", "deflation"},
                {"m", m},
                {"lambda", opt.lambda},
                {"refinement", to_string(opt.refinement)},
                {"include_self", opt.include_self},
                {"orthogonalize", opt.orthogonalize},
                {"penalty_scaling", "frobenius-matched-to-laplacian"},
                {"solver", solver_json(opt.solver)}};
  return emb;
}

/// Laplacian Eigenmaps: the bottom m non-constant eigenvectors of L, computed
/// one at a time against the previous ones (same path as deflate_embed with
/// lambda = 0).
inline Embedding baseline_le(const SparseSymmetric& l, Index m, const EigenOptions& solver = {}) {
  if (m < 1) throw ParameterError("baseline_le: target dimension must be >= 1");
  Embedding emb;
  for (Index k = 1; k <= m; ++k) {
    EigenPair pair = detail::next_coordinate(l, emb.coords, solver, true, static_cast<std::size_t>(k), emb.warnings);
    emb.coords.push_back(std::move(pair.vector));
    emb.eigenvalues.push_back(pair.value);
    emb.residuals.push_back(pair.residual);
  }
  emb.config = {{"method", "baseline"}, {"m", m}, {"solver", solver_json(solver)}};
  return emb;
}

/// Dense Gaussian kernel exp(-||y_i - y_j||^2 / sigma^2).
inline Matrix gaussian_kernel(const PointCloud& pc, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("gaussian_kernel: bandwidth must be > 0");
  const Index n = pc.size();
  const detail::RowMatrix p = pc.points;
  Matrix k(n, n);
  const double inv = 1.0 / (sigma * sigma);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v = std::exp(-(p.row(i) - p.row(j)).squaredNorm() * inv);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

struct VfiOptions {
  /// Ridge; when unset, 1e-3 * trace(K V^T V K) / n.
  std::optional<double> alpha;
  double tol = 1e-8;
  int max_iter = 50;
};

struct VfiResult {
  Vector coord;
  double alpha = 0.0;
};

/// Vector Field Inversion: kernel ridge regression of V phi = 1,
/// phi~ = K (K V^T V K + alpha I)^{-1} K V^T 1, mean-centered.
/// K is the Gaussian kernel at the graph bandwidth.
inline VfiResult vfi_debias(const Vector& phi, const VectorFieldOperator& v, const PointCloud& pc,
                            const NeighborGraph& g, const VfiOptions& opt = {}) {
  const Index n = v.n;
  if (phi.size() != n || pc.size() != n || g.n != n) throw ParameterError("vfi_debias: size mismatch");
  if (opt.alpha && !(*opt.alpha > 0.0))
    throw ParameterError("vfi_debias: alpha must be > 0 (the unregularized inverse is unbounded)");
  if (!(g.bandwidth > 0.0)) throw ParameterError("vfi_debias: graph has no Gaussian bandwidth");

  const Matrix k = gaussian_kernel(pc, g.bandwidth);
  const Matrix vk = v.rows * k;  // V K
  Matrix a = Matrix::Zero(n, n);
  a.selfadjointView<Eigen::Lower>().rankUpdate(vk.transpose());
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose();
  const double trace = a.trace();
  if (!(trace > 0.0)) throw NumericalError("vfi_debias: vector field is identically zero");
  const double alpha = opt.alpha ? *opt.alpha : 1e-3 * trace / static_cast<double>(n);
  a.diagonal().array() += alpha;
  const Vector rhs = vk.transpose() * Vector::Ones(n);  // K V^T 1
  const Vector c = solve_spd(a, rhs, opt.tol, opt.max_iter);
  Vector out = k * c;
  out.array() -= out.mean();
  (void)phi;
  return {std::move(out), alpha};
}

/// Embedding CSV `coord_1..coord_m` (plus any extra named columns).
inline void write_embedding_csv(const Embedding& emb, const std::string& path,
                                const std::vector<std::pair<std::string, Vector>>& extra = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < emb.coords.size(); ++c) out << (c ? "," : "") << "coord_" << c + 1;
  for (const auto& [name, col] : extra) out << ',' << name;
  out << '\n';
  const Index n = emb.coords.empty() ? 0 : emb.coords.front().size();
  for (Index i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < emb.coords.size(); ++c) out << (c ? "," : "") << detail::format_double(emb.coords[c][i]);
    for (const auto& [name, col] : extra) out << ',' << detail::format_double(col[i]);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Sidecar JSON: eigenvalues, residuals, warnings and the configuration.
inline nlohmann::json embedding_sidecar(const Embedding& emb) {
  return {{"eigenvalues", emb.eigenvalues},
          {"residuals", emb.residuals},
          {"warnings", emb.warnings},
          {"config", emb.config}};
}

}  // namespace mdeflate
