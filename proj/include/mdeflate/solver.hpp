#pragma once

#include "mdeflate/common.hpp"
#include "mdeflate/graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include <string>
#include <vector>

namespace mdeflate {

struct EigenPair {
  double value = 0.0;
  Vector vector;  // unit norm, largest-magnitude entry positive
  double residual = 0.0;
};

struct EigenOptions {
  double tol = 1e-8;
  int max_iter = 5000;
  std::uint64_t seed = 0;
  /// Extra block vectors beyond the number requested.
  int block_extra = 5;

  bool operator==(const EigenOptions&) const = default;
};

struct EigenResult {
  std::vector<EigenPair> pairs;
  std::vector<std::string> warnings;
  int iterations = 0;
};

/// Flip v so that its largest-magnitude entry (lowest index on ties) is positive.
inline void apply_sign_convention(Vector& v) {
  Index arg = 0;
  double best = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (v.size() > 0 && v[arg] < 0.0) v = -v;
}

namespace detail {

/// Orthonormal basis for the span of the constant vector and `extra`.
/// Vectors numerically dependent on earlier ones are dropped.
inline Matrix constraint_basis(Index n, const std::vector<Vector>& extra) {
  std::vector<Vector> cols;
  cols.push_back(Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))));
  for (const auto& e : extra) {
    if (e.size() != n) throw ParameterError("eigensolver: constraint vector has the wrong length");
    Vector v = e;
    const double norm0 = v.norm();
    if (!(norm0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& c : cols) v -= c.dot(v) * c;
    const double norm = v.norm();
    if (norm > 1e-10 * norm0) cols.push_back(v / norm);
  }
  Matrix q(n, static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) q.col(static_cast<Index>(c)) = cols[c];
  return q;
}

inline void project_out(const Matrix& q, Eigen::Ref<Vector> x) {
  for (int pass = 0; pass < 2; ++pass) x -= q * (q.transpose() * x);
}

/// Orthonormalize `x` against the first `k` columns of `basis`. Returns false
/// when x is numerically inside that span.
inline bool orthonormalize_against(const Matrix& basis, Index k, Vector& x) {
  const double norm0 = x.norm();
  if (!(norm0 > 0.0)) return false;
  for (int pass = 0; pass < 2; ++pass) {
    if (k > 0) x -= basis.leftCols(k) * (basis.leftCols(k).transpose() * x);
  }
  const double norm = x.norm();
  if (!(norm > 1e-10 * norm0)) return false;
  x /= norm;
  return true;
}

inline EigenResult finalize(const SparseSymmetric& m, const Matrix& q, Matrix vecs, const Vector& vals,
                            Index num) {
  EigenResult out;
  for (Index j = 0; j < num; ++j) {
    Vector v = vecs.col(j);
    project_out(q, v);
    v.normalize();
    apply_sign_convention(v);
    EigenPair p;
    Vector mv = m * v;
    p.value = v.dot(mv);
    project_out(q, mv);
    p.residual = (mv - p.value * v).norm();
    p.vector = std::move(v);
    out.pairs.push_back(std::move(p));
  }
  (void)vals;
  return out;
}

inline void degenerate_kernel_warnings(EigenResult& res, double scale) {
  for (std::size_t j = 0; j < res.pairs.size(); ++j) {
    if (res.pairs[j].value <= 1e-9 * scale) {
      res.warnings.push_back("eigenvalue " + std::to_string(j + 1) +
                             " is numerically zero orthogonal to the constant vector: "
                             "the graph appears disconnected");
    }
  }
}

}  // namespace detail

/// Smallest eigenpairs of a PSD sparse matrix restricted to the orthogonal
/// complement of the constant vector (and of `exclude`, if given).
///
/// With extra constraints the pairs are eigenpairs of the compressed
/// operator P M P, P the orthogonal projector onto the allowed subspace, and
/// residuals are measured for that operator. Without them this coincides with
/// the plain residual ||M v - lambda v|| because M 1 = 0.
///
/// Method: block Davidson with an exact constrained shift-invert
/// preconditioner (sparse LDL^T of M + sigma I with a Schur correction for the
/// constraints), Rayleigh-Ritz on M and thick restarts. Single-threaded and
/// deterministic for a given seed.
inline EigenResult smallest_nonconstant_eigenpairs(const SparseSymmetric& m, Index num,
                                                   const EigenOptions& opt = {},
                                                   const std::vector<Vector>& exclude = {}) {
  const Index n = m.size();
  if (num < 1) throw ParameterError("eigensolver: num must be >= 1");
  if (num >= n) throw ParameterError("eigensolver: num must be < n");
  if (!(opt.tol > 0.0)) throw ParameterError("eigensolver: tol must be > 0");
  if (opt.max_iter < 1) throw ParameterError("eigensolver: max_iter must be >= 1");

  const Matrix q = detail::constraint_basis(n, exclude);
  const Index p = q.cols();
  const Index n_free = n - p;
  if (num > n_free) throw ParameterError("eigensolver: num exceeds the dimension of the allowed subspace");

  const double trace = m.matrix().diagonal().sum();
  const double scale = trace > 0.0 ? trace / static_cast<double>(n) : 1.0;
  const Index block = std::min<Index>(num + std::max(0, opt.block_extra), n_free);

  // Small problems: dense reduction onto an orthonormal basis of the allowed subspace.
  if (n <= 128 || n_free <= 3 * block + 10) {
    Eigen::HouseholderQR<Matrix> qr(q);
    const Matrix full_q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix basis = full_q.rightCols(n_free);
    const Matrix h = basis.transpose() * (m.matrix() * basis);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver: dense reduction failed");
    EigenResult res = detail::finalize(m, q, basis * es.eigenvectors().leftCols(num), es.eigenvalues(), num);
    res.iterations = 1;
    for (const auto& pr : res.pairs)
      if (pr.residual > opt.tol)
        throw NumericalError("eigensolver: dense reduction residual above tolerance", pr.residual);
    detail::degenerate_kernel_warnings(res, scale);
    return res;
  }

  // Shift-invert factorization.
  double shift = 1e-5 * scale;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  for (int attempt = 0;; ++attempt) {
    SparseMatrix identity(n, n);
    identity.setIdentity();
    const SparseMatrix shifted = m.matrix() + shift * identity;
    ldlt.compute(shifted);
    if (ldlt.info() == Eigen::Success) break;
    if (attempt == 6) throw NumericalError("eigensolver: factorization of the shifted matrix failed");
    shift *= 10.0;
  }
  const Matrix z = ldlt.solve(q);
  const Eigen::LDLT<Matrix> schur(q.transpose() * z);
  auto apply_inverse = [&](Vector b) {
    detail::project_out(q, b);
    Vector x = ldlt.solve(b);
    x -= z * schur.solve(z.transpose() * b);
    detail::project_out(q, x);
    return x;
  };

  const Index max_basis = std::min<Index>(n_free, std::max<Index>(4 * block, 2 * block + 20));

  // Seeded random start, one inverse-iteration sweep.
  Rng rng(opt.seed);
  Matrix basis(n, max_basis + block);
  Index cols = 0;
  for (Index j = 0; j < block; ++j) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = rng.normal();
    x = apply_inverse(x);
    if (detail::orthonormalize_against(basis, cols, x)) basis.col(cols++) = x;
  }
  if (cols == 0) throw NumericalError("eigensolver: could not build a starting block");
  Matrix m_basis(n, max_basis + block);
  for (Index j = 0; j < cols; ++j) m_basis.col(j) = m * Vector(basis.col(j));

  double best_residual = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    const Matrix h = basis.leftCols(cols).transpose() * m_basis.leftCols(cols);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver: Rayleigh-Ritz step failed");
    const Index keep = std::min(block, cols);
    const Matrix ritz = basis.leftCols(cols) * es.eigenvectors().leftCols(keep);
    Matrix m_ritz = m_basis.leftCols(cols) * es.eigenvectors().leftCols(keep);
    const Vector theta = es.eigenvalues().head(keep);

    Matrix resid(n, keep);
    std::vector<double> rnorm(static_cast<std::size_t>(keep));
    for (Index j = 0; j < keep; ++j) {
      Vector r = m_ritz.col(j);
      detail::project_out(q, r);
      r -= theta[j] * ritz.col(j);
      rnorm[static_cast<std::size_t>(j)] = r.norm();
      resid.col(j) = r;
    }
    double worst = 0.0;
    for (Index j = 0; j < std::min(num, keep); ++j) worst = std::max(worst, rnorm[static_cast<std::size_t>(j)]);
    best_residual = std::min(best_residual, worst);

    if (keep >= num && worst <= opt.tol) {
      EigenResult res = detail::finalize(m, q, ritz, theta, num);
      bool ok = true;
      for (const auto& pr : res.pairs) ok = ok && pr.residual <= opt.tol;
      if (ok) {
        res.iterations = iter;
        detail::degenerate_kernel_warnings(res, scale);
        return res;
      }
    }

    // Expansion vectors from the unconverged residuals.
    std::vector<Vector> fresh;
    for (Index j = 0; j < keep; ++j) {
      if (rnorm[static_cast<std::size_t>(j)] <= opt.tol && j < num) continue;
      fresh.push_back(apply_inverse(resid.col(j)));
    }
    if (cols + static_cast<Index>(fresh.size()) > max_basis) {
      // Thick restart on the current Ritz block.
      basis.leftCols(keep) = ritz;
      m_basis.leftCols(keep) = m_ritz;
      cols = keep;
    }
    Index added = 0;
    for (auto& x : fresh) {
      if (cols >= max_basis + block) break;
      if (!detail::orthonormalize_against(basis, cols, x)) continue;
      basis.col(cols) = x;
      m_basis.col(cols) = m * x;
      ++cols;
      ++added;
    }
    if (added == 0) {
      // Stagnation: inject a fresh random direction.
      Vector x(n);
      for (Index i = 0; i < n; ++i) x[i] = rng.normal();
      detail::project_out(q, x);
      x = apply_inverse(x);
      if (cols < max_basis + block && detail::orthonormalize_against(basis, cols, x)) {
        basis.col(cols) = x;
        m_basis.col(cols) = m * x;
        ++cols;
      }
    }
  }
  throw NumericalError("eigensolver: no convergence in " + std::to_string(opt.max_iter) +
                           " iterations (best residual " + std::to_string(best_residual) + ")",
                       best_residual);
}

/// Dense SPD solve: Cholesky with iterative refinement until
/// ||a x - b|| <= tol ||b||.
inline Vector solve_spd(const Matrix& a, const Vector& b, double tol = 1e-10, int max_iter = 20) {
  if (a.rows() != a.cols() || a.rows() != b.size()) throw ParameterError("solve_spd: dimension mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector::Zero(b.size());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("solve_spd: matrix is not positive definite");
  Vector x = llt.solve(b);
  Vector r = b - a * x;
  double rn = r.norm();
  for (int it = 0; it < max_iter && rn > tol * bnorm; ++it) {
    x += llt.solve(r);
    r = b - a * x;
    rn = r.norm();
  }
  if (!(rn <= tol * bnorm))
    throw NumericalError("solve_spd: residual " + std::to_string(rn / bnorm) + " above tolerance", rn / bnorm);
  return x;
}

/// Sparse SPD solve by Jacobi-preconditioned conjugate gradients.
inline Vector solve_spd(const SparseSymmetric& a, const Vector& b, double tol = 1e-10, int max_iter = 10000) {
  if (a.size() != b.size()) throw ParameterError("solve_spd: dimension mismatch");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector::Zero(b.size());
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(0.5 * tol);
  cg.setMaxIterations(max_iter);
  cg.compute(a.matrix());
  Vector x = cg.solve(b);
  const double rn = (b - a * x).norm() / bnorm;
  if (!(rn <= tol))
    throw NumericalError("solve_spd: conjugate gradients stopped at relative residual " + std::to_string(rn), rn);
  return x;
}

}  // namespace mdeflate
