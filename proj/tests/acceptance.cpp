// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace mdeflate;

namespace {

// Pinned thresholds.
constexpr double kStripPhi1 = 0.95;
constexpr double kStripPhi2 = 0.90;
constexpr double kRatio2Lo = 4 * 0.7, kRatio2Hi = 4 * 1.3;
constexpr double kRatio3Lo = 9 * 0.6, kRatio3Hi = 9 * 1.4;
constexpr double kDeflatedStripMatch = 0.90;
constexpr double kDeflatedStripLeak = 0.3;
constexpr double kScurvePhi1S = 0.9, kScurvePhi2W = 0.85, kScurvePhi2S = 0.3;
constexpr double kSphereBar = 0.9;
constexpr double kTdeRelative = 0.10;
constexpr double kCrossTerm = 0.10;
constexpr double kFrobeniusRel = 1e-10;
constexpr double kHandTol = 1e-10;

constexpr std::size_t kStripN = 3000;
constexpr std::uint64_t kStripSeed = 1;
constexpr std::size_t kScurveDraws = 3000;  // about 2640 survive the hole
constexpr std::uint64_t kScurveSeed = 1;
constexpr std::size_t kSphereN = 2000;

const std::array<double, 3> kStrip{9 * M_PI, 3 * M_PI, M_PI};

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct Scene {
  PointCloud pc;
  NeighborGraph g;
  SparseSymmetric l;
};

Scene make_scene(PointCloud pc) {
  Scene s;
  s.pc = std::move(pc);
  s.g = gaussian_weights(knn_graph(s.pc, kDefaultNeighbors));
  s.l = laplacian(s.g);
  return s;
}

const Scene& strip_scene() {
  static const Scene s = make_scene(generate_box(kStripN, kStrip, kStripSeed));
  return s;
}

const Scene& scurve_scene() {
  static const Scene s = make_scene(generate_scurve(kScurveDraws, kDefaultScurveHole, 0.1, kScurveSeed));
  return s;
}

Embedding deflate(const Scene& s, Index m, double lambda) {
  DeflationOptions opt;
  opt.lambda = lambda;
  return deflate_embed(s.l, s.pc, s.g, m, opt);
}

struct ScurveCheck {
  double phi1_s, phi2_w, phi2_s;
  bool phi2_ok() const { return phi2_w >= kScurvePhi2W && phi2_s <= kScurvePhi2S; }
  bool ok() const { return phi1_s >= kScurvePhi1S && phi2_ok(); }
};

ScurveCheck scurve_check(const Embedding& e, const PointCloud& pc) {
  const Vector s = pc.truth_column("s");
  const Vector w = pc.truth_column("w");
  return {std::abs(correlation(e.coords[0], s)), std::abs(correlation(e.coords[1], w)),
          std::abs(correlation(e.coords[1], s))};
}

void criterion_1(Outcome& o) {
  const Scene& s = strip_scene();
  const Embedding b = baseline_le(s.l, 3);
  const double m1 = eigenfunction_match(b.coords[0], s.pc, 1, 1);
  const double m2 = eigenfunction_match(b.coords[1], s.pc, 2, 1);
  const double r2 = b.eigenvalues[1] / b.eigenvalues[0];
  const double r3 = b.eigenvalues[2] / b.eigenvalues[0];
  o.detail << "match1=" << fmt(m1) << " match2=" << fmt(m2) << " ratio2=" << fmt(r2) << " ratio3=" << fmt(r3) << " ";
  o.require(m1 >= kStripPhi1, "phi1 vs cos(x1/9)");
  o.require(m2 >= kStripPhi2, "phi2 vs cos(2x1/9)");
  o.require(r2 >= kRatio2Lo && r2 <= kRatio2Hi, "lambda2/lambda1");
  o.require(r3 >= kRatio3Lo && r3 <= kRatio3Hi, "lambda3/lambda1");
}

void criterion_2(Outcome& o) {
  const Scene& s = strip_scene();
  const Embedding d = deflate(s, 2, 3.0);
  const double good = eigenfunction_match(d.coords[1], s.pc, 1, 2);
  o.detail << "phi2~cos(x2/3)=" << fmt(good);
  o.require(good >= kDeflatedStripMatch, "phi2 vs cos(x2/3)");
  for (int j = 1; j <= 3; ++j) {
    const double leak = eigenfunction_match(d.coords[1], s.pc, j, 1);
    o.detail << " phi2~cos(" << j << "x1/9)=" << fmt(leak);
    o.require(leak <= kDeflatedStripLeak, "phi2 vs cos(" + std::to_string(j) + "x1/9)");
  }
  o.detail << " ";
}

void criterion_3(Outcome& o) {
  const Scene& s = scurve_scene();
  const ScurveCheck d = scurve_check(deflate(s, 2, 3.0), s.pc);
  const ScurveCheck b = scurve_check(baseline_le(s.l, 2), s.pc);
  o.detail << "n=" << s.pc.size() << " deflation phi1~s=" << fmt(d.phi1_s) << " phi2~w=" << fmt(d.phi2_w)
           << " phi2~s=" << fmt(d.phi2_s) << "; baseline phi2~w=" << fmt(b.phi2_w) << " phi2~s=" << fmt(b.phi2_s)
           << " ";
  o.require(d.ok(), "deflation thresholds");
  o.require(!b.phi2_ok(), "baseline should fail the phi2 criterion");
}

void criterion_4(Outcome& o) {
  const Scene& s = scurve_scene();
  for (double lambda : {0.5, 3.0, 50.0, 500.0}) {
    const ScurveCheck d = scurve_check(deflate(s, 2, lambda), s.pc);
    o.detail << "lambda=" << lambda << ": " << fmt(d.phi1_s) << "/" << fmt(d.phi2_w) << "/" << fmt(d.phi2_s) << " ";
    o.require(d.ok(), "lambda " + fmt(lambda));
  }
}

void criterion_5(Outcome& o) {
  const Scene& s = scurve_scene();
  const Embedding d = deflate(s, 1, 3.0);
  const VfiResult v = vfi_debias(d.coords[0], d.fields[0], s.pc, s.g);
  const Vector sv = s.pc.truth_column("s");
  const Vector wv = s.pc.truth_column("w");
  const double r2_before = linear_fit_r2(sv, d.coords[0]);
  const double r2_after = linear_fit_r2(sv, v.coord);
  const double wu_before = width_uniformity(d.coords[0], sv, wv).value;
  const double wu_after = width_uniformity(v.coord, sv, wv).value;
  o.detail << "R2 " << fmt(r2_before) << "->" << fmt(r2_after) << " width_uniformity " << fmt(wu_before) << "->"
           << fmt(wu_after) << " ";
  o.require(r2_after > r2_before, "R2 increases");
  o.require(wu_after < wu_before, "width_uniformity decreases");
}

void criterion_6(Outcome& o) {
  const Scene s = make_scene(generate_sphere_fibonacci(kSphereN));
  const Embedding d = deflate(s, 2, 3.0);
  const Embedding b = baseline_le(s.l, 2);
  const SphereScore sd = sphere_polar_score(d.coords[0], d.coords[1], s.pc);
  const SphereScore sb = sphere_polar_score(b.coords[0], b.coords[1], s.pc);
  o.detail << "deflation lon=" << fmt(sd.longitude) << " lat=" << fmt(sd.latitude) << "; baseline lon="
           << fmt(sb.longitude) << " lat=" << fmt(sb.latitude) << " ";
  o.require(sd.passes(kSphereBar), "deflation recovers longitude and latitude");
  o.require(!sb.passes(kSphereBar), "baseline should fail the same bar");
}

struct TdeStats {
  double median_vf;     // median over interior points of Vf, f = 2 x1 + 3 x2
  double median_err;    // median of |Vf - 2|
  double median_cross;  // median of |V x2|
};

TdeStats tde_stats(std::size_t n) {
  Rng rng(5);
  PointCloud pc;
  pc.points = Matrix::Zero(static_cast<Index>(n), 3);
  for (Index i = 0; i < pc.size(); ++i) {
    pc.points(i, 0) = rng.uniform(0.0, 2.0);
    pc.points(i, 1) = rng.uniform(0.0, 1.0);
  }
  const double eps = 0.7 * std::pow(static_cast<double>(n), -0.25);
  const NeighborGraph g = gaussian_weights(epsilon_graph(pc, eps));
  const Vector x1 = pc.points.col(0);
  const Vector x2 = pc.points.col(1);
  const VectorFieldOperator v = refine_rescale(refine_project(tde(x1, g), pc, g), pc, g);
  const Vector vf = v.apply((2.0 * x1 + 3.0 * x2).eval());
  const Vector vx2 = v.apply(x2);
  std::vector<double> vals, err, cross;
  for (Index i = 0; i < pc.size(); ++i) {
    const double d = std::min({x1[i], 2.0 - x1[i], x2[i], 1.0 - x2[i]});
    if (d <= eps || v.is_degenerate(i)) continue;
    vals.push_back(vf[i]);
    err.push_back(std::abs(vf[i] - 2.0));
    cross.push_back(std::abs(vx2[i]));
  }
  auto median = [](std::vector<double> x) {
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2), x.end());
    return x[x.size() / 2];
  };
  return {median(vals), median(err), median(cross)};
}

void criterion_7(Outcome& o) {
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n : {500u, 2000u, 8000u}) {
    const TdeStats t = tde_stats(n);
    o.detail << "n=" << n << " median Vf=" << fmt(t.median_vf) << " median |Vf-2|=" << fmt(t.median_err)
             << " median |Vx2|=" << fmt(t.median_cross) << " ";
    o.require(t.median_err <= prev, "error non-increasing at n=" + std::to_string(n));
    prev = t.median_err;
    if (n == 8000) {
      o.require(std::abs(t.median_vf - 2.0) <= kTdeRelative * 2.0, "median within 10% of 2");
      o.require(t.median_cross <= kCrossTerm * 1.0, "cross term");
    }
  }
}

void criterion_8(Outcome& o) {
  const Scene s = make_scene(generate_scurve(900, kDefaultScurveHole, 0.1, 7));
  const Matrix l = s.l.dense();
  o.require(l.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * l.diagonal().maxCoeff(), "L row sums");
  Eigen::SelfAdjointEigenSolver<Matrix> le(l, Eigen::EigenvaluesOnly);
  o.require(le.eigenvalues()[0] >= -1e-10 * le.eigenvalues().maxCoeff(), "L PSD");

  const Embedding d = deflate(s, 3, 3.0);
  const double tol = EigenOptions{}.tol;
  for (std::size_t k = 0; k < d.coords.size(); ++k) {
    const VectorFieldOperator& v = d.fields[k];
    const Vector ones = Vector::Ones(s.pc.size());
    o.require(v.apply(ones).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, Matrix(v.rows).cwiseAbs().maxCoeff()),
              "V rows sum to zero");
    o.require(d.residuals[k] <= tol, "eigenpair residual");
    const SparseSymmetric p = penalty(v, s.l);
    o.require(std::abs(p.frobenius_norm() - s.l.frobenius_norm()) <= kFrobeniusRel * s.l.frobenius_norm(),
              "penalty Frobenius");
    Eigen::SelfAdjointEigenSolver<Matrix> pe(p.dense(), Eigen::EigenvaluesOnly);
    o.require(pe.eigenvalues()[0] >= -1e-10 * pe.eigenvalues().maxCoeff(), "penalty PSD");
    for (Index col = 0; col < p.size(); ++col) {
      std::vector<Index> reach = s.g.closed_neighborhood(col);
      for (Index j : s.g.neighbors[static_cast<std::size_t>(col)]) {
        const auto& nb = s.g.neighbors[static_cast<std::size_t>(j)];
        reach.insert(reach.end(), nb.begin(), nb.end());
      }
      std::sort(reach.begin(), reach.end());
      for (SparseMatrix::InnerIterator it(p.matrix(), col); it; ++it)
        if (!std::binary_search(reach.begin(), reach.end(), it.row())) {
          o.require(false, "penalty two-hop support");
          break;
        }
    }
  }
  DeflationOptions zero;
  zero.lambda = 0.0;
  const Embedding z = deflate_embed(s.l, s.pc, s.g, 3, zero);
  const Embedding b = baseline_le(s.l, 3);
  bool same = true;
  for (std::size_t k = 0; k < 3; ++k) same = same && z.coords[k] == b.coords[k] && z.eigenvalues[k] == b.eigenvalues[k];
  o.require(same, "lambda=0 equals baseline");
  o.detail << "n=" << s.pc.size() << " ";
}

void criterion_9(Outcome& o) {
  const SparseSymmetric p3 = laplacian(testing_support::graph_from_edges(3, {{0, 1}, {1, 2}}));
  const EigenResult r = smallest_nonconstant_eigenpairs(p3, 1);
  Vector expected(3);
  expected << 1.0, 0.0, -1.0;
  expected /= std::sqrt(2.0);
  o.require(std::abs(r.pairs[0].value - 1.0) <= kHandTol, "P3 eigenvalue");
  o.require((r.pairs[0].vector - expected).cwiseAbs().maxCoeff() <= kHandTol, "P3 eigenvector");

  const double h = 0.5;
  const PointCloud line = testing_support::line_cloud(20, h);
  const NeighborGraph g = gaussian_weights(knn_graph(line, 2));
  const VectorFieldOperator v = tde(line.points.col(0), g);
  for (Index i = 3; i < 17; ++i) {
    const Vector row = v.row_values(i);
    const bool stencil = v.support(i) == std::vector<Index>{i - 1, i, i + 1} &&
                         std::abs(row[0] + 1.0 / (2 * h)) <= kHandTol && std::abs(row[1]) <= kHandTol &&
                         std::abs(row[2] - 1.0 / (2 * h)) <= kHandTol;
    if (!stencil) {
      o.require(false, "central-difference stencil at node " + std::to_string(i));
      break;
    }
  }

  const Scene s = make_scene(generate_scurve(600, kDefaultScurveHole, 0.1, 3));
  const VectorFieldOperator f = tde(s.pc.truth_column("s"), s.g);
  auto dist = [](const VectorFieldOperator& a, const VectorFieldOperator& b) {
    return (Matrix(a.rows) - Matrix(b.rows)).cwiseAbs().maxCoeff();
  };
  const VectorFieldOperator once = refine_project(f, s.pc, s.g);
  o.require(dist(once, refine_project(once, s.pc, s.g)) <= kHandTol, "projection idempotent");
  const VectorFieldOperator scaled = refine_rescale(once, s.pc, s.g);
  o.require(dist(scaled, refine_rescale(scaled, s.pc, s.g)) <= kHandTol, "rescale idempotent");
}

}  // namespace

int main() {
  const std::vector<std::pair<double, std::function<void(Outcome&)>>> criteria{
      {120, criterion_1}, {180, criterion_2}, {180, criterion_3}, {600, criterion_4}, {120, criterion_5},
      {180, criterion_6}, {600, criterion_7}, {600, criterion_8}, {60, criterion_9}};
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[c].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= criteria[c].first, "runtime bound " + fmt(criteria[c].first) + "s");
    std::printf("criterion %zu %s (%.1fs) %s\n", c + 1, o.pass ? "PASS" : "FAIL", secs, o.detail.str().c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("criterion 10 NOTE real-data image benchmark is not an acceptance criterion; arbitrary-width CSV input "
              "is covered by the pipeline tests\n");
  return failures == 0 ? 0 : 1;
}
