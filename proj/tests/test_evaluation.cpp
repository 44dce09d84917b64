#include "support.hpp"

#include <gtest/gtest.h>

using namespace mdeflate;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Correlation, HandValues) {
  const Vector a = vec({1, 2, 3, 4});
  const Vector b = vec({1, 4, 9, 16});
  EXPECT_DOUBLE_EQ(correlation(a, a), 1.0);
  EXPECT_DOUBLE_EQ(correlation(a, -a), -1.0);
  // Sxy = 25, Sxx = 5, Syy = 129: r = 25 / sqrt(645).
  EXPECT_NEAR(correlation(a, b), 25.0 / std::sqrt(645.0), 1e-15);
  EXPECT_NEAR(correlation(a, b), 0.9844, 5e-5);
  EXPECT_DOUBLE_EQ(correlation(a, b, CorrelationKind::spearman), 1.0);
}

TEST(Correlation, AverageRanksForTies) {
  const Vector ranks = detail::average_ranks(vec({10, 20, 20, 5, 20}));
  EXPECT_EQ(ranks, vec({2, 4, 4, 1, 4}));
  // Spearman of tied data equals Pearson of the average ranks.
  const Vector a = vec({1, 2, 2, 3, 5});
  const Vector b = vec({2, 1, 4, 4, 6});
  EXPECT_DOUBLE_EQ(correlation(a, b, CorrelationKind::spearman),
                   correlation(detail::average_ranks(a), detail::average_ranks(b)));
}

TEST(Correlation, ConstantInputIsUndefined) {
  EXPECT_THROW(correlation(vec({1, 1, 1}), vec({1, 2, 3})), UndefinedCorrelationError);
  EXPECT_THROW(correlation(vec({1, 2}), vec({1, 2, 3})), ParameterError);
}

TEST(Correlation, InvariantUnderAffineAndMonotoneMaps) {
  Rng rng(8);
  Vector a(200), b(200);
  for (Index i = 0; i < 200; ++i) {
    a[i] = rng.normal();
    b[i] = a[i] + 0.5 * rng.normal();
  }
  const double p = correlation(a, b);
  EXPECT_NEAR(correlation((3.0 * a.array() + 7.0).matrix(), b), p, 1e-12);
  EXPECT_NEAR(correlation(a, (0.2 * b.array() - 1.0).matrix()), p, 1e-12);
  const double s = correlation(a, b, CorrelationKind::spearman);
  EXPECT_DOUBLE_EQ(correlation(a.array().exp().matrix(), b, CorrelationKind::spearman), s);
  EXPECT_DOUBLE_EQ(correlation(a, b.array().cube().matrix(), CorrelationKind::spearman), s);
}

TEST(LinearFitR2, ExactNullAndEven) {
  const Vector x = Vector::LinSpaced(101, -1.0, 1.0);
  EXPECT_NEAR(linear_fit_r2(x, (2.0 * x.array() - 3.0).matrix()), 1.0, 1e-14);
  EXPECT_NEAR(linear_fit_r2(x, x.array().square().matrix()), 0.0, 1e-14);
  EXPECT_THROW(linear_fit_r2(Vector::Ones(5), x.head(5)), UndefinedCorrelationError);
  EXPECT_EQ(linear_fit_r2(x, Vector::Ones(x.size())), 1.0);
}

TEST(LinearFitR2, IndependentNoiseIsNearZero) {
  // Under the null, n R^2 ~ chi^2_1, so R^2 > 0.02 at n = 1000 has p ~ 1e-5.
  Rng rng(12);
  int exceed = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(1000), y(1000);
    for (Index i = 0; i < 1000; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
    }
    exceed += linear_fit_r2(x, y) > 0.02 ? 1 : 0;
  }
  EXPECT_EQ(exceed, 0);
}

TEST(WidthUniformity, LinearCoordinateIsPerfectlyEven) {
  const PointCloud pc = generate_scurve(3000, kDefaultScurveHole, 0.0, 1);
  const Vector s = pc.truth_column("s");
  const Vector w = pc.truth_column("w");
  const Vector coord = 2.0 * s + 0.3 * w;
  const WidthUniformity wu = width_uniformity(coord, s, w, 10);
  EXPECT_NEAR(wu.value, 0.0, 1e-10);
  EXPECT_EQ(wu.bins.size(), 10u);
}

TEST(WidthUniformity, NeumannCosineIsUneven) {
  const std::array<double, 3> len{9 * M_PI, 3 * M_PI, M_PI};
  const PointCloud pc = generate_box(3000, len, 11);
  const Vector x1 = pc.truth->col(0);
  const Vector x2 = pc.truth->col(1);
  const Vector coord = (x1.array() / 9.0).cos();
  // Closed form: bin slopes are -sin(x/9)/9 averaged over ten equal-width bins
  // of [0, 9 pi]; their coefficient of variation is about 0.48.
  Vector slopes(10);
  for (int b = 0; b < 10; ++b) {
    const double lo = b * M_PI / 10, hi = (b + 1) * M_PI / 10;
    slopes[b] = -(std::cos(lo) - std::cos(hi)) / (hi - lo) / 9.0;
  }
  const double cv = std::sqrt((slopes.array() - slopes.mean()).square().mean()) / std::abs(slopes.mean());
  const WidthUniformity wu = width_uniformity(coord, x1, x2, 10);
  EXPECT_GT(wu.value, 0.2);
  EXPECT_NEAR(wu.value, cv, 0.05);
}

TEST(WidthUniformity, AffineInvariantAndBinReduction) {
  const PointCloud pc = generate_scurve(2000, std::nullopt, 0.0, 3);
  const Vector s = pc.truth_column("s");
  const Vector w = pc.truth_column("w");
  const Vector coord = s.array().square() + w.array();
  const double base = width_uniformity(coord, s, w).value;
  EXPECT_NEAR(width_uniformity((-4.0 * coord.array() + 2.0).matrix(), s, w).value, base, 1e-10);
  EXPECT_THROW(width_uniformity(coord, s, w, 4), ParameterError);
  // 30 points cannot fill 10 bins of 4; fewer bins are used with a warning.
  const WidthUniformity small = width_uniformity(coord.head(30), s.head(30), w.head(30), 10);
  EXPECT_LT(small.bins.size(), 10u);
  EXPECT_FALSE(small.warnings.empty());
}

TEST(EigenfunctionMatch, ExactModeAndOrthogonality) {
  const PointCloud pc = generate_box(3000, {9 * M_PI, 3 * M_PI, M_PI}, 11);
  const Vector mode = (pc.truth->col(0).array() / 9.0).cos();
  EXPECT_NEAR(eigenfunction_match(mode, pc, 1, 1), 1.0, 1e-12);
  EXPECT_LE(eigenfunction_match(mode, pc, 1, 2), 0.2);
  EXPECT_LE(eigenfunction_match(mode, pc, 2, 1), 0.2);
  PointCloud bare = pc;
  bare.truth.reset();
  EXPECT_THROW(eigenfunction_match(mode, bare, 1, 1), ParameterError);
  EXPECT_THROW(eigenfunction_match(mode, pc, 1, 4), ParameterError);
}

TEST(SpherePolarScore, TruthScoresOneAndProjectionDoesNot) {
  const PointCloud pc = generate_sphere_fibonacci(2000, 1.0, 1.0);
  const Vector lon = pc.truth_column("longitude");
  const Vector lat = pc.truth_column("latitude");
  const SphereScore exact = sphere_polar_score(lat, lon, pc);
  EXPECT_DOUBLE_EQ(exact.longitude, 1.0);
  EXPECT_DOUBLE_EQ(exact.latitude, 1.0);
  EXPECT_EQ(exact.longitude_coord, 1);
  // A projection onto (y, z) does not order longitude within a hemisphere.
  const SphereScore proj = sphere_polar_score(pc.points.col(1), pc.points.col(2), pc);
  EXPECT_LT(proj.longitude, 0.9);
}

TEST(InteriorMask, BoxAndScurve) {
  const PointCloud box = generate_box(500, {10, 2, 1}, 1);
  for (Index i : interior_indices(box, 0.3))
    for (int a = 0; a < 3; ++a) {
      EXPECT_GT((*box.truth)(i, a), 0.3);
      EXPECT_LT((*box.truth)(i, a), box.spec.lengths[static_cast<std::size_t>(a)] - 0.3);
    }
  const PointCloud sc = generate_scurve(2000, kDefaultScurveHole, 0.0, 2);
  const auto keep = interior_indices(sc, 0.1);
  EXPECT_LT(keep.size(), static_cast<std::size_t>(sc.size()));
  for (Index i : keep) {
    const double s = (*sc.truth)(i, 0), w = (*sc.truth)(i, 1);
    EXPECT_FALSE(Rect({0.95, 2.05, 0.2, 0.8}).contains(s, w) &&
                 std::hypot(std::max({1.05 - s, 0.0, s - 1.95}), std::max({0.3 - w, 0.0, w - 0.7})) <= 0.1);
  }
  EXPECT_EQ(interior_indices(generate_sphere_fibonacci(100), 1.0).size(), 100u);
}

TEST(MetricReport, JsonRoundTrip) {
  const PointCloud pc = generate_scurve(1500, kDefaultScurveHole, 0.1, 1);
  const Vector s = pc.truth_column("s");
  const Vector w = pc.truth_column("w");
  const MetricReport rep = evaluate({(s.array() / 3.0).cos().matrix(), w}, {0.01, 0.05}, pc);
  EXPECT_TRUE(rep.metrics.count("pearson.coord_1.s"));
  EXPECT_TRUE(rep.metrics.count("spearman.coord_2.w"));
  EXPECT_TRUE(rep.metrics.count("width_uniformity.coord_1"));
  EXPECT_DOUBLE_EQ(rep.metrics.at("eigenvalue_ratio.2_1"), 5.0);
  const nlohmann::json j = rep;
  const MetricReport back = nlohmann::json::parse(j.dump()).get<MetricReport>();
  EXPECT_EQ(back, rep);
}

TEST(MetricReport, BoxReportHasEigenfunctionMatches) {
  const PointCloud pc = generate_box(500, {9 * M_PI, 3 * M_PI, M_PI}, 2);
  const MetricReport rep = evaluate({(pc.truth->col(0).array() / 9.0).cos().matrix()}, {}, pc);
  EXPECT_NEAR(rep.metrics.at("eigenfunction_match.coord_1.j1_axis1"), 1.0, 1e-12);
  PointCloud bare = pc;
  bare.truth.reset();
  EXPECT_THROW(evaluate({pc.points.col(0)}, {}, bare), ParameterError);
}

TEST(MetricReport, InteriorMarginRestrictsSamples) {
  const PointCloud pc = generate_box(800, {10, 5, 5}, 3);
  EvaluateOptions opt;
  opt.margin = 1.0;
  const MetricReport rep = evaluate({pc.points.col(0)}, {}, pc, opt);
  EXPECT_LT(rep.metrics.at("interior_fraction"), 1.0);
  EXPECT_GT(rep.metrics.at("interior_fraction"), 0.0);
}
