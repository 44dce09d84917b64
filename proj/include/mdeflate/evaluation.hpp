#pragma once

#include "mdeflate/common.hpp"
#include "mdeflate/datasets.hpp"

#include <Eigen/QR>
#include <json.hpp>

#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mdeflate {

/// Correlation or regression of a constant input.
class UndefinedCorrelationError : public ParameterError {
public:
  using ParameterError::ParameterError;
};

enum class CorrelationKind { pearson, spearman };

namespace detail {

inline void require_same_length(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) throw ParameterError(std::string(what) + ": inputs differ in length");
  if (a.size() < 2) throw ParameterError(std::string(what) + ": need at least 2 samples");
}

/// 1-based ranks, ties get the average of the ranks they span.
inline Vector average_ranks(const Vector& a) {
  const Index n = a.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a[x] < a[y]; });
  Vector ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && a[order[static_cast<std::size_t>(j + 1)]] == a[order[static_cast<std::size_t>(i)]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index t = i; t <= j; ++t) ranks[order[static_cast<std::size_t>(t)]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw UndefinedCorrelationError("correlation: input is constant");
  return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

inline Vector select(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t t = 0; t < idx.size(); ++t) out[static_cast<Index>(t)] = v[idx[t]];
  return out;
}

}  // namespace detail

inline double correlation(const Vector& a, const Vector& b, CorrelationKind kind = CorrelationKind::pearson) {
  detail::require_same_length(a, b, "correlation");
  if (kind == CorrelationKind::pearson) return detail::pearson(a, b);
  return detail::pearson(detail::average_ranks(a), detail::average_ranks(b));
}

/// R^2 of the least-squares fit y ~ a x + b. A constant y is fit exactly.
inline double linear_fit_r2(const Vector& x, const Vector& y) {
  detail::require_same_length(x, y, "linear_fit_r2");
  const Vector cx = x.array() - x.mean();
  const Vector cy = y.array() - y.mean();
  const double sxx = cx.squaredNorm();
  if (!(sxx > 0.0)) throw UndefinedCorrelationError("linear_fit_r2: x is constant");
  const double syy = cy.squaredNorm();
  if (!(syy > 0.0)) return 1.0;
  const double sxy = cx.dot(cy);
  return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

struct WidthBin {
  double long_lo = 0.0;
  double long_hi = 0.0;
  Index count = 0;
  /// d coord / d truth_long within the bin.
  double span = 0.0;
};

struct WidthUniformity {
  double value = 0.0;  // coefficient of variation of the per-bin spans
  std::vector<WidthBin> bins;
  std::vector<std::string> warnings;
};

/// Evenness of the strips {truth_long in bin}: points are split into equal-count
/// quantile bins of truth_long, and in each bin the rate at which coord
/// advances per unit of truth_long is fit by least squares on
/// (truth_long, truth_wide, 1). Returns the coefficient of variation
/// std / |mean| of those rates; 0 means every strip has the same width.
inline WidthUniformity width_uniformity(const Vector& coord, const Vector& truth_long, const Vector& truth_wide,
                                        Index bins = 10) {
  detail::require_same_length(coord, truth_long, "width_uniformity");
  detail::require_same_length(coord, truth_wide, "width_uniformity");
  if (bins < 5) throw ParameterError("width_uniformity: bins must be >= 5");
  const Index n = coord.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return truth_long[a] < truth_long[b]; });

  WidthUniformity out;
  for (Index b = bins; b >= 2; --b) {
    out.bins.clear();
    bool ok = true;
    for (Index j = 0; j < b && ok; ++j) {
      const Index lo = j * n / b;
      const Index hi = (j + 1) * n / b;
      const Index cnt = hi - lo;
      if (cnt < 4) {
        ok = false;
        break;
      }
      Matrix design(cnt, 3);
      Vector rhs(cnt);
      for (Index t = 0; t < cnt; ++t) {
        const Index i = order[static_cast<std::size_t>(lo + t)];
        design(t, 0) = truth_long[i];
        design(t, 1) = truth_wide[i];
        design(t, 2) = 1.0;
        rhs[t] = coord[i];
      }
      Eigen::ColPivHouseholderQR<Matrix> qr(design);
      if (qr.rank() < 3) {
        ok = false;
        break;
      }
      const Vector beta = qr.solve(rhs);
      WidthBin wb;
      wb.long_lo = truth_long[order[static_cast<std::size_t>(lo)]];
      wb.long_hi = truth_long[order[static_cast<std::size_t>(hi - 1)]];
      wb.count = cnt;
      wb.span = beta[0];
      out.bins.push_back(wb);
    }
    if (ok) {
      Vector spans(static_cast<Index>(out.bins.size()));
      for (std::size_t j = 0; j < out.bins.size(); ++j) spans[static_cast<Index>(j)] = out.bins[j].span;
      const double mean = spans.mean();
      if (!(std::abs(mean) > 0.0)) throw UndefinedCorrelationError("width_uniformity: mean span is zero");
      const double sd = std::sqrt((spans.array() - mean).square().mean());
      out.value = sd / std::abs(mean);
      return out;
    }
    out.warnings.push_back("width_uniformity: " + std::to_string(b) +
                           " bins leave an empty or degenerate bin, reducing to " + std::to_string(b - 1) + " bins");
  }
  throw UndefinedCorrelationError("width_uniformity: no usable binning");
}

/// Per-bin CSV `bin,long_lo,long_hi,count,span`.
inline void write_width_bins(const WidthUniformity& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "bin,long_lo,long_hi,count,span\n";
  for (std::size_t j = 0; j < w.bins.size(); ++j)
    out << j << ',' << detail::format_double(w.bins[j].long_lo) << ',' << detail::format_double(w.bins[j].long_hi)
        << ',' << w.bins[j].count << ',' << detail::format_double(w.bins[j].span) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// |Pearson(coord, cos(j pi x_axis / length_axis))| for a box dataset; `axis`
/// is 1-based and `length` defaults to the dataset's box length.
inline double eigenfunction_match(const Vector& coord, const PointCloud& pc, int j, int axis,
                                  std::optional<double> length = std::nullopt) {
  if (!pc.truth) throw ParameterError("eigenfunction_match: point cloud has no ground truth");
  if (axis < 1 || axis > pc.truth->cols()) throw ParameterError("eigenfunction_match: axis out of range");
  if (j < 1) throw ParameterError("eigenfunction_match: mode index must be >= 1");
  const double len = length ? *length : (axis <= 3 ? pc.spec.lengths[static_cast<std::size_t>(axis - 1)] : 0.0);
  if (!(len > 0.0)) throw ParameterError("eigenfunction_match: box length for axis " + std::to_string(axis) + " unknown");
  const Vector x = pc.truth->col(axis - 1);
  const Vector mode = (x.array() * (static_cast<double>(j) * M_PI / len)).cos();
  return std::abs(correlation(coord, mode));
}

struct SphereScore {
  double longitude = 0.0;  // mean over hemispheres of |Spearman(coord, longitude)|
  double latitude = 0.0;
  /// Coordinate indices (0-based) matched to longitude and latitude.
  Index longitude_coord = 0;
  Index latitude_coord = 1;

  bool passes(double bar) const { return longitude >= bar && latitude >= bar; }
};

/// Polar-coordinate recovery on the sphere. Points are split into the eastern
/// (longitude >= 0) and western hemispheres; in each, |Spearman| of a
/// coordinate against longitude and of another against latitude is computed
/// and the two hemispheres averaged. The assignment of the two coordinates to
/// (longitude, latitude) maximizing the smaller score is used.
inline SphereScore sphere_polar_score(const Vector& c1, const Vector& c2, const PointCloud& pc) {
  const Vector lon = pc.truth_column("longitude");
  const Vector lat = pc.truth_column("latitude");
  if (c1.size() != lon.size() || c2.size() != lon.size()) throw ParameterError("sphere_polar_score: size mismatch");
  std::vector<Index> east, west;
  for (Index i = 0; i < lon.size(); ++i) (lon[i] >= 0.0 ? east : west).push_back(i);
  if (east.size() < 2 || west.size() < 2) throw ParameterError("sphere_polar_score: a hemisphere is empty");
  auto hemi_mean = [&](const Vector& c, const Vector& truth) {
    double total = 0.0;
    for (const auto* h : {&east, &west})
      total += std::abs(correlation(detail::select(c, *h), detail::select(truth, *h), CorrelationKind::spearman));
    return 0.5 * total;
  };
  SphereScore a{hemi_mean(c1, lon), hemi_mean(c2, lat), 0, 1};
  SphereScore b{hemi_mean(c2, lon), hemi_mean(c1, lat), 1, 0};
  return std::min(b.longitude, b.latitude) > std::min(a.longitude, a.latitude) ? b : a;
}

/// Distance from each sample's intrinsic coordinates to the boundary of its
/// domain (infinite for the sphere, which has none).
inline Vector boundary_distance(const PointCloud& pc) {
  const Index n = pc.size();
  const std::string& name = pc.spec.name;
  if (name == "sphere") return Vector::Constant(n, std::numeric_limits<double>::infinity());
  if (!pc.truth) throw ParameterError("boundary_distance: point cloud has no ground truth");
  Vector d(n);
  if (name == "box") {
    for (Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index a = 0; a < 3; ++a) {
        const double x = (*pc.truth)(i, a);
        best = std::min({best, x, pc.spec.lengths[static_cast<std::size_t>(a)] - x});
      }
      d[i] = best;
    }
    return d;
  }
  if (name == "scurve") {
    const Vector s = pc.truth_column("s");
    const Vector w = pc.truth_column("w");
    for (Index i = 0; i < n; ++i) {
      double best = std::min({s[i], kScurveLength - s[i], w[i], kScurveWidth - w[i]});
      if (pc.spec.hole) {
        const Rect& h = *pc.spec.hole;
        const double ds = std::max({h.s_lo - s[i], 0.0, s[i] - h.s_hi});
        const double dw = std::max({h.w_lo - w[i], 0.0, w[i] - h.w_hi});
        best = std::min(best, std::hypot(ds, dw));
      }
      d[i] = best;
    }
    return d;
  }
  throw ParameterError("boundary_distance: domain of dataset '" + name + "' is unknown");
}

/// Indices of samples farther than `margin` from the domain boundary.
inline std::vector<Index> interior_indices(const PointCloud& pc, double margin) {
  if (!(margin >= 0.0)) throw ParameterError("interior_indices: margin must be >= 0");
  const Vector d = boundary_distance(pc);
  std::vector<Index> idx;
  for (Index i = 0; i < d.size(); ++i)
    if (d[i] > margin) idx.push_back(i);
  return idx;
}

/// Named scalar metrics with references to the data and run that produced them.
struct MetricReport {
  std::map<std::string, double> metrics;
  nlohmann::json dataset;
  nlohmann::json embedding;
  std::vector<std::string> warnings;

  bool operator==(const MetricReport&) const = default;

  /// Correlation-type metrics lie in [-1, 1] and R^2 in [0, 1].
  void validate() const {
    for (const auto& [name, v] : metrics) {
      const bool corr = name.rfind("pearson", 0) == 0 || name.rfind("spearman", 0) == 0 ||
                        name.rfind("eigenfunction_match", 0) == 0 ||
                        name.rfind("sphere.hemisphere_spearman", 0) == 0;
      const bool r2 = name.rfind("r2", 0) == 0;
      if (corr && !(v >= -1.0 && v <= 1.0)) throw NumericalError("metric '" + name + "' outside [-1, 1]");
      if (r2 && !(v >= 0.0 && v <= 1.0)) throw NumericalError("metric '" + name + "' outside [0, 1]");
    }
  }
};

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"metrics", r.metrics}, {"dataset", r.dataset}, {"embedding", r.embedding},
                     {"warnings", r.warnings}};
}

inline void from_json(const nlohmann::json& j, MetricReport& r) {
  reject_unknown_keys(j, {"metrics", "dataset", "embedding", "warnings"}, "metric report");
  r = MetricReport{};
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  r.dataset = j.value("dataset", nlohmann::json());
  r.embedding = j.value("embedding", nlohmann::json());
  r.warnings = j.value("warnings", std::vector<std::string>{});
}

struct EvaluateOptions {
  /// Restrict metrics to samples farther than this from the boundary.
  std::optional<double> margin;
  Index width_bins = 10;
};

/// Dataset-aware metric report for embedding columns `coords`, named by
/// `labels` (default coord_1..coord_m). `eigenvalues` may be empty.
inline MetricReport evaluate(const std::vector<Vector>& coords, const std::vector<double>& eigenvalues,
                             const PointCloud& pc, const EvaluateOptions& opt = {},
                             std::vector<std::string> labels = {}) {
  if (!pc.truth) throw ParameterError("evaluate: dataset has no ground truth columns");
  if (coords.empty()) throw ParameterError("evaluate: embedding has no coordinates");
  for (const auto& c : coords)
    if (c.size() != pc.size()) throw ParameterError("evaluate: embedding and dataset differ in length");
  if (labels.empty())
    for (std::size_t k = 0; k < coords.size(); ++k) labels.push_back("coord_" + std::to_string(k + 1));
  if (labels.size() != coords.size()) throw ParameterError("evaluate: one label per column required");

  MetricReport rep;
  rep.dataset = pc.spec;

  std::vector<Index> keep(static_cast<std::size_t>(pc.size()));
  std::iota(keep.begin(), keep.end(), Index{0});
  PointCloud sub = pc;
  if (opt.margin) {
    keep = interior_indices(pc, *opt.margin);
    if (keep.size() < 3) throw ParameterError("evaluate: fewer than 3 interior samples at this margin");
    sub.points = pc.points(keep, Eigen::all);
    sub.truth = Matrix((*pc.truth)(keep, Eigen::all));
    rep.metrics["interior_fraction"] = static_cast<double>(keep.size()) / static_cast<double>(pc.size());
  }
  std::vector<Vector> cs;
  for (const auto& c : coords) cs.push_back(detail::select(c, keep));

  auto guarded = [&](const std::string& name, auto&& f) {
    try {
      rep.metrics[name] = f();
    } catch (const UndefinedCorrelationError& e) {
      rep.warnings.push_back(name + ": " + e.what());
    }
  };

  for (std::size_t k = 0; k < cs.size(); ++k) {
    for (std::size_t t = 0; t < sub.truth_names.size(); ++t) {
      const Vector truth = sub.truth->col(static_cast<Index>(t));
      const std::string suffix = "." + labels[k] + "." + sub.truth_names[t];
      guarded("pearson" + suffix, [&] { return correlation(cs[k], truth); });
      guarded("spearman" + suffix, [&] { return correlation(cs[k], truth, CorrelationKind::spearman); });
      guarded("r2" + suffix, [&] { return linear_fit_r2(truth, cs[k]); });
    }
  }

  if (pc.spec.name == "box") {
    for (std::size_t k = 0; k < cs.size(); ++k)
      for (int axis = 1; axis <= 3; ++axis)
        for (int j = 1; j <= 3; ++j)
          guarded("eigenfunction_match." + labels[k] + ".j" + std::to_string(j) + "_axis" + std::to_string(axis),
                  [&] { return eigenfunction_match(cs[k], sub, j, axis); });
  }
  if (pc.spec.name == "scurve") {
    const Vector s = sub.truth_column("s");
    const Vector w = sub.truth_column("w");
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const std::string& label = labels[k];
      if (label.size() < 2 || label.compare(label.size() - 2, 2, "_1") != 0) continue;
      try {
        const WidthUniformity wu = width_uniformity(cs[k], s, w, opt.width_bins);
        rep.metrics["width_uniformity." + label] = wu.value;
        for (const auto& msg : wu.warnings) rep.warnings.push_back(msg);
      } catch (const UndefinedCorrelationError& e) {
        rep.warnings.push_back("width_uniformity." + label + ": " + e.what());
      }
    }
  }
  if (pc.spec.name == "sphere" && cs.size() >= 2) {
    const SphereScore sc = sphere_polar_score(cs[0], cs[1], sub);
    rep.metrics["sphere.hemisphere_spearman.longitude"] = sc.longitude;
    rep.metrics["sphere.hemisphere_spearman.latitude"] = sc.latitude;
    rep.metrics["sphere.pairing.longitude_coord"] = static_cast<double>(sc.longitude_coord + 1);
  }
  for (std::size_t k = 1; k < eigenvalues.size(); ++k)
    if (eigenvalues[0] > 0.0)
      rep.metrics["eigenvalue_ratio." + std::to_string(k + 1) + "_1"] = eigenvalues[k] / eigenvalues[0];
  rep.validate();
  return rep;
}

}  // namespace mdeflate
