#pragma once

#include "mdeflate/common.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mdeflate {

/// Axis-aligned rectangle in S-curve intrinsic coordinates (s, w).
struct Rect {
  double s_lo = 0.0, s_hi = 0.0, w_lo = 0.0, w_hi = 0.0;

  bool contains(double s, double w) const {
    return s >= s_lo && s <= s_hi && w >= w_lo && w <= w_hi;
  }
  double area() const { return (s_hi - s_lo) * (w_hi - w_lo); }
  bool operator==(const Rect&) const = default;
};

inline constexpr double kScurveLength = 3.0;
inline constexpr double kScurveWidth = 1.0;

/// Centered 0.9 x 0.4 hole: 12% of the 3 x 1 rectangle.
inline constexpr Rect kDefaultScurveHole{1.05, 1.95, 0.3, 0.7};

inline constexpr double kDefaultStretchNS = 1.05;
inline constexpr double kDefaultStretchEW = 1.02;

/// Everything needed to regenerate a dataset. `name` is one of
/// "scurve", "sphere", "box" or "csv" (externally supplied data).
struct DatasetSpec {
  std::string name = "csv";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double noise_halfwidth = 0.0;
  std::optional<Rect> hole;
  std::array<double, 3> lengths{0.0, 0.0, 0.0};
  double stretch_ns = kDefaultStretchNS;
  double stretch_ew = kDefaultStretchEW;

  bool operator==(const DatasetSpec&) const = default;
};

struct PointCloud {
  Matrix points;                   // n x d ambient coordinates
  std::optional<Matrix> truth;     // n x g intrinsic coordinates, evaluation only
  std::vector<std::string> truth_names;
  std::uint64_t seed = 0;
  DatasetSpec spec;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }

  /// Truth column by name, e.g. "s" or "latitude".
  Vector truth_column(std::string_view name) const {
    if (!truth) throw ParameterError("point cloud has no ground truth");
    for (std::size_t c = 0; c < truth_names.size(); ++c)
      if (truth_names[c] == name) return truth->col(static_cast<Index>(c));
    throw ParameterError("no truth column named '" + std::string(name) + "'");
  }

  void validate() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw ParameterError("point cloud must have n >= 1 and d >= 1");
    if (!points.allFinite()) throw ParameterError("point cloud has non-finite entries");
    if (truth) {
      if (truth->rows() != points.rows())
        throw ParameterError("truth must have exactly n rows");
      if (static_cast<std::size_t>(truth->cols()) != truth_names.size())
        throw ParameterError("truth column names do not match truth width");
      if (!truth->allFinite()) throw ParameterError("truth has non-finite entries");
    }
  }
};

// S-curve

/// Unit-speed S-shaped embedding of [0,3] x [0,1]. Each 1.5 x 1 half is a
/// half-cylinder of radius 1.5/pi; the second half curves the other way and
/// joins the first at s = 1.5.
inline Eigen::Vector3d scurve_point(double s, double w) {
  const double r = 1.5 / M_PI;
  if (s <= 1.5) {
    const double theta = M_PI * s / 1.5;
    return {r * std::sin(theta), w, r - r * std::cos(theta)};
  }
  const double theta = M_PI * (s - 1.5) / 1.5;
  return {-r * std::sin(theta), w, 3.0 * r - r * std::cos(theta)};
}

inline PointCloud generate_scurve(std::size_t n, std::optional<Rect> hole,
                                  double noise_halfwidth, std::uint64_t seed) {
  if (n < 1) throw ParameterError("generate_scurve: n must be >= 1");
  if (!(noise_halfwidth >= 0.0) || !std::isfinite(noise_halfwidth))
    throw ParameterError("generate_scurve: noise half-width must be >= 0");
  if (hole) {
    const Rect& h = *hole;
    if (!(h.s_lo <= h.s_hi && h.w_lo <= h.w_hi))
      throw ParameterError("generate_scurve: hole bounds are inverted");
    if (h.s_lo < 0.0 || h.s_hi > kScurveLength || h.w_lo < 0.0 || h.w_hi > kScurveWidth)
      throw ParameterError("generate_scurve: hole must lie inside [0,3]x[0,1]");
    if (h.s_lo <= 0.0 && h.s_hi >= kScurveLength && h.w_lo <= 0.0 && h.w_hi >= kScurveWidth)
      throw EmptyManifoldError("generate_scurve: hole covers the whole rectangle");
  }

  Rng rng(seed);
  std::vector<std::array<double, 2>> kept;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.uniform(0.0, kScurveLength);
    const double w = rng.uniform(0.0, kScurveWidth);
    if (hole && hole->contains(s, w)) continue;
    kept.push_back({s, w});
  }
  if (kept.empty()) throw EmptyManifoldError("generate_scurve: every sample fell in the hole");

  PointCloud pc;
  const auto m = static_cast<Index>(kept.size());
  pc.points.resize(m, 3);
  pc.truth = Matrix(m, 2);
  pc.truth_names = {"s", "w"};
  for (Index i = 0; i < m; ++i) {
    const auto [s, w] = kept[static_cast<std::size_t>(i)];
    Eigen::Vector3d p = scurve_point(s, w);
    if (noise_halfwidth > 0.0)
      for (int c = 0; c < 3; ++c) p[c] += rng.uniform(-noise_halfwidth, noise_halfwidth);
    pc.points.row(i) = p.transpose();
    (*pc.truth)(i, 0) = s;
    (*pc.truth)(i, 1) = w;
  }
  pc.seed = seed;
  pc.spec.name = "scurve";
  pc.spec.n = n;
  pc.spec.seed = seed;
  pc.spec.noise_halfwidth = noise_halfwidth;
  pc.spec.hole = hole;
  return pc;
}

// Sphere

/// Spherical Fibonacci lattice, z scaled by stretch_ns and x by stretch_ew.
/// Truth holds (longitude, latitude) of the unstretched point.
inline PointCloud generate_sphere_fibonacci(std::size_t n, double stretch_ns = kDefaultStretchNS,
                                            double stretch_ew = kDefaultStretchEW) {
  if (n < 4) throw ParameterError("generate_sphere_fibonacci: n must be >= 4");
  if (!(stretch_ns > 0.0) || !(stretch_ew > 0.0))
    throw ParameterError("generate_sphere_fibonacci: stretch factors must be > 0");

  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  const auto m = static_cast<Index>(n);
  PointCloud pc;
  pc.points.resize(m, 3);
  pc.truth = Matrix(m, 2);
  pc.truth_names = {"longitude", "latitude"};
  for (Index i = 0; i < m; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double angle = golden_angle * static_cast<double>(i);
    const double x = r * std::cos(angle);
    const double y = r * std::sin(angle);
    double lon = std::atan2(y, x);
    if (lon <= -M_PI) lon = M_PI;
    pc.points.row(i) << x * stretch_ew, y, z * stretch_ns;
    (*pc.truth)(i, 0) = lon;
    (*pc.truth)(i, 1) = std::asin(std::clamp(z, -1.0, 1.0));
  }
  pc.spec.name = "sphere";
  pc.spec.n = n;
  pc.spec.stretch_ns = stretch_ns;
  pc.spec.stretch_ew = stretch_ew;
  return pc;
}

// Box

inline PointCloud generate_box(std::size_t n, const std::array<double, 3>& lengths,
                               std::uint64_t seed) {
  if (n < 1) throw ParameterError("generate_box: n must be >= 1");
  for (double l : lengths)
    if (!(l > 0.0) || !std::isfinite(l))
      throw ParameterError("generate_box: lengths must be positive");

  Rng rng(seed);
  const auto m = static_cast<Index>(n);
  PointCloud pc;
  pc.points.resize(m, 3);
  for (Index i = 0; i < m; ++i)
    for (int c = 0; c < 3; ++c) pc.points(i, c) = rng.uniform(0.0, lengths[static_cast<std::size_t>(c)]);
  pc.truth = pc.points;
  pc.truth_names = {"x1", "x2", "x3"};
  pc.seed = seed;
  pc.spec.name = "box";
  pc.spec.n = n;
  pc.spec.seed = seed;
  pc.spec.lengths = lengths;
  return pc;
}

/// Regenerate a synthetic dataset from its spec.
inline PointCloud generate(const DatasetSpec& spec) {
  if (spec.name == "scurve") return generate_scurve(spec.n, spec.hole, spec.noise_halfwidth, spec.seed);
  if (spec.name == "sphere") return generate_sphere_fibonacci(spec.n, spec.stretch_ns, spec.stretch_ew);
  if (spec.name == "box") return generate_box(spec.n, spec.lengths, spec.seed);
  throw ParameterError("unknown dataset '" + spec.name + "'");
}

// CSV

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace detail

inline constexpr std::string_view kTruthPrefix = "truth_";

/// Header `x0,...,x{d-1}[,truth_<name>...]`, one point per row.
inline void save_csv(const PointCloud& pc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (Index c = 0; c < pc.dim(); ++c) out << (c ? "," : "") << 'x' << c;
  if (pc.truth)
    for (const auto& name : pc.truth_names) out << ',' << kTruthPrefix << name;
  out << '\n';
  for (Index i = 0; i < pc.size(); ++i) {
    for (Index c = 0; c < pc.dim(); ++c) out << (c ? "," : "") << detail::format_double(pc.points(i, c));
    if (pc.truth)
      for (Index c = 0; c < pc.truth->cols(); ++c) out << ',' << detail::format_double((*pc.truth)(i, c));
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> header;
  Matrix values;  // rows x header.size()

  /// Column position of `name`, or -1.
  Index column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<Index>(c);
    return -1;
  }
};

/// Row indices in errors count the header as row 0.
inline Table load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty())
    throw ParseError("empty file '" + path + "'", 0);

  Table t;
  for (auto name : detail::split_commas(line)) t.header.emplace_back(detail::trim(name));
  const std::size_t width = t.header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    ++row_index;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != width)
      throw ParseError("expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()),
                       row_index);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!detail::parse_double(cells[c], v))
        throw ParseError("non-numeric cell '" + std::string(detail::trim(cells[c])) + "' in column " +
                             std::to_string(c),
                         row_index);
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("no data rows in '" + path + "'", row_index);
  t.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Index>(rows), static_cast<Index>(width));
  return t;
}

/// Columns prefixed `truth_` become ground truth, all others coordinates.
inline PointCloud load_csv(const std::string& path) {
  const Table t = load_table(path);
  std::vector<Index> point_cols, truth_cols;
  std::vector<std::string> truth_names;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const std::string_view name = t.header[c];
    if (name.substr(0, kTruthPrefix.size()) == kTruthPrefix) {
      truth_cols.push_back(static_cast<Index>(c));
      truth_names.emplace_back(name.substr(kTruthPrefix.size()));
    } else {
      point_cols.push_back(static_cast<Index>(c));
    }
  }
  if (point_cols.empty()) throw ParseError("no coordinate columns in header", 0);

  PointCloud pc;
  pc.points = t.values(Eigen::all, point_cols);
  if (!truth_cols.empty()) {
    pc.truth = Matrix(t.values(Eigen::all, truth_cols));
    pc.truth_names = std::move(truth_names);
  }
  pc.spec.name = "csv";
  pc.spec.n = static_cast<std::size_t>(t.values.rows());
  return pc;
}

// JSON

inline void to_json(nlohmann::json& j, const Rect& r) {
  j = nlohmann::json::array({r.s_lo, r.s_hi, r.w_lo, r.w_hi});
}

inline void from_json(const nlohmann::json& j, Rect& r) {
  if (!j.is_array() || j.size() != 4) throw ParameterError("hole must be [s_lo, s_hi, w_lo, w_hi]");
  r = Rect{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

/// Throws ParameterError naming the first key of `j` not in `allowed`.
inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
  if (!j.is_object()) throw ParameterError(std::string(where) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ParameterError("unknown key '" + item.key() + "' in " + std::string(where));
  }
}

inline void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = nlohmann::json{{"name", s.name}, {"n", s.n}, {"seed", s.seed}};
  if (s.name == "scurve") {
    j["noise_halfwidth"] = s.noise_halfwidth;
    j["hole"] = s.hole ? nlohmann::json(*s.hole) : nlohmann::json(nullptr);
  } else if (s.name == "sphere") {
    j["stretch_ns"] = s.stretch_ns;
    j["stretch_ew"] = s.stretch_ew;
  } else if (s.name == "box") {
    j["lengths"] = s.lengths;
  }
}

inline void from_json(const nlohmann::json& j, DatasetSpec& s) {
  reject_unknown_keys(j, {"name", "n", "seed", "noise_halfwidth", "hole", "lengths", "stretch_ns", "stretch_ew"},
                      "dataset");
  s = DatasetSpec{};
  s.name = j.value("name", std::string("csv"));
  s.n = j.value("n", std::size_t{0});
  s.seed = j.value("seed", std::uint64_t{0});
  s.noise_halfwidth = j.value("noise_halfwidth", 0.0);
  if (j.contains("hole") && !j.at("hole").is_null()) s.hole = j.at("hole").get<Rect>();
  if (j.contains("lengths")) s.lengths = j.at("lengths").get<std::array<double, 3>>();
  s.stretch_ns = j.value("stretch_ns", kDefaultStretchNS);
  s.stretch_ew = j.value("stretch_ew", kDefaultStretchEW);
}

}  // namespace mdeflate
