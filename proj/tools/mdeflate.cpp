// Command-line driver: generate -> embed -> evaluate / export-plot.
//
// Exit codes: 0 success, 2 parameter/input error, 3 numerical failure.

#include "mdeflate/mdeflate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace mdeflate;
using nlohmann::json;

constexpr int kExitParameter = 2;
constexpr int kExitNumerical = 3;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParameterError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string sidecar_path(const std::string& path) { return path + ".json"; }

/// Dataset spec stored next to a generated CSV, if any.
std::optional<DatasetSpec> dataset_sidecar(const std::string& csv) {
  const std::string p = sidecar_path(csv);
  if (!std::filesystem::exists(p)) return std::nullopt;
  const json j = read_json(p);
  if (!j.contains("dataset")) return std::nullopt;
  try {
    return j["dataset"].get<DatasetSpec>();
  } catch (const json::exception& e) {
    throw ParameterError("'" + p + "': " + e.what());
  }
}

PointCloud load_dataset(const std::string& csv) {
  PointCloud pc = load_csv(csv);
  pc.validate();
  if (auto spec = dataset_sidecar(csv)) pc.spec = *spec;
  return pc;
}

std::optional<Rect> parse_hole(const std::string& s) {
  if (s == "none") return std::nullopt;
  if (s == "default") return kDefaultScurveHole;
  const auto cells = detail::split_commas(s);
  double v[4];
  if (cells.size() != 4) throw ParameterError("--hole expects 'default', 'none' or s_lo,s_hi,w_lo,w_hi");
  for (int i = 0; i < 4; ++i)
    if (!detail::parse_double(cells[static_cast<std::size_t>(i)], v[i]))
      throw ParameterError("--hole: '" + std::string(cells[static_cast<std::size_t>(i)]) + "' is not a number");
  return Rect{v[0], v[1], v[2], v[3]};
}

std::array<double, 3> parse_lengths(const std::string& s) {
  const auto cells = detail::split_commas(s);
  if (cells.size() != 3) throw ParameterError("--lengths expects three comma-separated lengths");
  std::array<double, 3> out{};
  for (std::size_t i = 0; i < 3; ++i)
    if (!detail::parse_double(cells[i], out[i]))
      throw ParameterError("--lengths: '" + std::string(cells[i]) + "' is not a number");
  return out;
}

RunConfig base_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return parse_config(read_json(path));
}

struct Embedded {
  std::vector<std::string> labels;
  std::vector<Vector> columns;
  std::vector<double> eigenvalues;
  json sidecar;
};

Embedded load_embedding(const std::string& path) {
  const Table t = load_table(path);
  Embedded e;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    e.labels.push_back(t.header[c]);
    e.columns.emplace_back(t.values.col(static_cast<Index>(c)));
  }
  const std::string side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    e.sidecar = read_json(side);
    if (e.sidecar.contains("eigenvalues")) e.eigenvalues = e.sidecar["eigenvalues"].get<std::vector<double>>();
  }
  return e;
}

struct Options {
  // shared
  std::string config;
  unsigned threads = 1;
  // generate
  std::string dataset, hole, lengths, out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double noise = 0.0, stretch_ns = kDefaultStretchNS, stretch_ew = kDefaultStretchEW;
  // embed
  std::string in, method, preset, refinement, graph_kind, edges, fields;
  Index m = 2, k = kDefaultNeighbors;
  double lambda = 0.0, radius = 0.0, multiplier = kDefaultBandwidthMultiplier, alpha = 0.0, tol = 1e-8;
  bool include_self = true, orthogonalize = true, vfi = false;
  int max_iter = 5000;
  std::uint64_t solver_seed = 0;
  // evaluate / export-plot
  std::string embedding, bins_out;
  double margin = 0.0;
  bool interior = false;
  Index width_bins = 10;
};

int cmd_generate(CLI::App& sub, const Options& o) {
  RunConfig cfg = base_config(o.config);
  DatasetSpec& d = cfg.dataset;
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--dataset")) d.name = o.dataset;
  if (given("--n")) d.n = o.n;
  if (given("--seed")) d.seed = o.seed;
  if (given("--noise")) d.noise_halfwidth = o.noise;
  if (given("--hole")) d.hole = parse_hole(o.hole);
  if (given("--lengths")) d.lengths = parse_lengths(o.lengths);
  if (given("--stretch-ns")) d.stretch_ns = o.stretch_ns;
  if (given("--stretch-ew")) d.stretch_ew = o.stretch_ew;
  std::string out = given("--out") ? o.out : cfg.output.input;
  if (out.empty()) throw ParameterError("generate: --out is required");
  if (d.name == "csv") throw ParameterError("generate: --dataset must be scurve, sphere or box");
  if (d.name == "sphere" && d.n == 0) d.n = 2000;
  if (d.n == 0) throw ParameterError("generate: --n is required");

  const PointCloud pc = generate(d);
  save_csv(pc, out);
  write_json({{"dataset", pc.spec}, {"rows", pc.size()}}, sidecar_path(out));
  std::cerr << "generate: wrote " << pc.size() << " points to " << out << '\n';
  return 0;
}

int cmd_embed(CLI::App& sub, const Options& o) {
  RunConfig cfg = base_config(o.config);
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--in")) cfg.output.input = o.in;
  if (given("--out")) cfg.output.embedding = o.out;
  if (given("--edges")) cfg.output.edges = o.edges;
  if (given("--fields")) cfg.output.fields = o.fields;
  if (given("--method")) cfg.method.name = o.method;
  if (given("--m")) cfg.method.m = o.m;
  if (given("--lambda")) cfg.method.lambda = o.lambda;
  if (given("--preset")) cfg.method.preset = o.preset;
  if (given("--refinement")) cfg.method.refinement = o.refinement;
  if (given("--include-self")) cfg.method.include_self = o.include_self;
  if (given("--orthogonalize")) cfg.method.orthogonalize = o.orthogonalize;
  if (given("--vfi")) cfg.method.vfi = o.vfi;
  if (given("--alpha")) cfg.method.alpha = o.alpha;
  if (given("--graph")) cfg.graph.kind = o.graph_kind;
  if (given("--k")) cfg.graph.k = o.k;
  if (given("--radius")) cfg.graph.radius = o.radius;
  if (given("--bandwidth-multiplier")) cfg.graph.bandwidth_multiplier = o.multiplier;
  if (given("--tol")) cfg.solver.tol = o.tol;
  if (given("--max-iter")) cfg.solver.max_iter = o.max_iter;
  if (given("--solver-seed")) cfg.solver.seed = o.solver_seed;
  if (cfg.output.embedding.empty()) throw ParameterError("embed: --out is required");
  if (cfg.output.input.empty() && cfg.dataset.name == "csv")
    throw ParameterError("embed: --in is required (or a synthetic dataset in --config)");
  if (!cfg.output.input.empty() && cfg.dataset.name == "csv")
    if (auto spec = dataset_sidecar(cfg.output.input)) cfg.dataset = *spec;

  const PointCloud pc = load_input(cfg);
  RunResult r;
  try {
    r = run_embedding(pc, cfg, o.threads);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("embed stage: ") + e.what(), e.residual());
  }
  write_embedding_csv(r.embedding, r.config.output.embedding, r.extra);
  write_json(run_sidecar(r), sidecar_path(r.config.output.embedding));
  if (!r.config.output.edges.empty()) write_edge_list(r.graph, r.config.output.edges);
  if (!r.config.output.fields.empty())
    for (std::size_t k = 0; k < r.embedding.fields.size(); ++k)
      write_triplets(r.embedding.fields[k], r.config.output.fields + "_" + std::to_string(k + 1) + ".csv");
  for (const auto& w : r.embedding.warnings) std::cerr << "warning: " << w << '\n';
  std::cerr << "embed: " << r.embedding.dimension() << " coordinates written to " << r.config.output.embedding
            << '\n';
  return 0;
}

double resolve_margin(CLI::App& sub, const Options& o, const Embedded& e, bool& enabled) {
  enabled = false;
  if (sub.count("--margin")) {
    enabled = true;
    return o.margin;
  }
  if (o.interior) {
    if (!e.sidecar.contains("graph_bandwidth"))
      throw ParameterError("--interior needs the embedding sidecar for the graph bandwidth");
    enabled = true;
    return e.sidecar["graph_bandwidth"].get<double>();
  }
  return 0.0;
}

int cmd_evaluate(CLI::App& sub, const Options& o) {
  if (o.in.empty() || o.embedding.empty()) throw ParameterError("evaluate: --in and --embedding are required");
  const PointCloud pc = load_dataset(o.in);
  if (!pc.truth) throw ParameterError("evaluate: '" + o.in + "' has no truth_ columns");
  const Embedded e = load_embedding(o.embedding);
  EvaluateOptions opt;
  opt.width_bins = o.width_bins;
  bool enabled = false;
  const double margin = resolve_margin(sub, o, e, enabled);
  if (enabled) opt.margin = margin;

  MetricReport rep = evaluate(e.columns, e.eigenvalues, pc, opt, e.labels);
  if (e.sidecar.contains("run")) rep.embedding = e.sidecar["run"];
  if (!o.bins_out.empty()) {
    if (pc.spec.name != "scurve") throw ParameterError("--bins-out applies to the scurve dataset");
    write_width_bins(width_uniformity(e.columns.front(), pc.truth_column("s"), pc.truth_column("w"), o.width_bins),
                     o.bins_out);
  }
  const json j = rep;
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(j, o.out);
  }
  return 0;
}

/// Categorical label per sample used to color plots.
std::pair<std::string, std::vector<std::string>> plot_labels(const PointCloud& pc) {
  const auto n = static_cast<std::size_t>(pc.size());
  std::vector<std::string> labels(n);
  auto quantile_bins = [&](const Vector& x, int bins) {
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] < x[b]; });
    for (std::size_t r = 0; r < n; ++r)
      labels[static_cast<std::size_t>(order[r])] = "bin" + std::to_string(r * static_cast<std::size_t>(bins) / n);
  };
  if (pc.spec.name == "sphere") {
    const Vector lon = pc.truth_column("longitude");
    for (std::size_t i = 0; i < n; ++i) labels[i] = lon[static_cast<Index>(i)] >= 0.0 ? "east" : "west";
    return {"hemisphere", labels};
  }
  if (pc.spec.name == "scurve") {
    quantile_bins(pc.truth_column("s"), 10);
    return {"s_bin", labels};
  }
  if (pc.truth && pc.truth->cols() > 0) {
    quantile_bins(pc.truth->col(0), 10);
    return {pc.truth_names.front() + "_bin", labels};
  }
  return {"label", std::vector<std::string>(n, "all")};
}

int cmd_export_plot(CLI::App& sub, const Options& o) {
  if (o.in.empty() || o.embedding.empty() || o.out.empty())
    throw ParameterError("export-plot: --in, --embedding and --out are required");
  const PointCloud pc = load_dataset(o.in);
  const Embedded e = load_embedding(o.embedding);
  for (const auto& c : e.columns)
    if (c.size() != pc.size()) throw ParameterError("export-plot: embedding and dataset differ in length");
  bool enabled = false;
  const double margin = resolve_margin(sub, o, e, enabled);
  Vector dist;
  if (enabled) dist = boundary_distance(pc);
  const auto [label_name, labels] = plot_labels(pc);

  std::ofstream out(o.out);
  if (!out) throw IoError("cannot open '" + o.out + "' for writing");
  for (std::size_t c = 0; c < e.labels.size(); ++c) out << (c ? "," : "") << e.labels[c];
  for (const auto& name : pc.truth_names) out << ',' << kTruthPrefix << name;
  out << ',' << label_name;
  if (enabled) out << ",interior";
  out << '\n';
  for (Index i = 0; i < pc.size(); ++i) {
    for (std::size_t c = 0; c < e.columns.size(); ++c) out << (c ? "," : "") << detail::format_double(e.columns[c][i]);
    if (pc.truth)
      for (Index c = 0; c < pc.truth->cols(); ++c) out << ',' << detail::format_double((*pc.truth)(i, c));
    out << ',' << labels[static_cast<std::size_t>(i)];
    if (enabled) out << ',' << (dist[i] > margin ? 1 : 0);
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + o.out + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold Deflation spectral embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "RunConfig JSON; command-line flags override it")->check(CLI::ExistingFile);
  app.add_option("--threads", o.threads, "Worker threads for graph and vector-field construction")
      ->check(CLI::Range(1u, 1024u));

  auto* gen = app.add_subcommand("generate", "Sample a synthetic manifold to CSV");
  gen->add_option("--dataset", o.dataset, "scurve | sphere | box")
      ->check(CLI::IsMember({"scurve", "sphere", "box"}));
  gen->add_option("--n", o.n, "Number of samples drawn (before hole rejection)");
  gen->add_option("--seed", o.seed, "Random seed");
  gen->add_option("--noise", o.noise, "S-curve noise cube half-width");
  gen->add_option("--hole", o.hole, "S-curve hole: default | none | s_lo,s_hi,w_lo,w_hi");
  gen->add_option("--lengths", o.lengths, "Box side lengths a,b,c");
  gen->add_option("--stretch-ns", o.stretch_ns, "Sphere z-axis stretch");
  gen->add_option("--stretch-ew", o.stretch_ew, "Sphere x-axis stretch");
  gen->add_option("--out", o.out, "Output CSV (a .json sidecar is written next to it)");

  auto* emb = app.add_subcommand("embed", "Embed a point cloud");
  emb->add_option("--in", o.in, "Point cloud CSV");
  emb->add_option("--out", o.out, "Embedding CSV (a .json sidecar is written next to it)");
  emb->add_option("--method", o.method, "deflation | baseline")->check(CLI::IsMember({"deflation", "baseline"}));
  emb->add_option("--m", o.m, "Embedding dimension")->check(CLI::PositiveNumber);
  emb->add_option("--lambda", o.lambda, "Penalty weight (>= 0)");
  emb->add_option("--preset", o.preset, "auto | synthetic | high-dim");
  emb->add_option("--refinement", o.refinement, "none | project-rescale | row-normalize");
  emb->add_option("--include-self", o.include_self, "Include each node in its own neighborhood (true/false)");
  emb->add_option("--orthogonalize", o.orthogonalize, "Constrain coordinates orthogonal to earlier ones");
  emb->add_flag("--vfi", o.vfi, "Add vector-field-inversion columns vfi_1..vfi_m");
  emb->add_option("--alpha", o.alpha, "VFI ridge (> 0); default scales with the operator");
  emb->add_option("--graph", o.graph_kind, "knn | epsilon");
  emb->add_option("--k", o.k, "Neighbors per point");
  emb->add_option("--radius", o.radius, "Epsilon-graph radius");
  emb->add_option("--bandwidth-multiplier", o.multiplier, "Gaussian bandwidth / mean neighbor distance");
  emb->add_option("--tol", o.tol, "Eigensolver residual tolerance");
  emb->add_option("--max-iter", o.max_iter, "Eigensolver iteration cap");
  emb->add_option("--solver-seed", o.solver_seed, "Eigensolver start-vector seed");
  emb->add_option("--edges", o.edges, "Write the weighted edge list here");
  emb->add_option("--fields", o.fields, "Write vector-field triplets to <prefix>_<k>.csv");

  auto* eval = app.add_subcommand("evaluate", "Score an embedding against ground truth");
  auto* plot = app.add_subcommand("export-plot", "Join embedding, truth and labels into one CSV");
  for (auto* sub : {eval, plot}) {
    sub->add_option("--in", o.in, "Point cloud CSV with truth_ columns");
    sub->add_option("--embedding", o.embedding, "Embedding CSV");
    sub->add_option("--out", o.out, sub == eval ? "Metric JSON (stdout when omitted)" : "Plot CSV");
    sub->add_option("--margin", o.margin, "Only use samples farther than this from the boundary");
    sub->add_flag("--interior", o.interior, "Boundary margin of one graph bandwidth");
  }
  eval->add_option("--width-bins", o.width_bins, "Quantile bins for width uniformity (>= 5)");
  eval->add_option("--bins-out", o.bins_out, "Per-bin width CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitParameter;
  }

  try {
    if (*gen) return cmd_generate(*gen, o);
    if (*emb) return cmd_embed(*emb, o);
    if (*eval) return cmd_evaluate(*eval, o);
    if (*plot) return cmd_export_plot(*plot, o);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParameter;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParameter;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitParameter;
}
