#pragma once

#include "mdeflate/datasets.hpp"
#include "mdeflate/deflation.hpp"
#include "mdeflate/evaluation.hpp"
#include "mdeflate/graph.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mdeflate {

inline constexpr Index kDefaultNeighbors = 15;
/// Ambient dimension above which the high-dimensional preset applies.
inline constexpr Index kHighDimThreshold = 10;

struct GraphConfig {
  std::string kind = "knn";  // "knn" or "epsilon"
  Index k = kDefaultNeighbors;
  double radius = 0.0;
  double bandwidth_multiplier = kDefaultBandwidthMultiplier;

  bool operator==(const GraphConfig&) const = default;
};

struct MethodConfig {
  std::string name = "deflation";  // "deflation" or "baseline"
  Index m = 2;
  /// "auto", "synthetic" or "high-dim"; fills lambda and refinement when unset.
  std::string preset = "auto";
  std::optional<double> lambda;
  std::optional<std::string> refinement;
  bool include_self = true;
  bool orthogonalize = true;
  bool vfi = false;
  std::optional<double> alpha;

  bool operator==(const MethodConfig&) const = default;
};

struct OutputConfig {
  std::string input;      // point cloud CSV; empty means regenerate from the dataset spec
  std::string embedding;  // embedding CSV; sidecar is <embedding>.json
  std::string edges;      // optional edge-list dump
  std::string fields;     // optional vector-field triplet dump prefix

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  DatasetSpec dataset;
  GraphConfig graph;
  MethodConfig method;
  EigenOptions solver;
  OutputConfig output;
};

inline bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.dataset == b.dataset && a.graph == b.graph && a.method == b.method && a.solver == b.solver &&
         a.output == b.output;
}

// JSON. Unknown keys are rejected at every level.

inline void to_json(nlohmann::json& j, const GraphConfig& g) {
  j = {{"kind", g.kind}, {"k", g.k}, {"radius", g.radius}, {"bandwidth_multiplier", g.bandwidth_multiplier},
       {"kernel", "exp(-d^2/sigma^2)"}, {"symmetrization", "union"}};
}

inline void from_json(const nlohmann::json& j, GraphConfig& g) {
  reject_unknown_keys(j, {"kind", "k", "radius", "bandwidth_multiplier", "kernel", "symmetrization"}, "graph");
  g = GraphConfig{};
  g.kind = j.value("kind", g.kind);
  g.k = j.value("k", g.k);
  g.radius = j.value("radius", g.radius);
  g.bandwidth_multiplier = j.value("bandwidth_multiplier", g.bandwidth_multiplier);
}

inline void to_json(nlohmann::json& j, const MethodConfig& m) {
  j = {{"name", m.name},
       {"m", m.m},
       {"preset", m.preset},
       {"lambda", m.lambda ? nlohmann::json(*m.lambda) : nlohmann::json(nullptr)},
       {"refinement", m.refinement ? nlohmann::json(*m.refinement) : nlohmann::json(nullptr)},
       {"include_self", m.include_self},
       {"orthogonalize", m.orthogonalize},
       {"vfi", m.vfi},
       {"alpha", m.alpha ? nlohmann::json(*m.alpha) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, MethodConfig& m) {
  reject_unknown_keys(j, {"name", "m", "preset", "lambda", "refinement", "include_self", "orthogonalize", "vfi", "alpha"},
                      "method");
  m = MethodConfig{};
  m.name = j.value("name", m.name);
  m.m = j.value("m", m.m);
  m.preset = j.value("preset", m.preset);
  if (j.contains("lambda") && !j["lambda"].is_null()) m.lambda = j["lambda"].get<double>();
  if (j.contains("refinement") && !j["refinement"].is_null()) m.refinement = j["refinement"].get<std::string>();
  m.include_self = j.value("include_self", m.include_self);
  m.orthogonalize = j.value("orthogonalize", m.orthogonalize);
  m.vfi = j.value("vfi", m.vfi);
  if (j.contains("alpha") && !j["alpha"].is_null()) m.alpha = j["alpha"].get<double>();
}

inline void to_json(nlohmann::json& j, const EigenOptions& s) { j = solver_json(s); }

inline void from_json(const nlohmann::json& j, EigenOptions& s) {
  reject_unknown_keys(j, {"tol", "max_iter", "seed", "block_extra"}, "solver");
  s = EigenOptions{};
  s.tol = j.value("tol", s.tol);
  s.max_iter = j.value("max_iter", s.max_iter);
  s.seed = j.value("seed", s.seed);
  s.block_extra = j.value("block_extra", s.block_extra);
}

inline void to_json(nlohmann::json& j, const OutputConfig& o) {
  j = {{"input", o.input}, {"embedding", o.embedding}, {"edges", o.edges}, {"fields", o.fields}};
}

inline void from_json(const nlohmann::json& j, OutputConfig& o) {
  reject_unknown_keys(j, {"input", "embedding", "edges", "fields"}, "output");
  o = OutputConfig{};
  o.input = j.value("input", o.input);
  o.embedding = j.value("embedding", o.embedding);
  o.edges = j.value("edges", o.edges);
  o.fields = j.value("fields", o.fields);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"dataset", c.dataset}, {"graph", c.graph}, {"method", c.method}, {"solver", c.solver}, {"output", c.output}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  reject_unknown_keys(j, {"dataset", "graph", "method", "solver", "output"}, "config");
  c = RunConfig{};
  if (j.contains("dataset")) c.dataset = j["dataset"].get<DatasetSpec>();
  if (j.contains("graph")) c.graph = j["graph"].get<GraphConfig>();
  if (j.contains("method")) c.method = j["method"].get<MethodConfig>();
  if (j.contains("solver")) c.solver = j["solver"].get<EigenOptions>();
  if (j.contains("output")) c.output = j["output"].get<OutputConfig>();
}

/// Config from JSON text; type mismatches surface as ParameterError.
inline RunConfig parse_config(const nlohmann::json& j) {
  try {
    return j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
}

/// Fills preset-dependent fields (lambda, refinement) for data of ambient
/// dimension `dim`, so the emitted config is explicit.
inline MethodConfig resolve_method(MethodConfig m, Index dim) {
  std::string preset = m.preset;
  if (preset == "auto") preset = dim > kHighDimThreshold ? "high-dim" : "synthetic";
  if (preset != "synthetic" && preset != "high-dim")
    throw ParameterError("unknown preset '" + m.preset + "' (expected auto, synthetic, high-dim)");
  if (!m.lambda) m.lambda = preset == "high-dim" ? kDefaultLambdaHighDim : kDefaultLambdaSynthetic;
  if (!m.refinement) m.refinement = preset == "high-dim" ? "row-normalize" : "project-rescale";
  refinement_from_string(*m.refinement);
  m.preset = preset;
  return m;
}

inline NeighborGraph build_graph(const PointCloud& pc, const GraphConfig& g, unsigned threads = 1) {
  NeighborGraph raw;
  if (g.kind == "knn") {
    raw = knn_graph(pc, g.k, threads);
  } else if (g.kind == "epsilon") {
    raw = epsilon_graph(pc, g.radius, threads);
  } else {
    throw ParameterError("unknown graph kind '" + g.kind + "' (expected knn, epsilon)");
  }
  return gaussian_weights(raw, g.bandwidth_multiplier);
}

inline PointCloud load_input(const RunConfig& cfg) {
  PointCloud pc = cfg.output.input.empty() ? generate(cfg.dataset) : load_csv(cfg.output.input);
  pc.validate();
  if (!cfg.output.input.empty() && cfg.dataset.name != "csv") pc.spec = cfg.dataset;
  return pc;
}

struct RunResult {
  Embedding embedding;
  NeighborGraph graph;
  std::vector<std::pair<std::string, Vector>> extra;  // VFI columns
  std::vector<double> vfi_alpha;
  RunConfig config;                                   // resolved
};

/// Graph, Laplacian, embedding and optional VFI for one configuration.
inline RunResult run_embedding(const PointCloud& pc, RunConfig cfg, unsigned threads = 1) {
  if (cfg.method.m < 1) throw ParameterError("method.m must be >= 1");
  if (cfg.method.name != "deflation" && cfg.method.name != "baseline")
    throw ParameterError("unknown method '" + cfg.method.name + "' (expected deflation, baseline)");
  cfg.method = resolve_method(cfg.method, pc.dim());

  RunResult out;
  out.graph = build_graph(pc, cfg.graph, threads);
  const SparseSymmetric l = laplacian(out.graph);
  const Refinement refinement = refinement_from_string(*cfg.method.refinement);
  if (cfg.method.name == "baseline") {
    out.embedding = baseline_le(l, cfg.method.m, cfg.solver);
  } else {
    DeflationOptions opt;
    opt.lambda = *cfg.method.lambda;
    opt.refinement = refinement;
    opt.include_self = cfg.method.include_self;
    opt.orthogonalize = cfg.method.orthogonalize;
    opt.solver = cfg.solver;
    opt.threads = threads;
    out.embedding = deflate_embed(l, pc, out.graph, cfg.method.m, opt);
  }
  if (cfg.method.vfi) {
    VfiOptions vopt;
    vopt.alpha = cfg.method.alpha;
    for (std::size_t k = 0; k < out.embedding.coords.size(); ++k) {
      const Vector& phi = out.embedding.coords[k];
      const VectorFieldOperator v = k < out.embedding.fields.size()
                                        ? out.embedding.fields[k]
                                        : estimate_field(phi, pc, out.graph, refinement, cfg.method.include_self, threads);
      VfiResult r = vfi_debias(phi, v, pc, out.graph, vopt);
      out.extra.emplace_back("vfi_" + std::to_string(k + 1), std::move(r.coord));
      out.vfi_alpha.push_back(r.alpha);
    }
  }
  out.config = std::move(cfg);
  return out;
}

/// Sidecar for an embedding run: solver diagnostics plus the resolved config.
inline nlohmann::json run_sidecar(const RunResult& r) {
  nlohmann::json j = embedding_sidecar(r.embedding);
  j["run"] = r.config;
  j["graph_bandwidth"] = r.graph.bandwidth;
  j["graph_mean_neighbor_distance"] = r.graph.mean_neighbor_distance;
  j["graph_edges"] = r.graph.edge_count();
  if (!r.vfi_alpha.empty()) {
    j["vfi"] = {{"kernel", "gaussian, graph bandwidth"},
                {"alpha", r.vfi_alpha},
                {"centering", "mean"}};
  }
  return j;
}

}  // namespace mdeflate
