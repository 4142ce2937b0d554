#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regdiff/engine.hpp"
#include "regdiff/errors.hpp"
#include "regdiff/regularizer.hpp"
#include "regdiff/risk.hpp"
#include "regdiff/rng.hpp"
#include "regdiff/topology.hpp"

namespace regdiff {

using json = nlohmann::json;

/// Parsed experiment description. The resolved JSON is kept verbatim so that
/// the echo file reproduces the run bit-for-bit.
struct ExperimentConfig {
  json raw;

  // network
  std::size_t n_agents = 1;
  std::string topology = "complete";  // complete | ring | edges
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  WeightingRule rule = WeightingRule::kUniformAveraging;
  std::optional<Matrix> explicit_weights;

  // shared data model
  std::size_t dim = 1;
  std::size_t template_ones = 0;
  std::size_t test_set_size = 0;
  double test_sigma = 0.5;

  struct AgentCfg {
    AgentClass cls = AgentClass::kCustom;
    std::string risk_kind = "zero";  // zero | quadratic | logistic_l2
    std::vector<Vector> hessian;
    Vector b;
    std::string noise_mode = "synthetic";  // synthetic | streaming
    double synth_sigma = 0.0;
    double rho2 = 0.0;
    double sigma_v = 0.5;
    std::size_t eval_set_size = 100000;
    std::string reg_kind = "zero";  // zero | l1 | group_l1 | indicator_box | indicator_ball
    double rho1 = 0.0;
    std::vector<std::size_t> mask_indices;
    double lo = 0.0, hi = 0.0, radius = 0.0;
  };
  std::vector<AgentCfg> agents;

  struct CurveCfg {
    std::string name = "default";
    Variant variant = Variant::kRegularizedDiffusion;
    bool cooperative = true;
    bool use_regularizers = true;
  };
  std::vector<CurveCfg> curves;

  // algorithm
  std::vector<double> mu_values;
  std::optional<double> delta;
  std::optional<double> kappa;
  std::size_t iterations = 100;
  std::size_t repetitions = 1;
  std::uint64_t seed = 1;

  // metrics
  double oracle_tol = 1e-10;
  double window_fraction = 0.2;
  std::size_t test_error_stride = 0;          // 0 = no test-error tracking
  std::string msd_target = "smoothed";        // smoothed | nonsmooth | origin

  std::string output_dir = "out";

  double resolve_delta(double mu) const {
    if (delta) return *delta;
    if (kappa) return delta_from_kappa(mu, *kappa);
    throw ValidationFailure("config must set algorithm.delta or algorithm.kappa");
  }
};

namespace detail {

inline Variant parse_variant(const std::string& s) {
  if (s == "regularized_diffusion") return Variant::kRegularizedDiffusion;
  if (s == "non_incremental") return Variant::kNonIncremental;
  if (s == "centralized_reference") return Variant::kCentralizedReference;
  throw ConfigParse("unknown variant: " + s);
}

inline AgentClass parse_agent_class(const std::string& s) {
  if (s == "fully_informed") return AgentClass::kFullyInformed;
  if (s == "data_informed") return AgentClass::kDataInformed;
  if (s == "structure_informed") return AgentClass::kStructureInformed;
  if (s == "custom") return AgentClass::kCustom;
  throw ConfigParse("unknown agent class: " + s);
}

inline WeightingRule parse_rule(const std::string& s) {
  if (s == "uniform") return WeightingRule::kUniformAveraging;
  if (s == "metropolis") return WeightingRule::kMetropolis;
  if (s == "explicit") return WeightingRule::kExplicitWeights;
  throw ConfigParse("unknown weighting rule: " + s);
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  c.raw = j;
  try {
    const json& net = j.at("network");
    c.n_agents = net.at("n_agents").get<std::size_t>();
    c.topology = net.value("topology", std::string("complete"));
    if (net.contains("edges"))
      for (const auto& e : net["edges"])
        c.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    c.rule = detail::parse_rule(net.value("rule", std::string("uniform")));
    if (net.contains("weights")) {
      Matrix m(c.n_agents, c.n_agents);
      const auto& rows = net["weights"];
      for (std::size_t r = 0; r < c.n_agents; ++r)
        for (std::size_t col = 0; col < c.n_agents; ++col)
          m(r, col) = rows.at(r).at(col).get<double>();
      c.explicit_weights = std::move(m);
    }

    if (j.contains("data")) {
      const json& d = j["data"];
      c.dim = d.value("dim", std::size_t(1));
      c.template_ones = d.value("template_ones", std::size_t(0));
      c.test_set_size = d.value("test_set_size", std::size_t(0));
      c.test_sigma = d.value("test_sigma", 0.5);
    }

    for (const auto& a : j.at("agents")) {
      ExperimentConfig::AgentCfg ac;
      ac.cls = detail::parse_agent_class(a.value("class", std::string("custom")));
      if (a.contains("risk")) {
        const json& r = a["risk"];
        ac.risk_kind = r.value("kind", std::string("zero"));
        if (r.contains("hessian"))
          for (const auto& row : r["hessian"]) ac.hessian.push_back(row.get<Vector>());
        if (r.contains("b")) ac.b = r["b"].get<Vector>();
        ac.noise_mode = r.value("noise_mode", std::string("synthetic"));
        ac.synth_sigma = r.value("synth_sigma", 0.0);
        ac.rho2 = r.value("rho2", 0.0);
        ac.sigma_v = r.value("sigma_v", 0.5);
        ac.eval_set_size = r.value("eval_set_size", std::size_t(100000));
      }
      if (a.contains("regularizer")) {
        const json& r = a["regularizer"];
        ac.reg_kind = r.value("kind", std::string("zero"));
        ac.rho1 = r.value("rho1", 0.0);
        if (r.contains("mask"))
          for (const auto& i : r["mask"]) ac.mask_indices.push_back(i.get<std::size_t>());
        ac.lo = r.value("lo", 0.0);
        ac.hi = r.value("hi", 0.0);
        ac.radius = r.value("radius", 0.0);
      }
      c.agents.push_back(std::move(ac));
    }

    const json& alg = j.at("algorithm");
    if (alg.contains("mu_sweep"))
      c.mu_values = alg["mu_sweep"].get<std::vector<double>>();
    else
      c.mu_values = {alg.at("mu").get<double>()};
    if (alg.contains("delta")) c.delta = alg["delta"].get<double>();
    if (alg.contains("kappa")) c.kappa = alg["kappa"].get<double>();
    c.iterations = alg.value("iterations", std::size_t(100));
    c.repetitions = alg.value("repetitions", std::size_t(1));
    c.seed = alg.value("seed", std::uint64_t(1));
    if (alg.contains("curves")) {
      for (const auto& cv : alg["curves"]) {
        ExperimentConfig::CurveCfg cc;
        cc.name = cv.value("name", std::string("curve"));
        cc.variant = detail::parse_variant(
            cv.value("variant", std::string("regularized_diffusion")));
        cc.cooperative = cv.value("cooperative", true);
        cc.use_regularizers = cv.value("use_regularizers", true);
        c.curves.push_back(cc);
      }
    } else {
      ExperimentConfig::CurveCfg cc;
      cc.variant = detail::parse_variant(
          alg.value("variant", std::string("regularized_diffusion")));
      c.curves.push_back(cc);
    }

    if (j.contains("metrics")) {
      const json& m = j["metrics"];
      c.oracle_tol = m.value("oracle_tol", 1e-10);
      c.window_fraction = m.value("window_fraction", 0.2);
      c.test_error_stride = m.value("test_error_stride", std::size_t(0));
      c.msd_target = m.value("msd_target", std::string("smoothed"));
    }
    c.output_dir = j.value("output_dir", std::string("out"));
  } catch (const json::exception& e) {
    throw ConfigParse(std::string("config parse error: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigParse("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigParse(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return parse_config(j);
}

/// Apply `key=value` overrides. Bare keys map onto well-known algorithm and
/// output fields; dotted keys address arbitrary paths.
inline json apply_overrides(json j, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    auto eq = ov.find('=');
    if (eq == std::string::npos) throw ConfigParse("override must be key=value: " + ov);
    std::string key = ov.substr(0, eq);
    std::string val = ov.substr(eq + 1);
    static const std::vector<std::string> algorithm_keys = {
        "mu", "delta", "kappa", "iterations", "repetitions", "seed", "variant"};
    std::string path;
    if (key.find('.') != std::string::npos) {
      path = "/" + key;
      for (auto& ch : path)
        if (ch == '.') ch = '/';
    } else if (std::find(algorithm_keys.begin(), algorithm_keys.end(), key) !=
               algorithm_keys.end()) {
      path = "/algorithm/" + key;
    } else if (key == "output_dir") {
      path = "/output_dir";
    } else {
      throw ConfigParse("unknown override key: " + key);
    }
    json parsed;
    try {
      parsed = json::parse(val);
    } catch (const json::exception&) {
      parsed = val;  // fall back to string
    }
    j[json::json_pointer(path)] = parsed;
    if (path == "/algorithm/mu") j["algorithm"].erase("mu_sweep");
  }
  return j;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.agents.size() != c.n_agents)
    throw ValidationFailure("agents: roster size must equal network.n_agents");
  for (const auto& a : c.agents) {
    if (a.risk_kind == "quadratic") {
      if (a.hessian.size() != c.dim || a.b.size() != c.dim)
        throw ValidationFailure("risk.hessian/b: dimensions inconsistent with data.dim");
    }
    for (std::size_t i : a.mask_indices)
      if (i >= c.dim) throw ValidationFailure("regularizer.mask: index out of range");
    if (a.cls == AgentClass::kStructureInformed && a.risk_kind != "zero")
      throw ValidationFailure("class: structure_informed agents must have zero risk");
    if (a.cls == AgentClass::kDataInformed && a.reg_kind != "zero")
      throw ValidationFailure("class: data_informed agents must have zero regularizer");
  }
  if (c.kappa && !(*c.kappa > 0.25 && *c.kappa < 0.5))
    throw ValidationFailure("algorithm.kappa must lie in (1/4, 1/2)");
  for (double mu : c.mu_values) {
    if (mu <= 0.0) throw ValidationFailure("algorithm.mu must be positive");
    const double d = c.resolve_delta(mu);
    if (mu > 2.0 * d + 1e-15)
      throw ValidationFailure("algorithm.mu: mu <= 2*delta violated after resolution");
  }
  if (c.window_fraction <= 0.0 || c.window_fraction >= 1.0)
    throw ValidationFailure("metrics.window_fraction must lie in (0, 1)");
}

/// Materialized experiment pieces shared by runs, sweeps, and verifications.
struct BuiltExperiment {
  Graph graph;
  CombinationMatrix A;
  PerronVector p;
  std::vector<AgentSpec> agents;
  std::vector<Sample> test_set;
  Vector template_vec;
};

inline Graph build_graph(const ExperimentConfig& c) {
  if (c.topology == "complete") return Graph::complete(c.n_agents);
  if (c.topology == "ring") return Graph::ring_with_self_loops(c.n_agents);
  if (c.topology == "edges") {
    Graph g;
    g.n_agents = c.n_agents;
    for (auto [from, to] : c.edges) g.add_edge(from, to);
    return g;
  }
  throw ConfigParse("unknown topology: " + c.topology);
}

inline BuiltExperiment build_experiment(const ExperimentConfig& c) {
  validate_config(c);
  BuiltExperiment b;
  b.graph = build_graph(c);
  b.A = build_matrix(b.graph, c.rule,
                     c.explicit_weights ? &*c.explicit_weights : nullptr);
  b.p = perron_vector(b.A);

  b.template_vec.assign(c.dim, 0.0);
  for (std::size_t i = 0; i < std::min(c.template_ones, c.dim); ++i)
    b.template_vec[i] = 1.0;

  SubstreamRng rng(c.seed);
  for (std::size_t k = 0; k < c.agents.size(); ++k) {
    const auto& ac = c.agents[k];
    AgentSpec spec;
    spec.cls = ac.cls;
    if (ac.risk_kind == "zero") {
      spec.risk = SmoothRisk::zero(c.dim);
    } else if (ac.risk_kind == "quadratic") {
      Matrix H(c.dim, c.dim);
      for (std::size_t r = 0; r < c.dim; ++r)
        for (std::size_t col = 0; col < c.dim; ++col) H(r, col) = ac.hessian[r][col];
      spec.risk = SmoothRisk::quadratic(
          std::move(H), ac.b,
          ac.noise_mode == "streaming" ? NoiseMode::kStreaming
                                       : NoiseMode::kSyntheticGaussian,
          ac.synth_sigma);
    } else if (ac.risk_kind == "logistic_l2") {
      DataModel model{b.template_vec, ac.sigma_v};
      auto g = rng.setup_stream(10 + k);
      spec.risk = SmoothRisk::logistic_l2(ac.rho2, std::move(model), g, ac.eval_set_size);
    } else {
      throw ConfigParse("unknown risk kind: " + ac.risk_kind);
    }

    if (ac.reg_kind == "zero") {
      spec.regularizer = Regularizer::zero();
    } else if (ac.reg_kind == "l1") {
      spec.regularizer = Regularizer::l1(ac.rho1);
    } else if (ac.reg_kind == "group_l1") {
      std::vector<std::uint8_t> mask(c.dim, 0);
      for (std::size_t i : ac.mask_indices) mask[i] = 1;
      spec.regularizer = Regularizer::group_l1(ac.rho1, std::move(mask));
    } else if (ac.reg_kind == "indicator_box") {
      spec.regularizer = Regularizer::indicator_box(ac.lo, ac.hi);
    } else if (ac.reg_kind == "indicator_ball") {
      spec.regularizer = Regularizer::indicator_ball(ac.radius);
    } else {
      throw ConfigParse("unknown regularizer kind: " + ac.reg_kind);
    }
    b.agents.push_back(std::move(spec));
  }

  if (c.test_set_size > 0) {
    DataModel test_model{b.template_vec, c.test_sigma};
    auto g = rng.setup_stream(1);
    for (std::size_t i = 0; i < c.test_set_size; ++i)
      b.test_set.push_back(test_model.draw(g));
  }
  return b;
}

}  // namespace regdiff
