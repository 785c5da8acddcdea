#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "combot/evolve.hpp"
#include "combot/objective.hpp"
#include "combot/problem.hpp"

namespace combot {

// Sorted-key json type, so every serialization is canonical.
using Json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A complete run description: the physical problem, how candidates are
// scored, how the search runs, and where results go.
struct RunConfig {
  SynthesisProblem problem;
  ObjectiveParams objective;
  EaParams ea;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int workers = 1;
  std::string out_dir = "runs/out";

  // Kept for serialization; the problem itself stores derived state.
  std::array<double, 2> element_dims{1.0, 1.0};
  Vec3 wander_range{1.75, 1.75, 1.75};
  double wander_step = 0.25;
  std::string material_preset;  // empty = explicit material values
};

// Printable filament stock measured in-house; Young's modulus in N/mm^2.
// The BASF samples scattered between 470 and 554 depending on print
// orientation, listed here at the weak end.
inline const std::map<std::string, Material>& material_presets() {
  static const std::map<std::string, Material> presets{
      {"ultimaker_abs", Material{2070.0, 0.35}},
      {"ultimaker_pp", Material{305.0, 0.35}},
      {"basf_pp", Material{470.0, 0.35}},
  };
  return presets;
}

namespace detail {

inline void expect_keys(const Json& obj, const std::string& where,
                        const std::set<std::string>& allowed) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
}

inline double get_number(const Json& obj, const std::string& where, const std::string& key,
                         double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return obj[key].get<double>();
}

inline int get_int(const Json& obj, const std::string& where, const std::string& key,
                   int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(where + "." + key + ": expected an integer");
  return obj[key].get<int>();
}

inline bool get_bool(const Json& obj, const std::string& where, const std::string& key,
                     bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
  return obj[key].get<bool>();
}

inline Vec3 get_vec3(const Json& obj, const std::string& where, const std::string& key,
                     const Vec3& fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj[key];
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number())
    throw ConfigError(where + "." + key + ": expected an array of 3 numbers");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

inline Json vec3_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }

// Directions are stored normalized. A vector that is already unit to within
// rounding is returned bit-identical, so re-parsing a canonical dump never
// drifts by an ulp.
inline Vec3 unit_direction(const Vec3& v) {
  const double n2 = v.squared_norm();
  if (std::abs(n2 - 1.0) < 1e-12) return v;
  return normalized(v);
}

}  // namespace detail

// Baseline configuration for one of the canonical leg cases.
inline RunConfig default_config(int case_index) {
  RunConfig cfg;
  cfg.problem = make_case(case_index);
  cfg.out_dir = "runs/case" + std::to_string(case_index);
  return cfg;
}

// Parses and validates a configuration document. Every key is optional on
// top of the selected case preset (key "case", default 1); unknown keys and
// type mismatches are hard errors.
inline RunConfig parse_config(const Json& root) {
  using detail::expect_keys;
  using detail::get_bool;
  using detail::get_int;
  using detail::get_number;
  using detail::get_vec3;

  if (!root.is_object()) throw ConfigError("config: expected a JSON object");
  expect_keys(root, "config",
              {"case", "domain_size", "node_grid", "connectivity_degree", "input_node",
               "input_direction", "end_effector_node", "output_direction", "support_nodes",
               "d_in", "external_loads", "material", "material_preset", "element_dims",
               "wander", "cross_tol", "constraints", "weights", "objective_mode", "spring",
               "ea", "seeds", "workers", "out_dir"});

  const int case_index = get_int(root, "config", "case", 1);
  if (case_index < 1 || case_index > 3) throw ConfigError("config.case: must be 1, 2 or 3");
  RunConfig cfg = default_config(case_index);
  SynthesisProblem& p = cfg.problem;

  // Geometry of the design space. Changing any of these rebuilds the ground
  // structure below.
  DesignDomain domain = p.structure.domain;
  domain.size = get_vec3(root, "config", "domain_size", domain.size);
  if (root.contains("node_grid")) {
    const Json& g = root["node_grid"];
    if (!g.is_array() || g.size() != 3 || !g[0].is_number_integer() ||
        !g[1].is_number_integer() || !g[2].is_number_integer())
      throw ConfigError("config.node_grid: expected an array of 3 integers");
    domain.grid = {g[0].get<int>(), g[1].get<int>(), g[2].get<int>()};
  }
  domain.connectivity_degree =
      get_int(root, "config", "connectivity_degree", domain.connectivity_degree);

  if (root.contains("wander")) {
    const Json& w = root["wander"];
    if (!w.is_object()) throw ConfigError("config.wander: expected an object");
    expect_keys(w, "config.wander", {"range", "step", "fixed_anchors"});
    if (w.contains("range") && w["range"].is_number())
      cfg.wander_range = Vec3{w["range"].get<double>(), w["range"].get<double>(),
                              w["range"].get<double>()};
    else
      cfg.wander_range = get_vec3(w, "config.wander", "range", cfg.wander_range);
    cfg.wander_step = get_number(w, "config.wander", "step", cfg.wander_step);
    p.fixed_anchors = get_bool(w, "config.wander", "fixed_anchors", p.fixed_anchors);
    if (cfg.wander_step < 0.0) throw ConfigError("config.wander.step: must be >= 0");
    if (cfg.wander_range.x < 0.0 || cfg.wander_range.y < 0.0 || cfg.wander_range.z < 0.0)
      throw ConfigError("config.wander.range: must be >= 0");
  }

  try {
    p.structure = build_ground_structure(domain, cfg.wander_range, cfg.wander_step);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const int n_nodes = static_cast<int>(p.structure.nodes.size());
  const auto check_node = [&](int id, const std::string& where) {
    if (id < 1 || id > n_nodes)
      throw ConfigError(where + ": node id " + std::to_string(id) + " outside 1.." +
                        std::to_string(n_nodes));
  };

  p.input_node = get_int(root, "config", "input_node", p.input_node);
  check_node(p.input_node, "config.input_node");
  p.end_effector_node = get_int(root, "config", "end_effector_node", p.end_effector_node);
  check_node(p.end_effector_node, "config.end_effector_node");
  if (p.end_effector_node == p.input_node)
    throw ConfigError("config.end_effector_node: must differ from the input node");

  if (root.contains("support_nodes")) {
    const Json& s = root["support_nodes"];
    if (!s.is_array() || s.empty()) throw ConfigError("config.support_nodes: expected a non-empty array");
    p.support_nodes.clear();
    for (const Json& v : s) {
      if (!v.is_number_integer()) throw ConfigError("config.support_nodes: expected integers");
      p.support_nodes.push_back(v.get<int>());
    }
  }
  for (int s : p.support_nodes) {
    check_node(s, "config.support_nodes");
    if (s == p.input_node)
      throw ConfigError("config.support_nodes: the input node cannot be a support");
  }

  const Vec3 in_dir = get_vec3(root, "config", "input_direction", p.input_direction);
  if (!(in_dir.norm() > 0.0)) throw ConfigError("config.input_direction: must be nonzero");
  p.input_direction = detail::unit_direction(in_dir);
  const Vec3 out_dir = get_vec3(root, "config", "output_direction", p.output_direction);
  if (!(out_dir.norm() > 0.0)) throw ConfigError("config.output_direction: must be nonzero");
  p.output_direction = detail::unit_direction(out_dir);

  p.d_in = get_number(root, "config", "d_in", p.d_in);
  if (!(p.d_in > 0.0)) throw ConfigError("config.d_in: must be > 0");

  if (root.contains("external_loads")) {
    const Json& loads = root["external_loads"];
    if (!loads.is_array()) throw ConfigError("config.external_loads: expected an array");
    p.external_loads.clear();
    for (const Json& l : loads) {
      if (!l.is_object()) throw ConfigError("config.external_loads: expected objects");
      expect_keys(l, "config.external_loads[]", {"node", "force"});
      NodalLoad nl;
      nl.node = get_int(l, "config.external_loads[]", "node", 0);
      check_node(nl.node, "config.external_loads[].node");
      nl.force = get_vec3(l, "config.external_loads[]", "force", {0, 0, 0});
      p.external_loads.push_back(nl);
    }
  }

  if (root.contains("material_preset")) {
    if (root.contains("material"))
      throw ConfigError("config: material and material_preset are mutually exclusive");
    if (!root["material_preset"].is_string())
      throw ConfigError("config.material_preset: expected a string");
    cfg.material_preset = root["material_preset"].get<std::string>();
    const auto it = material_presets().find(cfg.material_preset);
    if (it == material_presets().end()) {
      std::string names;
      for (const auto& [name, mat] : material_presets()) names += " " + name;
      throw ConfigError("config.material_preset: unknown preset \"" + cfg.material_preset +
                        "\"; available:" + names);
    }
    p.material = it->second;
  } else if (root.contains("material")) {
    const Json& m = root["material"];
    if (!m.is_object()) throw ConfigError("config.material: expected an object");
    expect_keys(m, "config.material", {"youngs_modulus", "poisson_ratio"});
    p.material.youngs_modulus =
        get_number(m, "config.material", "youngs_modulus", p.material.youngs_modulus);
    p.material.poisson_ratio =
        get_number(m, "config.material", "poisson_ratio", p.material.poisson_ratio);
    if (!(p.material.youngs_modulus > 0.0))
      throw ConfigError("config.material.youngs_modulus: must be > 0");
    if (!(p.material.poisson_ratio > -1.0 && p.material.poisson_ratio < 0.5))
      throw ConfigError("config.material.poisson_ratio: must lie in (-1, 0.5)");
  }

  if (root.contains("element_dims")) {
    const Json& e = root["element_dims"];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw ConfigError("config.element_dims: expected an array of 2 numbers");
    cfg.element_dims = {e[0].get<double>(), e[1].get<double>()};
    if (!(cfg.element_dims[0] > 0.0 && cfg.element_dims[1] > 0.0))
      throw ConfigError("config.element_dims: must be > 0");
  }
  p.section.width = cfg.element_dims[0];
  p.section.height = cfg.element_dims[1];

  cfg.objective.cross_tol = get_number(root, "config", "cross_tol", cfg.objective.cross_tol);
  if (!(cfg.objective.cross_tol >= 0.0)) throw ConfigError("config.cross_tol: must be >= 0");

  if (root.contains("constraints")) {
    const Json& c = root["constraints"];
    if (!c.is_object()) throw ConfigError("config.constraints: expected an object");
    expect_keys(c, "config.constraints", {"l_des_tot", "d_out_des"});
    p.l_des_tot = get_number(c, "config.constraints", "l_des_tot", p.l_des_tot);
    p.d_out_des = get_number(c, "config.constraints", "d_out_des", p.d_out_des);
    if (!(p.l_des_tot > 0.0)) throw ConfigError("config.constraints.l_des_tot: must be > 0");
    if (!(p.d_out_des >= 0.0)) throw ConfigError("config.constraints.d_out_des: must be >= 0");
  }

  if (root.contains("weights")) {
    const Json& w = root["weights"];
    if (!w.is_object()) throw ConfigError("config.weights: expected an object");
    expect_keys(w, "config.weights", {"w1", "w2", "w3", "w4"});
    cfg.objective.w1 = get_number(w, "config.weights", "w1", cfg.objective.w1);
    cfg.objective.w2 = get_number(w, "config.weights", "w2", cfg.objective.w2);
    cfg.objective.w3 = get_number(w, "config.weights", "w3", cfg.objective.w3);
    cfg.objective.w4 = get_number(w, "config.weights", "w4", cfg.objective.w4);
    for (double v : {cfg.objective.w1, cfg.objective.w2, cfg.objective.w3, cfg.objective.w4})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ConfigError("config.weights: must be finite and >= 0");
  }

  if (root.contains("objective_mode")) {
    if (!root["objective_mode"].is_string())
      throw ConfigError("config.objective_mode: expected a string");
    const std::string mode = root["objective_mode"].get<std::string>();
    if (mode == "ga")
      cfg.objective.spring_mode = false;
    else if (mode == "ga-ma")
      cfg.objective.spring_mode = true;
    else
      throw ConfigError("config.objective_mode: expected \"ga\" or \"ga-ma\"");
  }

  if (root.contains("spring")) {
    const Json& s = root["spring"];
    if (!s.is_object()) throw ConfigError("config.spring: expected an object");
    expect_keys(s, "config.spring", {"stiffness", "direction"});
    p.spring_stiffness = get_number(s, "config.spring", "stiffness", p.spring_stiffness);
    if (!(p.spring_stiffness > 0.0)) throw ConfigError("config.spring.stiffness: must be > 0");
    if (s.contains("direction")) {
      const Vec3 dir = get_vec3(s, "config.spring", "direction", p.output_direction);
      if (!(dir.norm() > 0.0)) throw ConfigError("config.spring.direction: must be nonzero");
      p.spring_direction = detail::unit_direction(dir);
    }
  }
  if (p.spring_direction == Vec3{} || !root.contains("spring") ||
      !root["spring"].contains("direction"))
    p.spring_direction = p.output_direction;

  if (root.contains("ea")) {
    const Json& e = root["ea"];
    if (!e.is_object()) throw ConfigError("config.ea: expected an object");
    expect_keys(e, "config.ea",
                {"population", "generations", "crossover_rate", "mutation_rate",
                 "mutation_scheme", "elite_count", "init_density", "max_retry_rounds",
                 "selection_shift"});
    cfg.ea.population = get_int(e, "config.ea", "population", cfg.ea.population);
    cfg.ea.generations = get_int(e, "config.ea", "generations", cfg.ea.generations);
    cfg.ea.crossover_rate = get_number(e, "config.ea", "crossover_rate", cfg.ea.crossover_rate);
    cfg.ea.mutation_rate = get_number(e, "config.ea", "mutation_rate", cfg.ea.mutation_rate);
    cfg.ea.elite_count = get_int(e, "config.ea", "elite_count", cfg.ea.elite_count);
    cfg.ea.init_density = get_number(e, "config.ea", "init_density", cfg.ea.init_density);
    cfg.ea.max_retry_rounds =
        get_int(e, "config.ea", "max_retry_rounds", cfg.ea.max_retry_rounds);
    cfg.ea.selection_shift =
        get_number(e, "config.ea", "selection_shift", cfg.ea.selection_shift);
    if (e.contains("mutation_scheme")) {
      if (!e["mutation_scheme"].is_string())
        throw ConfigError("config.ea.mutation_scheme: expected a string");
      const std::string scheme = e["mutation_scheme"].get<std::string>();
      if (scheme == "per_bit")
        cfg.ea.mutation_scheme = MutationScheme::per_bit;
      else if (scheme == "per_genome")
        cfg.ea.mutation_scheme = MutationScheme::per_genome;
      else
        throw ConfigError("config.ea.mutation_scheme: expected \"per_bit\" or \"per_genome\"");
    }
    if (cfg.ea.population < 2) throw ConfigError("config.ea.population: must be >= 2");
    if (cfg.ea.generations < 0) throw ConfigError("config.ea.generations: must be >= 0");
    if (!(cfg.ea.crossover_rate >= 0.0 && cfg.ea.crossover_rate <= 1.0))
      throw ConfigError("config.ea.crossover_rate: must lie in [0, 1]");
    if (!(cfg.ea.mutation_rate >= 0.0 && cfg.ea.mutation_rate <= 1.0))
      throw ConfigError("config.ea.mutation_rate: must lie in [0, 1]");
    if (cfg.ea.elite_count < 0 || cfg.ea.elite_count >= cfg.ea.population)
      throw ConfigError("config.ea.elite_count: must lie in [0, population)");
    if (!(cfg.ea.init_density >= 0.0 && cfg.ea.init_density <= 1.0))
      throw ConfigError("config.ea.init_density: must lie in [0, 1]");
    if (cfg.ea.max_retry_rounds < 0)
      throw ConfigError("config.ea.max_retry_rounds: must be >= 0");
    if (!(cfg.ea.selection_shift > 0.0))
      throw ConfigError("config.ea.selection_shift: must be > 0");
  }

  if (root.contains("seeds")) {
    const Json& s = root["seeds"];
    if (!s.is_array() || s.empty())
      throw ConfigError("config.seeds: expected a non-empty array of integers");
    cfg.seeds.clear();
    for (const Json& v : s) {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ConfigError("config.seeds: expected integers");
      const auto sv = v.get<std::int64_t>();
      if (sv < 0) throw ConfigError("config.seeds: must be >= 0");
      cfg.seeds.push_back(static_cast<std::uint64_t>(sv));
    }
  }

  cfg.workers = get_int(root, "config", "workers", cfg.workers);
  if (cfg.workers < 1) throw ConfigError("config.workers: must be >= 1");
  if (root.contains("out_dir")) {
    if (!root["out_dir"].is_string()) throw ConfigError("config.out_dir: expected a string");
    cfg.out_dir = root["out_dir"].get<std::string>();
  }

  return cfg;
}

// Canonical serialization: every effective setting, sorted keys, so equal
// configurations hash equal.
inline Json to_json(const RunConfig& cfg) {
  using detail::vec3_json;
  const SynthesisProblem& p = cfg.problem;

  Json root;
  root["domain_size"] = vec3_json(p.structure.domain.size);
  root["node_grid"] = Json::array({p.structure.domain.grid[0], p.structure.domain.grid[1],
                                   p.structure.domain.grid[2]});
  root["connectivity_degree"] = p.structure.domain.connectivity_degree;
  root["input_node"] = p.input_node;
  root["input_direction"] = vec3_json(p.input_direction);
  root["end_effector_node"] = p.end_effector_node;
  root["output_direction"] = vec3_json(p.output_direction);
  root["support_nodes"] = p.support_nodes;
  root["d_in"] = p.d_in;
  Json loads = Json::array();
  for (const NodalLoad& l : p.external_loads)
    loads.push_back(Json{{"node", l.node}, {"force", vec3_json(l.force)}});
  root["external_loads"] = loads;
  // Preset and explicit values are mutually exclusive on input, so emit only
  // whichever form this configuration used.
  if (!cfg.material_preset.empty())
    root["material_preset"] = cfg.material_preset;
  else
    root["material"] = Json{{"youngs_modulus", p.material.youngs_modulus},
                            {"poisson_ratio", p.material.poisson_ratio}};
  root["element_dims"] = Json::array({cfg.element_dims[0], cfg.element_dims[1]});
  root["wander"] = Json{{"range", vec3_json(cfg.wander_range)},
                        {"step", cfg.wander_step},
                        {"fixed_anchors", p.fixed_anchors}};
  root["cross_tol"] = cfg.objective.cross_tol;
  root["constraints"] = Json{{"l_des_tot", p.l_des_tot}, {"d_out_des", p.d_out_des}};
  root["weights"] = Json{{"w1", cfg.objective.w1},
                         {"w2", cfg.objective.w2},
                         {"w3", cfg.objective.w3},
                         {"w4", cfg.objective.w4}};
  root["objective_mode"] = cfg.objective.spring_mode ? "ga-ma" : "ga";
  root["spring"] =
      Json{{"stiffness", p.spring_stiffness}, {"direction", vec3_json(p.spring_dir())}};
  root["ea"] = Json{
      {"population", cfg.ea.population},
      {"generations", cfg.ea.generations},
      {"crossover_rate", cfg.ea.crossover_rate},
      {"mutation_rate", cfg.ea.mutation_rate},
      {"mutation_scheme",
       cfg.ea.mutation_scheme == MutationScheme::per_bit ? "per_bit" : "per_genome"},
      {"elite_count", cfg.ea.elite_count},
      {"init_density", cfg.ea.init_density},
      {"max_retry_rounds", cfg.ea.max_retry_rounds},
      {"selection_shift", cfg.ea.selection_shift},
  };
  root["seeds"] = cfg.seeds;
  root["workers"] = cfg.workers;
  root["out_dir"] = cfg.out_dir;
  return root;
}

// FNV-1a over the canonical dump of the result-determining settings. Where
// results land (out_dir) and how evaluation is parallelized (workers) do not
// change what is computed, so they stay out of the hash and reruns of a
// snapshot into a different directory hash identically.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  Json j = to_json(cfg);
  j.erase("out_dir");
  j.erase("workers");
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace combot
