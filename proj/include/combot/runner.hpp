#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "combot/config.hpp"
#include "combot/evolve.hpp"
#include "combot/objective.hpp"
#include "combot/stl_export.hpp"
#include "combot/svg.hpp"

namespace combot {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string hash_string(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

inline Json evaluation_json(const Evaluation& ev) {
  Json j;
  j["valid"] = ev.valid;
  j["reason"] = to_string(ev.reason);
  j["fitness"] = ev.fitness;
  j["active_elements"] = ev.active_elements;
  j["total_length"] = ev.total_length;
  j["crossings"] = ev.crossings;
  j["d_out"] = ev.d_out;
  j["geometric_advantage"] = ev.geometric_advantage;
  j["input_force_unloaded"] = ev.input_force_unloaded;
  j["d_out_external"] = ev.d_out_external;
  if (ev.spring) {
    const SpringMetrics& sm = *ev.spring;
    j["spring"] = Json{{"mechanical_advantage", sm.mechanical_advantage},
                       {"input_force", sm.input_force},
                       {"output_force", sm.output_force},
                       {"output_along_spring", sm.output_along_spring},
                       {"input_work", sm.input_work},
                       {"spring_work", sm.spring_work},
                       {"total_energy", sm.total_energy}};
  }
  return j;
}

// Node/element digest of one design. Deterministic: depends only on the
// configuration and genome, never on time or machine.
inline Json structure_json(const RunConfig& cfg, const std::optional<Phenotype>& ph,
                           std::uint64_t seed, const Evaluation& eval) {
  const SynthesisProblem& p = cfg.problem;
  Json j;
  j["config_hash"] = detail::hash_string(config_hash(cfg));
  j["seed"] = seed;
  j["valid"] = eval.valid;
  j["reason"] = to_string(eval.reason);
  j["input_node"] = p.input_node;
  j["end_effector_node"] = p.end_effector_node;
  j["support_nodes"] = p.support_nodes;

  std::vector<bool> used(p.structure.nodes.size(), false);
  Json elements = Json::array();
  double total = 0.0;
  if (ph) {
    for (const Element& el : ph->active) {
      used[el.node_a - 1] = used[el.node_b - 1] = true;
      const double len = (ph->positions[el.node_b - 1] - ph->positions[el.node_a - 1]).norm();
      total += len;
      elements.push_back(Json{{"id", el.id},
                              {"node_a", el.node_a},
                              {"node_b", el.node_b},
                              {"length", len}});
    }
  }
  Json nodes = Json::array();
  for (const NodeSpec& n : p.structure.nodes) {
    const Vec3 pos = ph ? ph->positions[n.id - 1] : n.base_position;
    nodes.push_back(Json{{"id", n.id},
                         {"position", Json::array({pos.x, pos.y, pos.z})},
                         {"anchored", p.is_anchor(n.id)},
                         {"used", static_cast<bool>(used[n.id - 1])}});
  }
  j["nodes"] = nodes;
  j["elements"] = elements;
  j["active_elements"] = elements.size();
  j["total_length"] = total;
  return j;
}

inline std::string convergence_csv(std::span<const GenerationStats> history) {
  std::ostringstream out;
  out << "generation,best,mean,valid_fraction\n";
  char row[128];
  for (const GenerationStats& g : history) {
    std::snprintf(row, sizeof(row), "%d,%.17g,%.17g,%.17g\n", g.generation, g.best_fitness,
                  g.mean_fitness, g.valid_fraction);
    out << row;
  }
  return out.str();
}

inline std::vector<GenerationStats> parse_convergence_csv(const std::string& text) {
  std::vector<GenerationStats> history;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    GenerationStats g;
    if (std::sscanf(line.c_str(), "%d,%lg,%lg,%lg", &g.generation, &g.best_fitness,
                    &g.mean_fitness, &g.valid_fraction) == 4)
      history.push_back(g);
  }
  return history;
}

// Everything the per-seed plots need, independent of whether it came from a
// live run or was re-read from a results directory.
struct PlotData {
  std::vector<GenerationStats> history;
  std::optional<double> ga;
  std::optional<double> ma;
  double d_in = 0.0;
  double input_force = 0.0;  // spring case, N
  std::vector<std::pair<double, double>> ga_ma_points;
};

inline void write_plots(const std::filesystem::path& plots_dir, const PlotData& data) {
  std::filesystem::create_directories(plots_dir);
  detail::write_file(plots_dir / "convergence.svg", plot_convergence(data.history));
  if (data.ga)
    detail::write_file(plots_dir / "transmission.svg",
                       plot_transmission(*data.ga, data.d_in, data.ma, data.input_force));
  if (!data.ga_ma_points.empty())
    detail::write_file(plots_dir / "scatter.svg", plot_ga_ma_scatter(data.ga_ma_points));
}

struct SeedReport {
  std::uint64_t seed = 0;
  Individual best;
  std::uint64_t evaluations = 0;
  std::filesystem::path dir;
};

struct RunReport {
  std::filesystem::path out_dir;
  std::vector<SeedReport> seeds;
};

// Executes a configuration end to end: one evolutionary run per seed, with
// the results, geometry and plots written under out_dir/seed_<n>/.
class Runner {
 public:
  explicit Runner(RunConfig cfg, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), evaluator_(cfg_.problem, cfg_.objective), log_(log) {}

  Runner(const Runner&) = delete;
  Runner& operator=(const Runner&) = delete;

  const Evaluator& evaluator() const { return evaluator_; }

  RunReport run() {
    namespace fs = std::filesystem;
    RunReport report;
    report.out_dir = cfg_.out_dir;
    fs::create_directories(report.out_dir);
    detail::write_file(report.out_dir / "config.json", to_json(cfg_).dump(2) + "\n");

    for (std::uint64_t seed : cfg_.seeds) report.seeds.push_back(run_seed(seed));
    return report;
  }

  SeedReport run_seed(std::uint64_t seed) {
    namespace fs = std::filesystem;
    SeedReport rep;
    rep.seed = seed;
    rep.dir = fs::path(cfg_.out_dir) / ("seed_" + std::to_string(seed));
    fs::create_directories(rep.dir);

    EaParams ea = cfg_.ea;
    ea.seed = seed;
    ea.workers = cfg_.workers;
    Evolver evolver(evaluator_, ea);

    const int log_every = std::max(1, ea.generations / 10);
    EaResult result = evolver.run([&](const GenerationStats& g, const std::vector<Individual>&) {
      if (log_ && (g.generation % log_every == 0 || g.generation == ea.generations))
        *log_ << "seed " << seed << ": generation " << g.generation << "/" << ea.generations
              << "  best " << g.best_fitness << "  valid " << g.valid_fraction * 100.0 << "%\n";
    });
    rep.best = result.best;
    rep.evaluations = result.evaluations;

    write_seed_outputs(rep, result);
    return rep;
  }

 private:
  void write_seed_outputs(const SeedReport& rep, const EaResult& result) {
    std::optional<Phenotype> ph;
    if (!rep.best.genome.empty())
      ph = decode_genome(cfg_.problem, evaluator_.layout(), rep.best.genome);

    // Force metrics for the best design and the scatter cloud are computed
    // here rather than during the search, so plain-GA runs stay cheap.
    Evaluation best_eval = rep.best.eval;
    if (best_eval.valid && !best_eval.spring)
      best_eval = evaluator_.evaluate(rep.best.genome, /*force_spring=*/true);

    detail::write_file(rep.dir / "structure.json",
                       structure_json(cfg_, ph, rep.seed, best_eval).dump(2) + "\n");
    detail::write_file(rep.dir / "convergence.csv", convergence_csv(result.history));

    Json metrics;
    metrics["config_hash"] = detail::hash_string(config_hash(cfg_));
    metrics["seed"] = rep.seed;
    metrics["evaluations"] = rep.evaluations;
    metrics["objective_mode"] = cfg_.objective.spring_mode ? "ga-ma" : "ga";
    metrics["d_in"] = cfg_.problem.d_in;
    Json best = evaluation_json(best_eval);
    best["genome"] = genome_to_string(rep.best.genome);
    metrics["best"] = best;

    if (best_eval.valid) {
      Json sens = Json::array();
      for (double factor : {0.1, 1.0, 10.0}) {
        SynthesisProblem scaled = cfg_.problem;
        scaled.spring_stiffness *= factor;
        const Evaluator ev(scaled, cfg_.objective);
        const Evaluation e = ev.evaluate(rep.best.genome, /*force_spring=*/true);
        sens.push_back(Json{{"stiffness", scaled.spring_stiffness},
                            {"mechanical_advantage",
                             e.valid && e.spring ? e.spring->mechanical_advantage : 0.0},
                            {"valid", e.valid}});
      }
      metrics["ma_sensitivity"] = sens;
    }

    PlotData plot;
    plot.history = result.history;
    plot.d_in = cfg_.problem.d_in;
    if (best_eval.valid) {
      plot.ga = best_eval.geometric_advantage;
      if (best_eval.spring) {
        plot.ma = best_eval.spring->mechanical_advantage;
        plot.input_force = best_eval.spring->input_force;
      }
    }

    Json population = Json::array();
    std::set<Genome> seen;
    for (const Individual& ind : result.final_population) {
      if (!seen.insert(ind.genome).second) continue;
      Json entry;
      entry["valid"] = ind.eval.valid;
      entry["reason"] = to_string(ind.eval.reason);
      entry["fitness"] = ind.eval.fitness;
      entry["geometric_advantage"] = ind.eval.geometric_advantage;
      entry["total_length"] = ind.eval.total_length;
      entry["crossings"] = ind.eval.crossings;
      if (ind.eval.valid) {
        double ma = 0.0;
        if (ind.eval.spring) {
          ma = ind.eval.spring->mechanical_advantage;
        } else {
          const Evaluation e = evaluator_.evaluate(ind.genome, /*force_spring=*/true);
          if (e.valid && e.spring) ma = e.spring->mechanical_advantage;
        }
        entry["mechanical_advantage"] = ma;
        if (ma != 0.0) plot.ga_ma_points.emplace_back(ind.eval.geometric_advantage, ma);
      }
      population.push_back(entry);
    }
    metrics["final_population"] = population;
    detail::write_file(rep.dir / "metrics.json", metrics.dump(2) + "\n");

    if (ph && best_eval.valid) {
      std::ofstream stl(rep.dir / "mesh.stl", std::ios::binary);
      if (!stl) throw IoError("cannot open " + (rep.dir / "mesh.stl").string());
      const auto tris = structure_mesh(ph->active, ph->positions, cfg_.problem.section);
      write_binary_stl(stl, tris);
    }

    write_plots(rep.dir / "plots", plot);
  }

  RunConfig cfg_;
  Evaluator evaluator_;
  std::ostream* log_;
};

// Rebuilds the plots of an existing seed directory from convergence.csv and
// metrics.json, for tweaking visuals without re-running the search.
inline void regenerate_plots(const std::filesystem::path& seed_dir) {
  std::ifstream csv(seed_dir / "convergence.csv", std::ios::binary);
  if (!csv) throw IoError("cannot read " + (seed_dir / "convergence.csv").string());
  std::stringstream csv_text;
  csv_text << csv.rdbuf();

  std::ifstream mj(seed_dir / "metrics.json", std::ios::binary);
  if (!mj) throw IoError("cannot read " + (seed_dir / "metrics.json").string());
  Json metrics;
  try {
    metrics = Json::parse(mj);
  } catch (const Json::parse_error& e) {
    throw IoError("metrics.json: " + std::string(e.what()));
  }

  PlotData plot;
  plot.history = parse_convergence_csv(csv_text.str());
  plot.d_in = metrics.value("d_in", 0.0);
  const Json best = metrics.value("best", Json::object());
  if (best.value("valid", false)) {
    plot.ga = best.value("geometric_advantage", 0.0);
    if (best.contains("spring")) {
      plot.ma = best["spring"].value("mechanical_advantage", 0.0);
      plot.input_force = best["spring"].value("input_force", 0.0);
    }
  }
  for (const Json& entry : metrics.value("final_population", Json::array()))
    if (entry.value("valid", false) && entry.contains("mechanical_advantage"))
      plot.ga_ma_points.emplace_back(entry.value("geometric_advantage", 0.0),
                                     entry.value("mechanical_advantage", 0.0));

  write_plots(seed_dir / "plots", plot);
}

}  // namespace combot
