// Command line front end: run the synthesis loop, evaluate or mesh a single
// genome, or rebuild the plots of a finished run.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 invalid structure,
// 4 I/O error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "combot/config.hpp"
#include "combot/runner.hpp"
#include "combot/stl_export.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInvalidStructure = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
  std::string config_path;
  int case_index = 0;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::string objective;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_run_overrides) {
  auto* config = cmd->add_option("-c,--config", opts.config_path,
                                 "Configuration file (JSON)")
                     ->check(CLI::ExistingFile);
  cmd->add_option("--case", opts.case_index, "Built-in case preset (1, 2 or 3)")
      ->check(CLI::Range(1, 3))
      ->excludes(config);
  cmd->add_option("--objective", opts.objective, "Objective mode: ga or ga-ma")
      ->check(CLI::IsMember({"ga", "ga-ma"}));
  if (with_run_overrides) {
    cmd->add_option("--seed", opts.seeds, "Seed(s) to run, overriding the config list");
    cmd->add_option("-o,--out", opts.out_dir, "Output directory, overriding the config");
    cmd->add_option("--workers", opts.workers, "Evaluation threads")->check(CLI::PositiveNumber);
  }
}

combot::RunConfig load_config(const CommonOptions& opts) {
  combot::RunConfig cfg;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path, std::ios::binary);
    if (!in) throw combot::IoError("cannot read " + opts.config_path);
    combot::Json doc;
    try {
      doc = combot::Json::parse(in);
    } catch (const combot::Json::parse_error& e) {
      throw combot::ConfigError(opts.config_path + ": " + e.what());
    }
    cfg = combot::parse_config(doc);
  } else {
    cfg = combot::default_config(opts.case_index == 0 ? 1 : opts.case_index);
  }
  if (!opts.objective.empty()) cfg.objective.spring_mode = opts.objective == "ga-ma";
  if (!opts.seeds.empty()) cfg.seeds = opts.seeds;
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.workers > 0) cfg.workers = opts.workers;
  return cfg;
}

// Accepts a 0/1 string directly, a text file of bits, or a metrics.json to
// pull the best genome from.
combot::Genome load_genome(const combot::GenomeLayout& layout, const std::string& inline_bits,
                           const std::string& file) {
  std::string bits = inline_bits;
  if (!file.empty()) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw combot::IoError("cannot read " + file);
    std::stringstream buf;
    buf << in.rdbuf();
    if (file.size() > 5 && file.substr(file.size() - 5) == ".json") {
      combot::Json doc;
      try {
        doc = combot::Json::parse(buf.str());
      } catch (const combot::Json::parse_error& e) {
        throw combot::IoError(file + ": " + e.what());
      }
      bits = doc.value("best", combot::Json::object()).value("genome", "");
      if (bits.empty()) bits = doc.value("genome", "");
    } else {
      bits = buf.str();
      while (!bits.empty() && (bits.back() == '\n' || bits.back() == '\r')) bits.pop_back();
    }
  }
  const auto genome = combot::genome_from_string(layout, bits);
  if (!genome)
    throw combot::ConfigError("genome must be a 0/1 string of length " +
                              std::to_string(layout.length) + " (got " +
                              std::to_string(bits.size()) + " characters)");
  return *genome;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesis toolkit for spatial compliant mechanism legs"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run the evolutionary synthesis for each seed");
  add_common(run_cmd, run_opts, /*with_run_overrides=*/true);

  CommonOptions eval_opts;
  std::string eval_genome, eval_genome_file;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate one genome and print its metrics");
  add_common(eval_cmd, eval_opts, /*with_run_overrides=*/false);
  eval_cmd->add_option("--genome", eval_genome, "Genome as a 0/1 string");
  eval_cmd->add_option("--genome-file", eval_genome_file,
                       "File holding the genome (bits, or a metrics.json)")
      ->check(CLI::ExistingFile);

  CommonOptions mesh_opts;
  std::string mesh_genome, mesh_genome_file, mesh_out = "mesh.stl";
  auto* mesh_cmd = app.add_subcommand("export-mesh", "Write the beam geometry as binary STL");
  add_common(mesh_cmd, mesh_opts, /*with_run_overrides=*/false);
  mesh_cmd->add_option("--genome", mesh_genome, "Genome as a 0/1 string");
  mesh_cmd->add_option("--genome-file", mesh_genome_file,
                       "File holding the genome (bits, or a metrics.json)")
      ->check(CLI::ExistingFile);
  mesh_cmd->add_option("-o,--out", mesh_out, "Output STL path");

  std::string plot_dir;
  auto* plot_cmd = app.add_subcommand("plot", "Regenerate the plots of a seed directory");
  plot_cmd->add_option("seed_dir", plot_dir, "Directory with convergence.csv and metrics.json")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) {
      combot::Runner runner(load_config(run_opts), &std::cout);
      const combot::RunReport report = runner.run();
      for (const combot::SeedReport& s : report.seeds) {
        std::cout << "seed " << s.seed << ": ";
        if (s.best.eval.valid)
          std::cout << "fitness " << s.best.eval.fitness << ", GA "
                    << s.best.eval.geometric_advantage << ", length " << s.best.eval.total_length
                    << " mm";
        else
          std::cout << "no valid design (" << combot::to_string(s.best.eval.reason) << ")";
        std::cout << "  ->  " << s.dir.string() << "\n";
      }
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const combot::RunConfig cfg = load_config(eval_opts);
      const combot::Evaluator evaluator(cfg.problem, cfg.objective);
      const combot::Genome genome = load_genome(evaluator.layout(), eval_genome, eval_genome_file);
      const combot::Evaluation ev = evaluator.evaluate(genome, /*force_spring=*/true);
      combot::Json out = combot::evaluation_json(ev);
      out["genome"] = combot::genome_to_string(genome);
      std::cout << out.dump(2) << "\n";
      return ev.valid ? kExitOk : kExitInvalidStructure;
    }

    if (mesh_cmd->parsed()) {
      const combot::RunConfig cfg = load_config(mesh_opts);
      const combot::Evaluator evaluator(cfg.problem, cfg.objective);
      const combot::Genome genome = load_genome(evaluator.layout(), mesh_genome, mesh_genome_file);
      const auto ph = combot::decode_genome(cfg.problem, evaluator.layout(), genome);
      if (!ph) {
        std::cerr << "genome does not decode to a structure (offset out of range)\n";
        return kExitInvalidStructure;
      }
      std::ofstream out(mesh_out, std::ios::binary);
      if (!out) throw combot::IoError("cannot open " + mesh_out + " for writing");
      combot::write_binary_stl(out,
                               combot::structure_mesh(ph->active, ph->positions,
                                                      cfg.problem.section));
      std::cout << "wrote " << ph->active.size() * 12 << " triangles to " << mesh_out << "\n";
      return kExitOk;
    }

    if (plot_cmd->parsed()) {
      combot::regenerate_plots(plot_dir);
      std::cout << "plots rebuilt under " << plot_dir << "/plots\n";
      return kExitOk;
    }
  } catch (const combot::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const combot::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
