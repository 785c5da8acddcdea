#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "combot/config.hpp"
#include "combot/runner.hpp"

using namespace combot;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() /
                     ("combot_" + std::to_string(::getpid()) + "_" + name + "_" +
                      std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + COMBOT_CLI_PATH + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  if (WIFEXITED(raw)) r.code = WEXITSTATUS(raw);
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// The leanest run that exercises the whole output pipeline.
Json tiny_run_doc(const fs::path& out_dir) {
  Json doc;
  doc["case"] = 1;
  doc["ea"] = Json{{"population", 8}, {"generations", 3}};
  doc["seeds"] = Json::array({1});
  doc["out_dir"] = out_dir.string();
  return doc;
}

}  // namespace

TEST_CASE("case presets fill a complete configuration", "[config]") {
  const RunConfig cfg = default_config(1);
  CHECK(cfg.problem.structure.elements.size() == 89);
  CHECK(cfg.problem.input_node == 13);
  CHECK(cfg.problem.end_effector_node == 9);
  CHECK(cfg.problem.support_nodes == std::vector<int>{1, 4, 7, 10, 16});
  CHECK(cfg.out_dir == "runs/case1");
  CHECK(cfg.seeds.size() == 5);

  const RunConfig case3 = default_config(3);
  CHECK(case3.problem.structure.domain.size == Vec3{50, 50, 30});
  CHECK(case3.problem.end_effector_node == 3);
}

TEST_CASE("serialization round-trips for every case", "[config]") {
  for (int c : {1, 2, 3}) {
    const RunConfig cfg = default_config(c);
    const Json doc = to_json(cfg);
    const RunConfig back = parse_config(doc);
    CHECK(to_json(back) == doc);
    CHECK(config_hash(back) == config_hash(cfg));
  }
}

TEST_CASE("a customized document survives parse and re-serialization", "[config]") {
  Json doc;
  doc["case"] = 2;
  doc["wander"] = Json{{"range", 2.0}, {"step", 0.5}};
  doc["material_preset"] = "ultimaker_abs";
  doc["objective_mode"] = "ga-ma";
  doc["weights"] = Json{{"w1", 10.0}, {"w4", 0.5}};
  doc["spring"] = Json{{"stiffness", 0.25}};
  doc["ea"] = Json{{"population", 50}, {"mutation_scheme", "per_genome"}};
  doc["constraints"] = Json{{"l_des_tot", 150.0}};
  doc["seeds"] = Json::array({4, 2});
  doc["external_loads"] = Json::array({Json{{"node", 9}, {"force", Json::array({0, 0, -2})}}});

  const RunConfig cfg = parse_config(doc);
  CHECK(cfg.wander_range == Vec3{2.0, 2.0, 2.0});  // scalar range is isotropic
  CHECK(cfg.wander_step == 0.5);
  CHECK(cfg.problem.material.youngs_modulus == 2070.0);
  CHECK(cfg.material_preset == "ultimaker_abs");
  CHECK(cfg.objective.spring_mode);
  CHECK(cfg.objective.w1 == 10.0);
  CHECK(cfg.objective.w2 == 4.0);  // untouched default
  CHECK(cfg.objective.w4 == 0.5);
  CHECK(cfg.problem.spring_stiffness == 0.25);
  // No explicit spring direction: it follows the output direction.
  CHECK(cfg.problem.spring_dir() == cfg.problem.output_direction);
  CHECK(cfg.ea.population == 50);
  CHECK(cfg.ea.mutation_scheme == MutationScheme::per_genome);
  CHECK(cfg.problem.l_des_tot == 150.0);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 2});
  REQUIRE(cfg.problem.external_loads.size() == 1);
  CHECK(cfg.problem.external_loads[0].force == Vec3{0, 0, -2});

  const Json canon = to_json(cfg);
  const RunConfig back = parse_config(canon);
  CHECK(to_json(back) == canon);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("material presets carry the measured moduli", "[config]") {
  CHECK(material_presets().at("ultimaker_abs").youngs_modulus == 2070.0);
  CHECK(material_presets().at("ultimaker_pp").youngs_modulus == 305.0);
  CHECK(material_presets().at("basf_pp").youngs_modulus == 470.0);

  Json doc;
  doc["material_preset"] = "basf_pp";
  CHECK(parse_config(doc).problem.material.youngs_modulus == 470.0);
}

TEST_CASE("config errors carry the offending path", "[config]") {
  const auto fails_with = [](Json doc, const std::string& needle) {
    try {
      parse_config(doc);
      FAIL("expected ConfigError for " << doc.dump());
    } catch (const ConfigError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  fails_with(Json{{"casse", 1}}, "unknown key \"casse\"");
  fails_with(Json{{"case", 4}}, "config.case");
  fails_with(Json{{"d_in", "five"}}, "config.d_in: expected a number");
  fails_with(Json{{"node_grid", Json::array({3, 3})}}, "config.node_grid");
  fails_with(Json{{"ea", Json{{"popsize", 8}}}}, "config.ea: unknown key \"popsize\"");
  fails_with(Json{{"ea", Json{{"elite_count", 200}}}}, "config.ea.elite_count");
  fails_with(Json{{"ea", Json{{"crossover_rate", 1.5}}}}, "config.ea.crossover_rate");
  fails_with(Json{{"ea", Json{{"mutation_scheme", "always"}}}}, "config.ea.mutation_scheme");
  fails_with(Json{{"ea", Json{{"init_density", 1.2}}}}, "config.ea.init_density");
  fails_with(Json{{"weights", Json{{"w1", -1.0}}}}, "config.weights");
  fails_with(Json{{"wander", Json{{"stop", 1.0}}}}, "config.wander: unknown key \"stop\"");
  fails_with(Json{{"wander", Json{{"step", -0.5}}}}, "config.wander.step");
  fails_with(Json{{"input_node", 99}}, "config.input_node: node id 99 outside 1..18");
  fails_with(Json{{"support_nodes", Json::array({13})}},
             "the input node cannot be a support");
  fails_with(Json{{"end_effector_node", 13}}, "must differ from the input node");
  fails_with(Json{{"input_direction", Json::array({0, 0, 0})}}, "config.input_direction");
  fails_with(Json{{"material", Json{{"youngs_modulus", -5}}}},
             "config.material.youngs_modulus");
  fails_with(Json{{"material", Json{{"poisson_ratio", 0.7}}}}, "config.material.poisson_ratio");
  fails_with(Json{{"material_preset", "steel"}}, "unknown preset \"steel\"");
  fails_with(Json{{"material_preset", "basf_pp"},
                  {"material", Json{{"youngs_modulus", 470.0}}}},
             "mutually exclusive");
  fails_with(Json{{"objective_mode", "both"}}, "config.objective_mode");
  fails_with(Json{{"seeds", Json::array()}}, "config.seeds");
  fails_with(Json{{"seeds", Json::array({-3})}}, "config.seeds: must be >= 0");
  fails_with(Json{{"spring", Json{{"stiffness", 0.0}}}}, "config.spring.stiffness");
  fails_with(Json{{"workers", 0}}, "config.workers");
  fails_with(Json{{"element_dims", Json::array({1.0})}}, "config.element_dims");
  fails_with(Json::array({1, 2, 3}), "expected a JSON object");
}

TEST_CASE("hash ignores where results land but not what is computed", "[config]") {
  const RunConfig base = default_config(1);

  RunConfig moved = base;
  moved.out_dir = "elsewhere/x";
  moved.workers = 7;
  CHECK(config_hash(moved) == config_hash(base));

  RunConfig reweighted = base;
  reweighted.objective.w1 = 12.0;
  CHECK(config_hash(reweighted) != config_hash(base));

  RunConfig reseeded = base;
  reseeded.seeds = {9};
  CHECK(config_hash(reseeded) != config_hash(base));
}

TEST_CASE("genome layout for the canonical leg is frozen", "[config]") {
  const SynthesisProblem p = make_case(1);
  const Evaluator ev(p, {});
  const GenomeLayout& layout = ev.layout();

  CHECK(layout.element_count == 89);
  // 18 grid nodes minus 1 input, 5 supports and 1 end effector leaves 11
  // wandering nodes; range 1.75 at step 0.25 needs 4 bits per axis.
  REQUIRE(layout.offset_fields.size() == 33);
  for (const GenomeField& f : layout.offset_fields) {
    CHECK(f.bits == 4);
    CHECK(f.max_code == 7);
  }
  CHECK(layout.length == 89 + 33 * 4);
  CHECK(layout.length == 221);

  SynthesisProblem free_anchors = p;
  free_anchors.fixed_anchors = false;
  const Evaluator ev2(free_anchors, {});
  CHECK(ev2.layout().length == 89 + 18 * 12);
}

TEST_CASE("genome strings parse strictly", "[config]") {
  const SynthesisProblem p = make_case(1);
  const Evaluator ev(p, {});
  const GenomeLayout& layout = ev.layout();

  const std::string bits = std::string(89, '1') + std::string(132, '0');
  const auto g = genome_from_string(layout, bits);
  REQUIRE(g);
  CHECK(genome_to_string(*g) == bits);

  CHECK_FALSE(genome_from_string(layout, bits + "0"));          // too long
  CHECK_FALSE(genome_from_string(layout, bits.substr(1)));      // too short
  std::string corrupt = bits;
  corrupt[50] = '2';
  CHECK_FALSE(genome_from_string(layout, corrupt));
}

TEST_CASE("cli run produces the documented artifacts", "[cli]") {
  const fs::path scratch = fresh_dir("run");
  const fs::path out1 = scratch / "run1";
  const fs::path config_path = scratch / "tiny.json";
  detail::write_file(config_path, tiny_run_doc(out1).dump(2) + "\n");

  const CliResult r = run_cli("run -c \"" + config_path.string() + "\"", scratch);
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed 1:") != std::string::npos);

  CHECK(fs::exists(out1 / "config.json"));
  CHECK(fs::exists(out1 / "seed_1" / "structure.json"));
  CHECK(fs::exists(out1 / "seed_1" / "convergence.csv"));
  CHECK(fs::exists(out1 / "seed_1" / "metrics.json"));
  CHECK(fs::exists(out1 / "seed_1" / "plots" / "convergence.svg"));

  SECTION("rerunning the snapshot reproduces the structure byte for byte") {
    const fs::path out2 = scratch / "run2";
    const CliResult r2 = run_cli("run -c \"" + (out1 / "config.json").string() + "\" -o \"" +
                                     out2.string() + "\"",
                                 scratch);
    INFO(r2.err);
    REQUIRE(r2.code == 0);
    const std::string a = read_file(out1 / "seed_1" / "structure.json");
    const std::string b = read_file(out2 / "seed_1" / "structure.json");
    REQUIRE_FALSE(a.empty());
    CHECK(a == b);
  }

  SECTION("evaluate agrees with the stored best") {
    const Json metrics = Json::parse(read_file(out1 / "seed_1" / "metrics.json"));
    const bool valid = metrics["best"]["valid"].get<bool>();
    const CliResult e = run_cli("evaluate -c \"" + config_path.string() + "\" --genome-file \"" +
                                    (out1 / "seed_1" / "metrics.json").string() + "\"",
                                scratch);
    CHECK(e.code == (valid ? 0 : 3));
    const Json report = Json::parse(e.out);
    CHECK(report["valid"].get<bool>() == valid);
    CHECK(report["genome"] == metrics["best"]["genome"]);
  }

  SECTION("plot rebuilds the figures in place") {
    fs::remove_all(out1 / "seed_1" / "plots");
    const CliResult p = run_cli("plot \"" + (out1 / "seed_1").string() + "\"", scratch);
    REQUIRE(p.code == 0);
    CHECK(fs::exists(out1 / "seed_1" / "plots" / "convergence.svg"));
  }
}

TEST_CASE("cli evaluate classifies an unbuildable genome", "[cli]") {
  const fs::path scratch = fresh_dir("eval");
  const std::string zeros(221, '0');
  const CliResult r = run_cli("evaluate --case 1 --genome " + zeros, scratch);
  CHECK(r.code == 3);
  const Json report = Json::parse(r.out);
  CHECK_FALSE(report["valid"].get<bool>());
  CHECK(report["reason"] == "disconnected_input");
}

TEST_CASE("cli export-mesh writes one prism per element", "[cli]") {
  const fs::path scratch = fresh_dir("mesh");
  const std::string bits = std::string(89, '1') + std::string(132, '0');
  const fs::path stl = scratch / "all.stl";

  const CliResult r = run_cli(
      "export-mesh --case 1 --genome " + bits + " -o \"" + stl.string() + "\"", scratch);
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("1068 triangles") != std::string::npos);
  REQUIRE(fs::exists(stl));
  CHECK(fs::file_size(stl) == 84 + 50 * (89 * 12));

  SECTION("offsets outside the lattice cannot be meshed") {
    const std::string broken = std::string(221, '1');
    const CliResult b = run_cli("export-mesh --case 1 --genome " + broken, scratch);
    CHECK(b.code == 3);
  }

  SECTION("a malformed genome string is a usage error") {
    const CliResult b = run_cli("export-mesh --case 1 --genome 0101", scratch);
    CHECK(b.code == 2);
  }
}

TEST_CASE("cli maps failure classes to exit codes", "[cli]") {
  const fs::path scratch = fresh_dir("codes");

  SECTION("broken config file") {
    const fs::path bad = scratch / "bad.json";
    detail::write_file(bad, "{\"casse\": 1}\n");
    CHECK(run_cli("run -c \"" + bad.string() + "\"", scratch).code == 2);
  }
  SECTION("unparseable json") {
    const fs::path bad = scratch / "syntax.json";
    detail::write_file(bad, "{nope\n");
    CHECK(run_cli("run -c \"" + bad.string() + "\"", scratch).code == 2);
  }
  SECTION("missing config file") {
    CHECK(run_cli("run -c /nonexistent/conf.json", scratch).code == 2);
  }
  SECTION("missing plot directory") {
    CHECK(run_cli("plot /nonexistent/seed_1", scratch).code == 2);
  }
  SECTION("unwritable output directory") {
    const fs::path blocker = scratch / "blocker";
    detail::write_file(blocker, "file, not a directory\n");
    Json doc = tiny_run_doc(blocker / "sub");
    const fs::path cfg = scratch / "blocked.json";
    detail::write_file(cfg, doc.dump() + "\n");
    CHECK(run_cli("run -c \"" + cfg.string() + "\"", scratch).code == 4);
  }
  SECTION("no subcommand") {
    CHECK(run_cli("", scratch).code == 2);
  }
}
