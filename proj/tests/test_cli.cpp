#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dgcomm/cli.hpp"
#include "oracles.hpp"

using namespace dgcomm;
using namespace dgcomm::cli;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("dgcomm_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("partition writes the three tables") {
  RunConfig cfg;
  cfg.network_path = oracle::data("six_bus.json");
  cfg.out_dir = scratch("partition");
  std::ostringstream out, err;
  REQUIRE(cmd_partition(cfg, out, err) == kExitOk);
  CHECK_THAT(out.str(), ContainsSubstring("communities=2"));
  CHECK(err.str().empty());
  CHECK(slurp(cfg.out_dir / "community_table.csv").rfind("community,nodes,dgs\n", 0) == 0);
  CHECK(fs::exists(cfg.out_dir / "node_assignment.csv"));
  CHECK(fs::exists(cfg.out_dir / "dendrogram.csv"));
  CHECK_FALSE(fs::exists(cfg.out_dir / "a_vq.csv"));

  cfg.dump_sensitivity = true;
  REQUIRE(cmd_partition(cfg, out, err) == kExitOk);
  CHECK(fs::exists(cfg.out_dir / "a_vq.csv"));
}

TEST_CASE("partition of a raw graph") {
  fs::path dir = scratch("graph");
  fs::create_directories(dir);
  std::ofstream(dir / "g.json") << R"({"weights": [[0,1,1,0,0,0],[1,0,1,0,0,0],[1,1,0,0,0,0],
                                                    [0,0,0,0,1,1],[0,0,0,1,0,1],[0,0,0,1,1,0]]})";
  RunConfig cfg;
  cfg.graph_path = dir / "g.json";
  cfg.out_dir = dir / "out";
  std::ostringstream out, err;
  REQUIRE(cmd_partition(cfg, out, err) == kExitOk);
  CHECK(out.str() == "peak_modularity=0.5 communities=2\n");
  CHECK(slurp(cfg.out_dir / "node_assignment.csv") == "node,community\n0,0\n1,0\n2,0\n3,1\n4,1\n5,1\n");
}

TEST_CASE("input problems exit with code 2") {
  std::ostringstream out, err;
  RunConfig missing;
  missing.network_path = oracle::data("nope.json");
  missing.out_dir = scratch("missing");
  CHECK(cmd_partition(missing, out, err) == kExitInput);
  CHECK_THAT(err.str(), ContainsSubstring("network file not found"));

  RunConfig none;
  none.out_dir = scratch("none");
  CHECK(cmd_partition(none, out, err) == kExitInput);

  RunConfig no_scenario;
  no_scenario.network_path = oracle::data("six_bus.json");
  no_scenario.out_dir = scratch("no_scenario");
  CHECK(cmd_simulate(no_scenario, out, err) == kExitInput);

  RunConfig unknown = no_scenario;
  unknown.scenario_path = oracle::data("scenarios/unknown_dg.json");
  err.str("");
  CHECK(cmd_simulate(unknown, out, err) == kExitInput);
  CHECK_THAT(err.str(), ContainsSubstring("unknown DG id 99"));

  RunConfig limits = unknown;
  limits.scenario_path = oracle::data("scenarios/empty.json");
  limits.v_lo = 1.1;
  CHECK(cmd_simulate(limits, out, err) == kExitInput);

  fs::path dir = scratch("bad_json");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"s_base_mva\": ";
  RunConfig bad;
  bad.network_path = dir / "bad.json";
  bad.out_dir = dir;
  CHECK(cmd_validate(bad, out, err) == kExitInput);
  CHECK(cmd_partition(bad, out, err) == kExitInput);

  CHECK_THROWS_AS(parse_synth_spec("rows=abc"), InputError);
  CHECK_THROWS_AS(parse_synth_spec("colour=3"), InputError);
  CHECK_THROWS_AS(parse_synth_spec("rows"), InputError);
}

TEST_CASE("validate lists violations") {
  fs::path dir = scratch("validate");
  fs::create_directories(dir);
  std::ofstream(dir / "n.json") << R"({"s_base_mva": 1, "buses": [{"id": 1, "kind": "pq", "base_kv": 1},
                                       {"id": 2, "kind": "pq", "base_kv": 1}]})";
  RunConfig cfg;
  cfg.network_path = dir / "n.json";
  std::ostringstream out, err;
  CHECK(cmd_validate(cfg, out, err) == kExitInput);
  CHECK_THAT(out.str(), ContainsSubstring("missing-slack"));
  CHECK_THAT(out.str(), ContainsSubstring("disconnected"));

  cfg.network_path = oracle::data("synth30.json");
  out.str("");
  CHECK(cmd_validate(cfg, out, err) == kExitOk);
  CHECK(out.str() == "ok\n");
}

TEST_CASE("numerical failure exits with code 3") {
  fs::path dir = scratch("diverge");
  fs::create_directories(dir);
  std::ofstream(dir / "n.json") << R"({"s_base_mva": 1,
    "buses": [{"id": 1, "kind": "slack", "base_kv": 1}, {"id": 2, "kind": "pq", "base_kv": 1, "p_load": 50, "q_load": 50}],
    "branches": [{"from_bus": 1, "to_bus": 2, "r": 0.1, "x": 0.3}],
    "dgs": [{"id": 1, "bus": 2}]})";
  RunConfig cfg;
  cfg.network_path = dir / "n.json";
  cfg.out_dir = dir / "out";
  std::ostringstream out, err;
  CHECK(cmd_partition(cfg, out, err) == kExitNumerical);
  CHECK_THAT(err.str(), ContainsSubstring("did not converge"));
}

TEST_CASE("generate then partition the synthetic network") {
  RunConfig gen;
  gen.synth = "rows=3,cols=3,loads=5,dgs=2,transformers=2";
  gen.seed = 9;
  gen.out_dir = scratch("generate");
  std::ostringstream out, err;
  REQUIRE(cmd_generate(gen, out, err) == kExitOk);
  CHECK_THAT(out.str(), ContainsSubstring("dgs=2"));
  NetworkModel net = load_network(gen.out_dir / "network.json");
  SynthSpec spec = parse_synth_spec(*gen.synth);
  spec.seed = 9;
  NetworkModel direct = generate_synthetic_network(spec);
  REQUIRE(net.buses.size() == direct.buses.size());
  for (std::size_t i = 0; i < net.buses.size(); ++i)
    CHECK_THAT(net.buses[i].p_load, Catch::Matchers::WithinAbs(direct.buses[i].p_load, 1e-15));

  RunConfig part;
  part.synth = gen.synth;
  part.seed = 9;
  part.out_dir = scratch("generate_partition");
  CHECK(cmd_partition(part, out, err) == kExitOk);
  CHECK(cmd_sensitivity(part, out, err) == kExitOk);
  CHECK(fs::exists(part.out_dir / "a_theta_q.csv"));
}

TEST_CASE("simulate is byte-for-byte repeatable") {
  RunConfig cfg;
  cfg.network_path = oracle::data("synth30.json");
  cfg.scenario_path = oracle::data("scenarios/trip_restore.json");
  std::ostringstream out, err;
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  cfg.out_dir = a;
  REQUIRE(cmd_simulate(cfg, out, err) == kExitOk);
  cfg.out_dir = b;
  REQUIRE(cmd_simulate(cfg, out, err) == kExitOk);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files == 7);
  CHECK_THAT(out.str(), ContainsSubstring("violations:1 resolved:1"));
}
