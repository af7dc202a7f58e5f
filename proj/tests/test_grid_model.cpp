#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dgcomm/grid_model.hpp"
#include "oracles.hpp"

using namespace dgcomm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

nlohmann::json small_doc() {
  return nlohmann::json::parse(R"({
    "s_base_mva": 10.0,
    "buses": [
      {"id": 1, "kind": "slack", "base_kv": 13.8, "v_mag": 1.02, "v_ang": 0.0},
      {"id": 2, "kind": "pq", "base_kv": 13.8, "p_load": 2.0, "q_load": 0.5},
      {"id": 3, "kind": "pq", "base_kv": 0.48, "p_load": 0.3, "q_load": 0.1}
    ],
    "branches": [{"from_bus": 1, "to_bus": 2, "r": 1.9044, "x": 3.8088, "b_shunt": 0.0001}],
    "transformers": [{"primary_bus": 2, "secondary_bus": 3, "r": 0.01, "x": 0.05, "tap": 1.025, "phase_shift": 30.0}],
    "dgs": [{"id": 7, "bus": 3, "p_out": 0.2, "q_out": 0.0, "p_surplus": 0.1, "q_surplus": 0.4}]
  })");
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

}  // namespace

TEST_CASE("file units convert to per-unit on the system base") {
  NetworkModel net = network_from_json(small_doc());
  REQUIRE(net.buses.size() == 3);
  CHECK(net.s_base == 10.0);
  // Zbase at 13.8 kV and 10 MVA is 19.044 ohm.
  CHECK_THAT(net.branches[0].r, WithinRel(0.1, 1e-12));
  CHECK_THAT(net.branches[0].x, WithinRel(0.2, 1e-12));
  CHECK_THAT(net.branches[0].b_shunt, WithinRel(0.0001 * 19.044, 1e-12));
  CHECK_THAT(net.find_bus(2)->p_load, WithinRel(0.2, 1e-12));
  CHECK_THAT(net.find_bus(3)->q_load, WithinRel(0.01, 1e-12));
  CHECK_THAT(net.transformers[0].phase_shift, WithinRel(std::numbers::pi / 6.0, 1e-12));
  CHECK(net.transformers[0].tap == 1.025);
  const DG* g = net.find_dg(7);
  REQUIRE(g);
  CHECK_THAT(g->p_out, WithinRel(0.02, 1e-12));
  CHECK_THAT(g->q_surplus, WithinRel(0.04, 1e-12));
  // Defaults for the downward headroom.
  CHECK_THAT(g->p_surplus_down, WithinRel(0.02, 1e-12));
  CHECK_THAT(g->q_surplus_down, WithinRel(0.04, 1e-12));
  CHECK(g->online);
  CHECK(validate_network(net).empty());
}

TEST_CASE("json round trip preserves the model") {
  NetworkModel net = network_from_json(small_doc());
  NetworkModel back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
  REQUIRE(back.buses.size() == net.buses.size());
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    CHECK(back.buses[i].id == net.buses[i].id);
    CHECK_THAT(back.buses[i].p_load, WithinAbs(net.buses[i].p_load, 1e-15));
  }
  CHECK_THAT(back.branches[0].x, WithinRel(net.branches[0].x, 1e-14));
  CHECK_THAT(back.transformers[0].phase_shift, WithinRel(net.transformers[0].phase_shift, 1e-14));
  CHECK_THAT(back.dgs[0].q_surplus_down, WithinRel(net.dgs[0].q_surplus_down, 1e-14));
}

TEST_CASE("fixtures load and validate") {
  for (const char* name : {"two_bus.json", "six_bus.json", "synth30.json"}) {
    INFO(name);
    NetworkModel net = load_network(oracle::data(name));
    CHECK(validate_network(net).empty());
    CHECK(net.slack_id().has_value());
  }
  NetworkModel six = load_network(oracle::data("six_bus.json"));
  CHECK(six.buses.size() == 6);
  CHECK(six.branches.size() == 7);
  CHECK(six.dgs.size() == 2);
  CHECK(six.non_slack_ids() == std::vector<int>{2, 3, 4, 5, 6});
}

TEST_CASE("validation reports every structural problem") {
  auto with = [](auto edit) {
    NetworkModel net = network_from_json(small_doc());
    edit(net);
    return validate_network(net);
  };
  CHECK(has_code(with([](NetworkModel& n) { n.buses[0].kind = BusKind::pq; }), "missing-slack"));
  CHECK(has_code(with([](NetworkModel& n) { n.buses[1].kind = BusKind::slack; }), "multiple-slack"));
  CHECK(has_code(with([](NetworkModel& n) { n.buses[2].id = 2; }), "duplicate-bus-id"));
  CHECK(has_code(with([](NetworkModel& n) { n.branches[0].to_bus = 99; }), "unknown-bus"));
  CHECK(has_code(with([](NetworkModel& n) { n.branches[0].to_bus = 1; }), "self-loop"));
  CHECK(has_code(with([](NetworkModel& n) { n.branches[0].r = n.branches[0].x = 0.0; }), "zero-impedance"));
  CHECK(has_code(with([](NetworkModel& n) { n.branches[0].x = NAN; }), "nonfinite-impedance"));
  CHECK(has_code(with([](NetworkModel& n) { n.branches.push_back({2, 3, 0.1, 0.1, 0.0}); }), "base-kv-mismatch"));
  CHECK(has_code(with([](NetworkModel& n) { n.transformers[0].x = 0.0; }), "bad-transformer-x"));
  CHECK(has_code(with([](NetworkModel& n) { n.transformers[0].tap = 0.0; }), "bad-tap"));
  CHECK(has_code(with([](NetworkModel& n) { n.dgs[0].bus = 1; }), "dg-on-slack"));
  CHECK(has_code(with([](NetworkModel& n) { n.dgs.push_back(n.dgs[0]); }), "duplicate-dg-id"));
  CHECK(has_code(with([](NetworkModel& n) {
                   DG g = n.dgs[0];
                   g.id = 8;
                   n.dgs.push_back(g);
                 }),
                 "multiple-dg-per-bus"));
  CHECK(has_code(with([](NetworkModel& n) { n.dgs[0].q_surplus = -0.1; }), "negative-surplus"));
  CHECK(has_code(with([](NetworkModel& n) { n.dgs[0].p_out = INFINITY; }), "nonfinite-dg"));
  CHECK(has_code(with([](NetworkModel& n) { n.buses[1].base_kv = 0.0; }), "bad-base-kv"));
  CHECK(has_code(with([](NetworkModel& n) { n.buses[1].p_load = NAN; }), "nonfinite-load"));
  CHECK(has_code(with([](NetworkModel& n) { n.transformers.clear(); }), "disconnected"));
}

TEST_CASE("parse errors name the offending field") {
  CHECK_THROWS_AS(parse_network("{not json"), InputError);
  CHECK_THROWS_WITH(parse_network(R"({"s_base_mva": 1, "buses": [{"id": 1, "base_kv": 1}]})"),
                    Catch::Matchers::ContainsSubstring("buses[0]: missing field 'kind'"));
  CHECK_THROWS_WITH(parse_network(R"({"s_base_mva": 1, "buses": [{"id": 1, "kind": "pv", "base_kv": 1}]})"),
                    Catch::Matchers::ContainsSubstring("unknown bus kind"));
  CHECK_THROWS_AS(parse_network(R"({"s_base_mva": 1, "buses": [{"id": 1, "kind": "pq", "base_kv": 1}]})"),
                  ValidationError);
  CHECK_THROWS_AS(load_network(oracle::data("no_such_file.json")), InputError);
}

TEST_CASE("synthetic networks are deterministic and valid") {
  SynthSpec spec;
  NetworkModel a = generate_synthetic_network(spec);
  NetworkModel b = generate_synthetic_network(spec);
  CHECK(a == b);
  CHECK(validate_network(a).empty());
  CHECK(static_cast<int>(a.transformers.size()) == spec.n_transformers);
  CHECK(static_cast<int>(a.dgs.size()) == spec.n_dgs);
  CHECK(a.buses.size() == 1 + static_cast<std::size_t>(spec.n_transformers + spec.grid_rows * spec.grid_cols));
  int loaded = 0;
  for (const auto& bus : a.buses) loaded += bus.p_load > 0.0;
  CHECK(loaded == spec.n_loads);
  for (const auto& g : a.dgs) CHECK(a.find_bus(g.bus)->p_load > 0.0);

  spec.seed = 2;
  CHECK_FALSE(generate_synthetic_network(spec) == a);

  SynthSpec bad;
  bad.n_dgs = bad.n_loads + 1;
  CHECK_THROWS_AS(generate_synthetic_network(bad), InputError);
  bad = SynthSpec{};
  bad.n_loads = bad.grid_rows * bad.grid_cols + 1;
  CHECK_THROWS_AS(generate_synthetic_network(bad), InputError);
}

TEST_CASE("mesh density controls the number of lattice edges") {
  SynthSpec tree;
  tree.mesh_density = 0.0;
  SynthSpec full;
  full.mesh_density = 1.0;
  NetworkModel t = generate_synthetic_network(tree), f = generate_synthetic_network(full);
  const int cells = tree.grid_rows * tree.grid_cols;
  const int lattice = tree.grid_rows * (tree.grid_cols - 1) + tree.grid_cols * (tree.grid_rows - 1);
  const int primary = tree.n_transformers;  // slack-to-tap chain segments
  CHECK(static_cast<int>(t.branches.size()) == primary + cells - 1);
  CHECK(static_cast<int>(f.branches.size()) == primary + lattice);
  CHECK(validate_network(t).empty());
}
