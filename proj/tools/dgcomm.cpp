// dgcomm: partition distribution networks into DG communities and simulate
// community voltage control.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dgcomm/cli.hpp"

namespace {

using dgcomm::cli::RunConfig;

struct Flags {
  std::string network, synth, graph, scenario, out = "out";
  std::string mode = "vq", peak = "global", control = "reactive";
  double vmin = 0.95, vmax = 1.05;
  std::uint64_t seed = 0;
  bool dump = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  auto* net = cmd->add_option("--network", f.network, "Network file (JSON)");
  auto* syn = cmd->add_option("--synth", f.synth, "Synthetic network spec KEY=VAL,... "
                                                  "(feeders, transformers, rows, cols, loads, dgs, seed, mesh, slack_v, q_headroom_kvar, "
                                                  "p_headroom_kw, load_kw_min, load_kw_max, dg_kw_min, dg_kw_max, "
                                                  "sec_r_ohm, sec_x_ohm, xfmr_kva)");
  net->excludes(syn);
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for --synth");
  cmd->add_option("--mode", f.mode, "Sensitivity used for grouping")
      ->check(CLI::IsMember({"vq", "vp"}))
      ->capture_default_str();
  cmd->add_option("--peak", f.peak, "Dendrogram cut")->check(CLI::IsMember({"global", "first"}))->capture_default_str();
  cmd->add_flag("--dump-sensitivity", f.dump, "Also write the four sensitivity CSVs");
}

RunConfig to_config(const Flags& f, const CLI::App& cmd) {
  RunConfig cfg;
  if (!f.network.empty()) cfg.network_path = f.network;
  if (!f.synth.empty()) cfg.synth = f.synth;
  if (!f.graph.empty()) cfg.graph_path = f.graph;
  if (!f.scenario.empty()) cfg.scenario_path = f.scenario;
  cfg.mode = f.mode == "vp" ? dgcomm::SensitivityKind::VP : dgcomm::SensitivityKind::VQ;
  cfg.peak = f.peak == "first" ? dgcomm::PeakPolicy::first_local : dgcomm::PeakPolicy::global;
  cfg.control = f.control == "active" ? dgcomm::ControlMode::active : dgcomm::ControlMode::reactive;
  cfg.v_lo = f.vmin;
  cfg.v_hi = f.vmax;
  cfg.out_dir = f.out;
  if (cmd.count("--seed")) cfg.seed = f.seed;
  cfg.dump_sensitivity = f.dump;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DG community partitioning and self-organizing voltage control"};
  app.require_subcommand(1);
  Flags f;

  auto* partition = app.add_subcommand("partition", "Partition a network into DG communities");
  add_common(partition, f);
  partition->add_option("--graph", f.graph, "Partition a raw weighted graph {\"weights\": [[...]]} instead");

  auto* simulate = app.add_subcommand("simulate", "Run a scenario through the agent simulation");
  add_common(simulate, f);
  simulate->add_option("--scenario", f.scenario, "Scenario file (JSON)")->required();
  simulate->add_option("--vmin", f.vmin, "Lower voltage limit, pu")->capture_default_str();
  simulate->add_option("--vmax", f.vmax, "Upper voltage limit, pu")->capture_default_str();
  simulate->add_option("--control", f.control, "Overvoltage control quantity")
      ->check(CLI::IsMember({"reactive", "active"}))
      ->capture_default_str();

  auto* sensitivity = app.add_subcommand("sensitivity", "Write the sensitivity matrix blocks as CSV");
  add_common(sensitivity, f);

  auto* generate = app.add_subcommand("generate", "Write a synthetic network to OUT/network.json");
  add_common(generate, f);

  auto* validate = app.add_subcommand("validate", "Check a network file and list violations");
  add_common(validate, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : dgcomm::cli::kExitInput;
  }

  for (auto* cmd : app.get_subcommands()) {
    RunConfig cfg = to_config(f, *cmd);
    if (cmd == partition) return dgcomm::cli::cmd_partition(cfg);
    if (cmd == simulate) return dgcomm::cli::cmd_simulate(cfg);
    if (cmd == sensitivity) return dgcomm::cli::cmd_sensitivity(cfg);
    if (cmd == generate) return dgcomm::cli::cmd_generate(cfg);
    if (cmd == validate) return dgcomm::cli::cmd_validate(cfg);
  }
  return dgcomm::cli::kExitInput;
}
