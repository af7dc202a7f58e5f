#pragma once

// Command implementations behind the `dgcomm` executable. Each returns a
// process exit code: 0 success, 2 input error, 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dgcomm/common.hpp"
#include "dgcomm/grid_model.hpp"
#include "dgcomm/mas_sim.hpp"
#include "dgcomm/partitioner.hpp"
#include "dgcomm/power_flow.hpp"

namespace dgcomm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

struct RunConfig {
  std::optional<std::filesystem::path> network_path;
  std::optional<std::string> synth;  // KEY=VAL,... string
  std::optional<std::filesystem::path> graph_path;
  std::optional<std::filesystem::path> scenario_path;
  SensitivityKind mode = SensitivityKind::VQ;
  PeakPolicy peak = PeakPolicy::global;
  ControlMode control = ControlMode::reactive;
  double v_lo = 0.95;
  double v_hi = 1.05;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool dump_sensitivity = false;
};

inline SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("--synth entry '" + item + "' is not KEY=VAL");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      auto as_int = [&] {
        int v = std::stoi(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        return v;
      };
      auto as_double = [&] {
        double v = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        return v;
      };
      if (key == "feeders") spec.n_feeders = as_int();
      else if (key == "transformers") spec.n_transformers = as_int();
      else if (key == "rows") spec.grid_rows = as_int();
      else if (key == "cols") spec.grid_cols = as_int();
      else if (key == "loads") spec.n_loads = as_int();
      else if (key == "dgs") spec.n_dgs = as_int();
      else if (key == "seed") spec.seed = static_cast<std::uint64_t>(std::stoull(val));
      else if (key == "mesh") spec.mesh_density = as_double();
      else if (key == "slack_v") spec.slack_v = as_double();
      else if (key == "q_headroom_kvar") spec.dg_q_headroom_kvar = as_double();
      else if (key == "p_headroom_kw") spec.dg_p_headroom_kw = as_double();
      else if (key == "load_kw_min") spec.load_kw_min = as_double();
      else if (key == "load_kw_max") spec.load_kw_max = as_double();
      else if (key == "dg_kw_min") spec.dg_kw_min = as_double();
      else if (key == "dg_kw_max") spec.dg_kw_max = as_double();
      else if (key == "sec_r_ohm") spec.secondary_r_ohm = as_double();
      else if (key == "sec_x_ohm") spec.secondary_x_ohm = as_double();
      else if (key == "xfmr_kva") spec.transformer_kva = as_double();
      else throw InputError("unknown --synth key '" + key + "'");
    } catch (const std::logic_error&) {
      throw InputError("--synth value for '" + key + "' is not a number: " + val);
    }
  }
  return spec;
}

inline void check_limits(const RunConfig& cfg) {
  if (!(cfg.v_lo > 0.0 && cfg.v_lo < cfg.v_hi)) throw InputError("voltage limits must satisfy 0 < vmin < vmax");
}

inline NetworkModel resolve_network(const RunConfig& cfg) {
  if (cfg.network_path && cfg.synth) throw InputError("give either --network or --synth, not both");
  if (cfg.network_path) {
    if (!std::filesystem::exists(*cfg.network_path))
      throw InputError("network file not found: " + cfg.network_path->string());
    return load_network(*cfg.network_path);
  }
  if (cfg.synth) {
    SynthSpec spec = parse_synth_spec(*cfg.synth);
    if (cfg.seed) spec.seed = *cfg.seed;
    return generate_synthetic_network(spec);
  }
  throw InputError("no network given: use --network PATH or --synth KEY=VAL,...");
}

namespace detail {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

inline PowerFlowSolution solve_or_throw(const NetworkModel& net) {
  PowerFlowSolution pf = solve_power_flow(net);
  if (!pf.converged)
    throw NumericalError("power flow did not converge after " + std::to_string(pf.iterations) +
                         " iterations (max mismatch " + format_double(pf.max_mismatch) + " pu)");
  return pf;
}

// Raw weighted graph for partitioning without a network:
// {"weights": [[...], ...]}.
inline WeightedGraph load_graph(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("graph file not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": parse error: " + e.what());
  }
  const auto& rows = doc.at("weights");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw InputError(path.string() + ": weight matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j) w(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return WeightedGraph(std::move(w));
}

}  // namespace detail

inline int cmd_partition(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    if (cfg.graph_path) {
      WeightedGraph g = detail::load_graph(*cfg.graph_path);
      auto [p, dendro] = greedy_partition(g, cfg.peak);
      std::vector<CommunityRow> rows(static_cast<std::size_t>(p.n_communities));
      std::map<int, int> assign;
      for (std::size_t i = 0; i < p.community_of.size(); ++i) {
        int c = p.community_of[i];
        rows[static_cast<std::size_t>(c)].community = c;
        ++rows[static_cast<std::size_t>(c)].nodes;
        assign[static_cast<int>(i)] = c;
      }
      write_community_table(cfg.out_dir / "community_table.csv", rows);
      write_node_assignment(cfg.out_dir / "node_assignment.csv", assign, "node");
      write_dendrogram(cfg.out_dir / "dendrogram.csv", dendro);
      out << "peak_modularity=" << format_short(p.modularity) << " communities=" << p.n_communities << '\n';
      return kExitOk;
    }

    NetworkModel net = resolve_network(cfg);
    PowerFlowSolution pf = detail::solve_or_throw(net);
    SensitivityMatrix sens = compute_sensitivity_matrix(net, pf);
    if (cfg.dump_sensitivity) dump_sensitivity(sens, cfg.out_dir);
    NetworkPartition np = partition_network(net, sens, cfg.mode, cfg.peak);
    auto rows = community_table(net, np);
    write_community_table(cfg.out_dir / "community_table.csv", rows);
    write_node_assignment(cfg.out_dir / "node_assignment.csv", np.community_by_bus);
    write_dendrogram(cfg.out_dir / "dendrogram.csv", np.dendrogram);
    out << "peak_modularity=" << format_short(np.partition.modularity) << " communities=" << np.n_communities()
        << '\n';
    for (const auto& r : rows)
      if (r.dgs == 0) err << "warning: community " << r.community << " contains no DG\n";
    return kExitOk;
  });
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    check_limits(cfg);
    if (!cfg.scenario_path) throw InputError("simulate requires --scenario PATH");
    if (!std::filesystem::exists(*cfg.scenario_path))
      throw InputError("scenario file not found: " + cfg.scenario_path->string());
    NetworkModel net = resolve_network(cfg);
    Scenario sc = load_scenario(*cfg.scenario_path);
    validate_scenario(sc, net);
    SimConfig sim;
    sim.v_lo = cfg.v_lo;
    sim.v_hi = cfg.v_hi;
    sim.grouping = cfg.mode;
    sim.peak = cfg.peak;
    sim.mode = cfg.control;
    PowerFlowSolution pf = detail::solve_or_throw(net);
    SensitivityMatrix sens = compute_sensitivity_matrix(net, pf);
    if (cfg.dump_sensitivity) dump_sensitivity(sens, cfg.out_dir);
    NetworkPartition np = partition_network(net, sens, sim.grouping, sim.peak);
    RunReport report = run_scenario(net, sc, sim, np, sens);
    write_report(report, cfg.out_dir);
    out << report.summary_line() << '\n';
    return kExitOk;
  });
}

inline int cmd_sensitivity(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    NetworkModel net = resolve_network(cfg);
    PowerFlowSolution pf = detail::solve_or_throw(net);
    SensitivityMatrix sens = compute_sensitivity_matrix(net, pf);
    dump_sensitivity(sens, cfg.out_dir);
    out << "buses=" << sens.size() << " iterations=" << pf.iterations << '\n';
    return kExitOk;
  });
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    if (!cfg.synth) throw InputError("generate requires --synth KEY=VAL,...");
    NetworkModel net = resolve_network(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    save_network(net, cfg.out_dir / "network.json");
    out << "buses=" << net.buses.size() << " branches=" << net.branches.size()
        << " transformers=" << net.transformers.size() << " dgs=" << net.dgs.size() << '\n';
    return kExitOk;
  });
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    if (!cfg.network_path) throw InputError("validate requires --network PATH");
    if (!std::filesystem::exists(*cfg.network_path))
      throw InputError("network file not found: " + cfg.network_path->string());
    NetworkModel net = network_from_json(nlohmann::json::parse(read_text_file(*cfg.network_path)));
    auto v = validate_network(net);
    for (const auto& x : v) out << x.to_string() << '\n';
    if (!v.empty()) return kExitInput;
    out << "ok\n";
    return kExitOk;
  });
}

}  // namespace dgcomm::cli
