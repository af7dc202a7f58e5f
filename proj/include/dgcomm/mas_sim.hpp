#pragma once

// Deterministic tick-based simulation of the agent society: one community
// agent (CA) per community, one bus agent (BA) per bus and one DG agent (DA)
// per DG.
//
// A tick runs: scenario events -> power flow -> BA voltage scan -> CA
// self-organization and LP control -> DA actuation -> power flow and logging.
// Agents are processed BAs by bus id, CAs by community id, DAs by DG id, and
// inboxes are drained in (sent_at, sender, sequence) order.

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dgcomm/common.hpp"
#include "dgcomm/community_control.hpp"
#include "dgcomm/grid_model.hpp"
#include "dgcomm/partitioner.hpp"
#include "dgcomm/power_flow.hpp"

namespace dgcomm {

enum class AgentKind { CA, BA, DA };

struct AgentId {
  AgentKind kind = AgentKind::CA;
  int index = 0;

  auto operator<=>(const AgentId&) const = default;
  std::string str() const {
    const char* p = kind == AgentKind::CA ? "CA" : kind == AgentKind::BA ? "BA" : "DA";
    return p + std::to_string(index);
  }
};

enum class MessageKind { violation_report, adjustment_command, trip_notice, restore_notice, infeasible_notice };

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::violation_report: return "violation_report";
    case MessageKind::adjustment_command: return "adjustment_command";
    case MessageKind::trip_notice: return "trip_notice";
    case MessageKind::restore_notice: return "restore_notice";
    case MessageKind::infeasible_notice: return "infeasible_notice";
  }
  return "?";
}

// subject/value by kind: violation_report and infeasible_notice carry
// (bus, v_mag); adjustment_command (dg, delta); the notices (dg, 0).
struct Message {
  AgentId from;
  AgentId to;
  MessageKind kind = MessageKind::violation_report;
  int subject = 0;
  double value = 0.0;
  int sent_at = 0;
  long seq = 0;
  ControlMode mode = ControlMode::reactive;  // adjustment_command only
};

enum class EventKind { dg_trip, dg_restore, load_change, comm_loss, comm_restore };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::dg_trip: return "dg_trip";
    case EventKind::dg_restore: return "dg_restore";
    case EventKind::load_change: return "load_change";
    case EventKind::comm_loss: return "comm_loss";
    case EventKind::comm_restore: return "comm_restore";
  }
  return "?";
}

// load_change adds `magnitude` (pu) to the target bus's active demand.
struct Event {
  int at_tick = 0;
  EventKind kind = EventKind::dg_trip;
  int target = 0;
  double magnitude = 0.0;
};

struct Scenario {
  std::vector<Event> events;  // stable-sorted by tick
  int final_tick = 0;
};

inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("scenario parse error: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("scenario must be a JSON object");
  static const std::map<std::string, EventKind> kinds{{"dg_trip", EventKind::dg_trip},
                                                      {"dg_restore", EventKind::dg_restore},
                                                      {"load_change", EventKind::load_change},
                                                      {"comm_loss", EventKind::comm_loss},
                                                      {"comm_restore", EventKind::comm_restore}};
  Scenario sc;
  int last = 0;
  std::size_t k = 0;
  for (const auto& je : detail::array_field(doc, "events")) {
    std::string where = "events[" + std::to_string(k++) + "]";
    Event e;
    e.at_tick = detail::required<int>(je, "tick", where);
    if (e.at_tick < 0) throw InputError(where + ": tick must be nonnegative");
    auto kind = detail::required<std::string>(je, "kind", where);
    auto it = kinds.find(kind);
    if (it == kinds.end()) throw InputError(where + ": unknown event kind '" + kind + "'");
    e.kind = it->second;
    e.target = detail::required<int>(je, "target", where);
    e.magnitude = detail::optional_field<double>(je, "magnitude", 0.0, where);
    if (!std::isfinite(e.magnitude)) throw InputError(where + ": magnitude must be finite");
    last = std::max(last, e.at_tick);
    sc.events.push_back(e);
  }
  std::stable_sort(sc.events.begin(), sc.events.end(), [](auto& a, auto& b) { return a.at_tick < b.at_tick; });
  sc.final_tick = detail::optional_field<int>(doc, "final_tick", last + 2, "scenario");
  if (sc.final_tick < last) throw InputError("scenario: final_tick precedes the last event");
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  try {
    return parse_scenario(text);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// Every target must exist: DG ids for DG and communication events, bus ids
// for load changes.
inline void validate_scenario(const Scenario& sc, const NetworkModel& net) {
  for (const auto& e : sc.events) {
    if (e.kind == EventKind::load_change) {
      if (!net.find_bus(e.target)) throw InputError("scenario references unknown bus id " + std::to_string(e.target));
    } else if (!net.find_dg(e.target)) {
      throw InputError("scenario references unknown DG id " + std::to_string(e.target));
    }
  }
}

class SimulationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct SimConfig {
  double v_lo = 0.95;
  double v_hi = 1.05;
  // Limits handed to the LP are tightened by this much so the nonlinear
  // result lands inside the band.
  double control_margin = 1e-3;
  double detect_tol = 1e-9;
  ControlMode mode = ControlMode::reactive;
  SensitivityKind grouping = SensitivityKind::VQ;
  PeakPolicy peak = PeakPolicy::global;
  PowerFlowOptions power_flow;
};

struct CommunityAgent {
  int community = 0;
  std::vector<int> buses;   // ascending, including the slack if assigned here
  std::vector<int> dg_ids;  // DGs located in the community, ascending
  CommunitySubsets subsets;
  bool degraded = false;
  bool in_incident = false;
  bool reorganize = false;
  std::vector<Message> inbox;
};

struct DgAgent {
  int dg = 0;
  int community = 0;
  bool reachable = true;
  double saved_p = 0.0;
  double saved_q = 0.0;
  std::vector<Message> inbox;
};

struct ControlRecord {
  int tick = 0;
  int community = 0;
  ControlDirection direction = ControlDirection::overvoltage;
  ControlMode mode = ControlMode::reactive;
  std::vector<int> violated;
  std::vector<int> dg_ids;
  std::vector<double> x;
  double objective = 0.0;
  bool feasible = false;
  std::string status;
};

struct EventRecord {
  int tick = 0;
  std::string kind;
  int target = 0;
  double magnitude = 0.0;
  std::string detail;
};

struct SubsetRecord {
  int tick = 0;
  int community = 0;
  int generation = 0;
  std::string listing;
};

struct SimCounters {
  int violations = 0;  // incidents: a community entering violation
  int resolved = 0;
  int unresolved = 0;
  int control_actions = 0;
  int infeasible = 0;
  int regenerations = 0;
};

struct SimulationState {
  int tick = 0;
  SimConfig config;
  NetworkModel net;
  PowerFlowSolution pf;
  SensitivityMatrix sens;  // at the current operating point, used by the LPs
  DgColumns grouping;      // fixed at initialization, used for subsets
  NetworkPartition partition;

  std::vector<CommunityAgent> cas;
  std::map<int, int> ba_community;  // bus id -> community
  std::map<int, DgAgent> das;

  std::deque<Event> pending;
  long next_seq = 0;

  std::vector<Message> message_log;
  std::vector<EventRecord> event_log;
  std::vector<ControlRecord> control_log;
  std::vector<SubsetRecord> subset_log;
  std::vector<std::vector<double>> voltage_log;  // per tick, indexed like net.buses
  SimCounters counters;

  int community_of(const AgentId& a) const {
    switch (a.kind) {
      case AgentKind::CA: return a.index;
      case AgentKind::BA: return ba_community.at(a.index);
      case AgentKind::DA: return das.at(a.index).community;
    }
    return -1;
  }
  CommunityAgent& ca(int community) { return cas.at(static_cast<std::size_t>(community)); }
  const CommunityAgent& ca(int community) const { return cas.at(static_cast<std::size_t>(community)); }
};

namespace detail {

inline void send(SimulationState& s, AgentId from, AgentId to, MessageKind kind, int subject, double value,
                 ControlMode mode = ControlMode::reactive) {
  Message m{from, to, kind, subject, value, s.tick, s.next_seq++, mode};
  s.message_log.push_back(m);
  switch (to.kind) {
    case AgentKind::CA: s.ca(to.index).inbox.push_back(m); break;
    case AgentKind::DA: s.das.at(to.index).inbox.push_back(m); break;
    case AgentKind::BA: break;  // bus agents only log notices
  }
}

inline void drain_order(std::vector<Message>& inbox) {
  std::sort(inbox.begin(), inbox.end(), [](const Message& a, const Message& b) {
    if (a.sent_at != b.sent_at) return a.sent_at < b.sent_at;
    if (a.from != b.from) return a.from < b.from;
    return a.seq < b.seq;
  });
}

inline bool dg_available(const SimulationState& s, int dg) {
  const DG* g = s.net.find_dg(dg);
  return g && g->online && s.das.at(dg).reachable;
}

inline void resolve(SimulationState& s) {
  PowerFlowOptions opt = s.config.power_flow;
  opt.flat_start = false;
  PowerFlowSolution pf = solve_power_flow(s.net, opt);
  if (!pf.converged) {
    // Retry from a flat start before giving up.
    opt.flat_start = true;
    pf = solve_power_flow(s.net, opt);
  }
  if (!pf.converged)
    throw SimulationError("power flow diverged at tick " + std::to_string(s.tick) +
                          " (max mismatch " + format_double(pf.max_mismatch) + ")");
  s.pf = std::move(pf);
  store_operating_point(s.net, s.pf);
  s.sens = compute_sensitivity_matrix(s.net, s.pf);
}

inline std::vector<VoltageViolation> community_violations(const SimulationState& s, const CommunityAgent& ca) {
  BusLookup lookup(s.net);
  std::vector<VoltageViolation> out;
  for (int bus : ca.buses) {
    double v = s.pf.v_mag[lookup.at(bus)];
    if (v > s.config.v_hi + s.config.detect_tol) out.push_back({bus, v, true});
    if (v < s.config.v_lo - s.config.detect_tol) out.push_back({bus, v, false});
  }
  return out;
}

}  // namespace detail

// Recomputes a community's subsets over its currently available DGs and
// bumps the generation counter. With no available DG the community enters
// degraded mode.
inline void self_organize(SimulationState& s, int community) {
  CommunityAgent& ca = s.ca(community);
  ++ca.subsets.generation;
  ++s.counters.regenerations;
  CommunityDgView view = community_view(s.grouping, s.net, ca.buses);
  std::vector<bool> avail;
  for (int id : view.dg_ids) avail.push_back(detail::dg_available(s, id));
  const int generation = ca.subsets.generation;
  try {
    Eigen::MatrixXd d = build_community_dg_matrix(view.sens, avail);
    ca.subsets = derive_subsets(community, d, view.node_ids, view.dg_ids, view.dg_buses, avail);
    ca.degraded = false;
  } catch (const NoAvailableDgError&) {
    ca.subsets = CommunitySubsets{community, {}, 0};
    if (!ca.degraded)
      s.event_log.push_back({s.tick, "alarm_degraded", community, 0.0, "community has no available DG"});
    ca.degraded = true;
  }
  ca.subsets.generation = generation;
  s.subset_log.push_back({s.tick, community, generation, ca.subsets.listing()});
}

inline SimulationState initialize(const NetworkModel& net, const NetworkPartition& partition,
                                  const SensitivityMatrix& sens, const SimConfig& config = {}) {
  SimulationState s;
  s.config = config;
  s.net = net;
  s.partition = partition;
  for (const auto& b : net.buses)
    if (!partition.community_by_bus.count(b.id))
      throw InputError("partition does not cover bus " + std::to_string(b.id));

  PowerFlowOptions opt = config.power_flow;
  s.pf = solve_power_flow(s.net, opt);
  if (!s.pf.converged) throw SimulationError("base power flow did not converge");
  store_operating_point(s.net, s.pf);
  s.sens = sens;
  s.grouping = dg_columns(sens, s.net, config.grouping);

  for (const auto& [bus, c] : partition.community_by_bus) s.ba_community[bus] = c;
  s.cas.resize(static_cast<std::size_t>(partition.n_communities()));
  for (int c = 0; c < partition.n_communities(); ++c) {
    auto& ca = s.ca(c);
    ca.community = c;
    ca.buses = partition.buses_of(c);
  }
  for (int id : s.net.dg_ids_sorted()) {
    const DG* g = s.net.find_dg(id);
    int c = s.ba_community.at(g->bus);
    s.das[id] = DgAgent{id, c, true, g->p_out, g->q_out, {}};
    s.ca(c).dg_ids.push_back(id);
  }
  for (auto& ca : s.cas) {
    CommunityDgView view = community_view(s.grouping, s.net, ca.buses);
    std::vector<bool> avail;
    for (int id : view.dg_ids) avail.push_back(detail::dg_available(s, id));
    try {
      Eigen::MatrixXd d = build_community_dg_matrix(view.sens, avail);
      ca.subsets = derive_subsets(ca.community, d, view.node_ids, view.dg_ids, view.dg_buses, avail);
    } catch (const NoAvailableDgError&) {
      ca.subsets = CommunitySubsets{ca.community, {}, 0};
      ca.degraded = true;
      s.event_log.push_back({0, "alarm_degraded", ca.community, 0.0, "community has no available DG"});
    }
    s.subset_log.push_back({0, ca.community, 0, ca.subsets.listing()});
  }
  return s;
}

inline void schedule(SimulationState& s, const Scenario& sc) {
  for (const auto& e : sc.events) s.pending.push_back(e);
  std::stable_sort(s.pending.begin(), s.pending.end(), [](auto& a, auto& b) { return a.at_tick < b.at_tick; });
}

namespace detail {

inline bool apply_event(SimulationState& s, const Event& e) {
  EventRecord rec{s.tick, to_string(e.kind), e.target, e.magnitude, ""};
  bool physical = false;
  if (e.kind == EventKind::load_change) {
    Bus* b = s.net.find_bus(e.target);
    if (!b) throw InputError("scenario references unknown bus id " + std::to_string(e.target));
    b->p_load += e.magnitude;
    physical = true;
  } else {
    DG* g = s.net.find_dg(e.target);
    if (!g) throw InputError("scenario references unknown DG id " + std::to_string(e.target));
    DgAgent& da = s.das.at(e.target);
    const AgentId me{AgentKind::DA, e.target}, ca{AgentKind::CA, da.community};
    switch (e.kind) {
      case EventKind::dg_trip:
        if (!g->online) {
          rec.detail = "already offline";
          break;
        }
        da.saved_p = g->p_out;
        da.saved_q = g->q_out;
        g->p_out = 0.0;
        g->q_out = 0.0;
        g->online = false;
        physical = true;
        if (da.reachable) {
          send(s, me, ca, MessageKind::trip_notice, e.target, 0.0);
        } else {
          rec.detail = "trip not reported: communication lost";
        }
        break;
      case EventKind::dg_restore:
        if (g->online) {
          rec.detail = "already online";
          break;
        }
        g->online = true;
        g->p_out = da.saved_p;
        g->q_out = da.saved_q;
        physical = true;
        if (da.reachable) send(s, me, ca, MessageKind::restore_notice, e.target, 0.0);
        break;
      case EventKind::comm_loss:
        if (!da.reachable) break;
        da.reachable = false;
        // The CA notices the silent DA itself; nothing can be sent.
        s.ca(da.community).reorganize = true;
        break;
      case EventKind::comm_restore:
        if (da.reachable) break;
        da.reachable = true;
        send(s, me, ca, MessageKind::restore_notice, e.target, 0.0);
        break;
      case EventKind::load_change: break;
    }
  }
  s.event_log.push_back(std::move(rec));
  return physical;
}

inline void run_community_control(SimulationState& s, CommunityAgent& ca, const std::vector<Message>& reports) {
  std::vector<int> violated;
  double worst_over = 0.0, worst_under = 0.0;
  for (const auto& m : reports) {
    violated.push_back(m.subject);
    worst_over = std::max(worst_over, m.value - s.config.v_hi);
    worst_under = std::max(worst_under, s.config.v_lo - m.value);
  }
  std::sort(violated.begin(), violated.end());
  violated.erase(std::unique(violated.begin(), violated.end()), violated.end());
  const ControlDirection dir = worst_over >= worst_under ? ControlDirection::overvoltage : ControlDirection::undervoltage;
  const ControlMode mode = dir == ControlDirection::undervoltage ? ControlMode::reactive : s.config.mode;

  ControlRecord rec;
  rec.tick = s.tick;
  rec.community = ca.community;
  rec.direction = dir;
  rec.mode = mode;
  rec.violated = violated;

  auto notify_infeasible = [&](const std::string& status) {
    rec.feasible = false;
    rec.status = status;
    ++s.counters.infeasible;
    for (const auto& m : reports)
      send(s, {AgentKind::CA, ca.community}, m.from, MessageKind::infeasible_notice, m.subject, m.value);
  };

  std::vector<int> dgs;
  for (int id : ca.subsets.dgs_for(violated))
    if (dg_available(s, id)) dgs.push_back(id);
  rec.dg_ids = dgs;
  if (ca.degraded || dgs.empty()) {
    notify_infeasible("no_available_dg");
    s.control_log.push_back(std::move(rec));
    return;
  }

  ControlProblem problem = build_control_problem(s.net, s.pf, s.sens, ca.buses, dgs, dir, mode,
                                                 s.config.v_lo + s.config.control_margin,
                                                 s.config.v_hi - s.config.control_margin);
  ControlSolution sol = solve_lp(formulate_lp(problem));
  rec.objective = sol.objective;
  if (!sol.feasible) {
    notify_infeasible(to_string(sol.status));
    s.control_log.push_back(std::move(rec));
    // The current subsets cannot fix the violation: regroup over what is
    // available now.
    self_organize(s, ca.community);
    return;
  }
  rec.feasible = true;
  rec.status = "optimal";
  rec.x = sol.x;
  ++s.counters.control_actions;
  for (std::size_t i = 0; i < sol.dg_ids.size(); ++i) {
    if (std::abs(sol.x[i]) <= 1e-12) continue;
    send(s, {AgentKind::CA, ca.community}, {AgentKind::DA, sol.dg_ids[i]}, MessageKind::adjustment_command,
         sol.dg_ids[i], sol.x[i], mode);
  }
  s.control_log.push_back(std::move(rec));
}

}  // namespace detail

// Advances the simulation by one tick. Throws SimulationError if a power
// flow diverges; the state then reflects everything applied so far.
inline void step(SimulationState& s) {
  // 1. scenario events
  bool changed = false;
  while (!s.pending.empty() && s.pending.front().at_tick <= s.tick) {
    changed |= detail::apply_event(s, s.pending.front());
    s.pending.pop_front();
  }
  // 2. operating point
  if (changed) detail::resolve(s);

  // 3. bus agents
  BusLookup lookup(s.net);
  std::vector<int> bus_ids;
  for (const auto& b : s.net.buses) bus_ids.push_back(b.id);
  std::sort(bus_ids.begin(), bus_ids.end());
  for (int bus : bus_ids) {
    double v = s.pf.v_mag[lookup.at(bus)];
    if (v > s.config.v_hi + s.config.detect_tol || v < s.config.v_lo - s.config.detect_tol) {
      int c = s.ba_community.at(bus);
      detail::send(s, {AgentKind::BA, bus}, {AgentKind::CA, c}, MessageKind::violation_report, bus, v);
    }
  }

  // 4. community agents
  for (auto& ca : s.cas) {
    auto inbox = std::move(ca.inbox);
    ca.inbox.clear();
    detail::drain_order(inbox);
    bool regroup = ca.reorganize;
    std::vector<Message> reports;
    for (const auto& m : inbox) {
      if (m.kind == MessageKind::trip_notice || m.kind == MessageKind::restore_notice) regroup = true;
      if (m.kind == MessageKind::violation_report) reports.push_back(m);
    }
    ca.reorganize = false;
    if (regroup) self_organize(s, ca.community);
    if (reports.empty()) continue;
    if (!ca.in_incident) {
      ca.in_incident = true;
      ++s.counters.violations;
    }
    detail::run_community_control(s, ca, reports);
  }

  // 5. DG agents
  bool actuated = false;
  for (auto& [id, da] : s.das) {
    auto inbox = std::move(da.inbox);
    da.inbox.clear();
    detail::drain_order(inbox);
    for (const auto& m : inbox) {
      if (m.kind != MessageKind::adjustment_command) continue;
      apply_adjustments(s.net, m.mode, {id}, {m.value});
      actuated = true;
    }
  }

  // 6. settle and log
  if (actuated) detail::resolve(s);
  for (auto& ca : s.cas) {
    if (ca.in_incident && detail::community_violations(s, ca).empty()) {
      ca.in_incident = false;
      ++s.counters.resolved;
    }
  }
  s.voltage_log.push_back(s.pf.v_mag);
  ++s.tick;
}

struct RunReport {
  SimulationState state;
  SimCounters counters;

  std::string summary_line() const {
    return "violations:" + std::to_string(counters.violations) + " resolved:" + std::to_string(counters.resolved) +
           " unresolved:" + std::to_string(counters.unresolved) +
           " control_actions:" + std::to_string(counters.control_actions) +
           " subset_regenerations:" + std::to_string(counters.regenerations);
  }
};

inline RunReport run_scenario(const NetworkModel& net, const Scenario& sc, const SimConfig& config,
                              const NetworkPartition& partition, const SensitivityMatrix& sens) {
  validate_scenario(sc, net);
  RunReport r{initialize(net, partition, sens, config), {}};
  schedule(r.state, sc);
  while (r.state.tick <= sc.final_tick) step(r.state);
  r.counters = r.state.counters;
  for (const auto& ca : r.state.cas)
    if (ca.in_incident) ++r.counters.unresolved;
  r.state.counters = r.counters;
  return r;
}

// Solves the base case, partitions the network and runs the scenario.
inline RunReport run_scenario(const NetworkModel& net, const Scenario& sc, const SimConfig& config = {}) {
  validate_scenario(sc, net);
  PowerFlowSolution pf = solve_power_flow(net, config.power_flow);
  if (!pf.converged) throw SimulationError("base power flow did not converge");
  SensitivityMatrix sens = compute_sensitivity_matrix(net, pf);
  NetworkPartition part = partition_network(net, sens, config.grouping, config.peak);
  return run_scenario(net, sc, config, part, sens);
}

// ---------------------------------------------------------------------------
// Report directory

inline void write_report(const RunReport& r, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const SimulationState& s = r.state;
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + (dir / name).string());
    return out;
  };

  {
    auto out = open("events.csv");
    out << "tick,kind,target,magnitude,detail\n";
    for (const auto& e : s.event_log)
      out << e.tick << ',' << e.kind << ',' << e.target << ',' << format_double(e.magnitude) << ','
          << csv_field(e.detail) << '\n';
  }
  {
    auto out = open("messages.csv");
    out << "tick,seq,from,to,kind,subject,value\n";
    for (const auto& m : s.message_log)
      out << m.sent_at << ',' << m.seq << ',' << m.from.str() << ',' << m.to.str() << ',' << to_string(m.kind) << ','
          << m.subject << ',' << format_double(m.value) << '\n';
  }
  {
    auto out = open("controls.csv");
    out << "tick,community,direction,mode,violated_nodes,subset_dgs,x,objective,feasible,status\n";
    for (const auto& c : s.control_log) {
      std::string xs;
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        if (i) xs += ' ';
        xs += std::to_string(c.dg_ids[i]) + "=" + format_double(c.x[i]);
      }
      out << c.tick << ',' << c.community << ',' << to_string(c.direction) << ',' << to_string(c.mode) << ','
          << join_ints(c.violated) << ',' << join_ints(c.dg_ids) << ',' << xs << ','
          << (c.feasible ? format_double(c.objective) : "") << ',' << (c.feasible ? "true" : "false") << ','
          << c.status << '\n';
    }
  }
  {
    auto out = open("voltages.csv");
    auto ext = open("voltage_extremes.csv");
    out << "tick,bus,v_mag\n";
    ext << "tick,v_min,v_min_bus,v_max,v_max_bus\n";
    std::vector<std::size_t> order(s.net.buses.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.net.buses[a].id < s.net.buses[b].id; });
    for (std::size_t t = 0; t < s.voltage_log.size(); ++t) {
      const auto& v = s.voltage_log[t];
      std::size_t lo = order.front(), hi = order.front();
      for (auto i : order) {
        out << t << ',' << s.net.buses[i].id << ',' << format_double(v[i]) << '\n';
        if (v[i] < v[lo]) lo = i;
        if (v[i] > v[hi]) hi = i;
      }
      ext << t << ',' << format_double(v[lo]) << ',' << s.net.buses[lo].id << ',' << format_double(v[hi]) << ','
          << s.net.buses[hi].id << '\n';
    }
  }
  {
    auto out = open("subsets_history.csv");
    out << "tick,community,generation,subsets\n";
    for (const auto& h : s.subset_log)
      out << h.tick << ',' << h.community << ',' << h.generation << ',' << csv_field(h.listing) << '\n';
  }
  {
    auto out = open("summary.txt");
    out << r.summary_line() << '\n';
  }
}

}  // namespace dgcomm
