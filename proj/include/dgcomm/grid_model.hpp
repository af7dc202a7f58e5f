#pragma once

// Network data model (per-unit), file I/O and the synthetic meshed-network
// generator.
//
// In memory every quantity is per-unit on the network MVA base and angles are
// radians. The network file carries physical units (MW, Mvar, ohm, siemens,
// degrees); the loader normalizes and the writer converts back.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dgcomm/common.hpp"

namespace dgcomm {

enum class BusKind { slack, pq };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::pq;
  double base_kv = 1.0;
  double v_mag = 1.0;  // pu; fixed setpoint on the slack bus
  double v_ang = 0.0;  // rad
  double p_load = 0.0;
  double q_load = 0.0;

  bool operator==(const Bus&) const = default;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;

  bool operator==(const Branch&) const = default;
};

struct Transformer {
  int primary_bus = 0;
  int secondary_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double tap = 1.0;
  double phase_shift = 0.0;  // rad

  bool operator==(const Transformer&) const = default;
};

// A distributed generator. Headroom is a box: output may rise by up to
// *_surplus and fall by up to *_surplus_down.
struct DG {
  int id = 0;
  int bus = 0;
  double p_out = 0.0;
  double q_out = 0.0;
  double p_surplus = 0.0;
  double q_surplus = 0.0;
  double p_surplus_down = 0.0;
  double q_surplus_down = 0.0;
  bool online = true;

  bool operator==(const DG&) const = default;
};

struct NetworkModel {
  double s_base = 1.0;  // MVA
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Transformer> transformers;
  std::vector<DG> dgs;

  bool operator==(const NetworkModel&) const = default;

  const Bus* find_bus(int id) const {
    for (const auto& b : buses)
      if (b.id == id) return &b;
    return nullptr;
  }
  Bus* find_bus(int id) {
    for (auto& b : buses)
      if (b.id == id) return &b;
    return nullptr;
  }
  const DG* find_dg(int id) const {
    for (const auto& g : dgs)
      if (g.id == id) return &g;
    return nullptr;
  }
  DG* find_dg(int id) {
    for (auto& g : dgs)
      if (g.id == id) return &g;
    return nullptr;
  }
  const DG* dg_at_bus(int bus_id) const {
    for (const auto& g : dgs)
      if (g.bus == bus_id) return &g;
    return nullptr;
  }

  std::optional<int> slack_id() const {
    for (const auto& b : buses)
      if (b.kind == BusKind::slack) return b.id;
    return std::nullopt;
  }

  // Bus ids of every non-slack bus in ascending order. This ordering defines
  // the rows and columns of every sensitivity matrix.
  std::vector<int> non_slack_ids() const {
    std::vector<int> ids;
    for (const auto& b : buses)
      if (b.kind != BusKind::slack) ids.push_back(b.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  std::vector<int> dg_ids_sorted() const {
    std::vector<int> ids;
    for (const auto& g : dgs) ids.push_back(g.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }
};

// Maps bus ids to positions in NetworkModel::buses.
class BusLookup {
 public:
  explicit BusLookup(const NetworkModel& net) {
    for (std::size_t i = 0; i < net.buses.size(); ++i) pos_.emplace(net.buses[i].id, i);
  }
  std::optional<std::size_t> find(int id) const {
    auto it = pos_.find(id);
    if (it == pos_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t at(int id) const {
    auto it = pos_.find(id);
    if (it == pos_.end()) throw InputError("unknown bus id " + std::to_string(id));
    return it->second;
  }

 private:
  std::unordered_map<int, std::size_t> pos_;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string code;     // e.g. "missing-slack", "duplicate-bus-id"
  std::string element;  // e.g. "bus 5", "branch 2-3"
  std::string message;

  std::string to_string() const { return code + " (" + element + "): " + message; }
};

class ValidationError : public InputError {
 public:
  explicit ValidationError(std::vector<Violation> v)
      : InputError(summarize(v)), violations_(std::move(v)) {}
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  static std::string summarize(const std::vector<Violation>& v) {
    return "invalid network: " + join(v, "; ", [](const Violation& x) { return x.to_string(); });
  }
  std::vector<Violation> violations_;
};

namespace detail {

inline std::string branch_name(int a, int b) {
  return std::to_string(a) + "-" + std::to_string(b);
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace detail

inline std::vector<Violation> validate_network(const NetworkModel& net) {
  std::vector<Violation> out;
  auto add = [&](std::string code, std::string element, std::string msg) {
    out.push_back({std::move(code), std::move(element), std::move(msg)});
  };

  if (!(net.s_base > 0.0) || !std::isfinite(net.s_base))
    add("bad-s-base", "network", "s_base must be positive");

  std::map<int, const Bus*> bus_by_id;
  int n_slack = 0;
  for (const auto& b : net.buses) {
    std::string el = "bus " + std::to_string(b.id);
    if (!bus_by_id.emplace(b.id, &b).second) add("duplicate-bus-id", el, "bus id appears more than once");
    if (b.kind == BusKind::slack) ++n_slack;
    if (!(b.base_kv > 0.0) || !std::isfinite(b.base_kv)) add("bad-base-kv", el, "base_kv must be positive");
    if (!detail::finite(b.p_load) || !detail::finite(b.q_load)) add("nonfinite-load", el, "load must be finite");
    if (!detail::finite(b.v_mag) || !detail::finite(b.v_ang) || !(b.v_mag > 0.0))
      add("bad-voltage", el, "voltage must be finite with positive magnitude");
  }
  if (n_slack == 0) add("missing-slack", "network", "no slack bus");
  if (n_slack > 1) add("multiple-slack", "network", std::to_string(n_slack) + " slack buses");

  auto known = [&](int id) { return bus_by_id.count(id) != 0; };

  for (const auto& br : net.branches) {
    std::string el = "branch " + detail::branch_name(br.from_bus, br.to_bus);
    if (br.from_bus == br.to_bus) add("self-loop", el, "branch connects a bus to itself");
    if (!known(br.from_bus)) add("unknown-bus", el, "from_bus " + std::to_string(br.from_bus) + " does not exist");
    if (!known(br.to_bus)) add("unknown-bus", el, "to_bus " + std::to_string(br.to_bus) + " does not exist");
    if (br.r == 0.0 && br.x == 0.0) add("zero-impedance", el, "r and x are both zero");
    if (!detail::finite(br.r) || !detail::finite(br.x) || !detail::finite(br.b_shunt))
      add("nonfinite-impedance", el, "impedance must be finite");
    if (known(br.from_bus) && known(br.to_bus) &&
        bus_by_id[br.from_bus]->base_kv != bus_by_id[br.to_bus]->base_kv)
      add("base-kv-mismatch", el, "branch joins buses of different base_kv; use a transformer");
  }

  for (const auto& tr : net.transformers) {
    std::string el = "transformer " + detail::branch_name(tr.primary_bus, tr.secondary_bus);
    if (tr.primary_bus == tr.secondary_bus) add("self-loop", el, "transformer connects a bus to itself");
    if (!known(tr.primary_bus))
      add("unknown-bus", el, "primary_bus " + std::to_string(tr.primary_bus) + " does not exist");
    if (!known(tr.secondary_bus))
      add("unknown-bus", el, "secondary_bus " + std::to_string(tr.secondary_bus) + " does not exist");
    if (!(tr.x > 0.0) || !std::isfinite(tr.x)) add("bad-transformer-x", el, "x must be positive");
    if (!(tr.tap > 0.0) || !std::isfinite(tr.tap)) add("bad-tap", el, "tap must be positive");
    if (!detail::finite(tr.r) || !detail::finite(tr.phase_shift))
      add("nonfinite-impedance", el, "r and phase_shift must be finite");
  }

  std::set<int> dg_ids;
  std::map<int, int> dg_on_bus;
  for (const auto& g : net.dgs) {
    std::string el = "dg " + std::to_string(g.id);
    if (!dg_ids.insert(g.id).second) add("duplicate-dg-id", el, "dg id appears more than once");
    auto it = bus_by_id.find(g.bus);
    if (it == bus_by_id.end()) {
      add("unknown-bus", el, "bus " + std::to_string(g.bus) + " does not exist");
    } else if (it->second->kind == BusKind::slack) {
      add("dg-on-slack", el, "dg sits on slack bus " + std::to_string(g.bus));
    }
    if (auto [pos, fresh] = dg_on_bus.emplace(g.bus, g.id); !fresh)
      add("multiple-dg-per-bus", el, "bus " + std::to_string(g.bus) + " already hosts dg " + std::to_string(pos->second));
    if (!(g.p_surplus >= 0.0) || !(g.q_surplus >= 0.0) || !(g.p_surplus_down >= 0.0) ||
        !(g.q_surplus_down >= 0.0))
      add("negative-surplus", el, "surplus headroom must be nonnegative");
    if (!detail::finite(g.p_out) || !detail::finite(g.q_out) || !std::isfinite(g.p_surplus) ||
        !std::isfinite(g.q_surplus))
      add("nonfinite-dg", el, "dg quantities must be finite");
  }

  // Connectivity over every branch and transformer with known endpoints.
  if (!net.buses.empty() && bus_by_id.size() == net.buses.size()) {
    std::map<int, std::vector<int>> adj;
    auto link = [&](int a, int b) {
      if (known(a) && known(b)) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }
    };
    for (const auto& br : net.branches) link(br.from_bus, br.to_bus);
    for (const auto& tr : net.transformers) link(tr.primary_bus, tr.secondary_bus);
    std::set<int> seen{net.buses.front().id};
    std::vector<int> stack{net.buses.front().id};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (seen.insert(v).second) stack.push_back(v);
    }
    for (const auto& b : net.buses)
      if (!seen.count(b.id))
        add("disconnected", "bus " + std::to_string(b.id), "bus is not connected to bus " +
                                                              std::to_string(net.buses.front().id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File format

namespace detail {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

inline double z_base(double kv, double s_base) { return kv * kv / s_base; }

template <typename T>
T required(const nlohmann::json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw InputError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T optional_field(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

inline const nlohmann::json& array_field(const nlohmann::json& j, const char* key) {
  static const nlohmann::json empty = nlohmann::json::array();
  auto it = j.find(key);
  if (it == j.end()) return empty;
  if (!it->is_array()) throw InputError(std::string("'") + key + "' must be an array");
  return *it;
}

}  // namespace detail

// Builds a per-unit model from the JSON document. Does not validate.
inline NetworkModel network_from_json(const nlohmann::json& doc) {
  using detail::optional_field;
  using detail::required;
  if (!doc.is_object()) throw InputError("network document must be a JSON object");

  NetworkModel net;
  net.s_base = required<double>(doc, "s_base_mva", "network");
  if (!(net.s_base > 0.0)) throw InputError("network: s_base_mva must be positive");

  std::map<int, double> kv_of;
  std::size_t k = 0;
  for (const auto& jb : detail::array_field(doc, "buses")) {
    std::string where = "buses[" + std::to_string(k++) + "]";
    Bus b;
    b.id = required<int>(jb, "id", where);
    auto kind = required<std::string>(jb, "kind", where);
    if (kind == "slack") {
      b.kind = BusKind::slack;
    } else if (kind == "pq") {
      b.kind = BusKind::pq;
    } else {
      throw InputError(where + ": unknown bus kind '" + kind + "'");
    }
    b.base_kv = required<double>(jb, "base_kv", where);
    b.v_mag = optional_field<double>(jb, "v_mag", 1.0, where);
    b.v_ang = optional_field<double>(jb, "v_ang", 0.0, where) / detail::kDegPerRad;
    b.p_load = optional_field<double>(jb, "p_load", 0.0, where) / net.s_base;
    b.q_load = optional_field<double>(jb, "q_load", 0.0, where) / net.s_base;
    kv_of[b.id] = b.base_kv;
    net.buses.push_back(b);
  }

  k = 0;
  for (const auto& jl : detail::array_field(doc, "branches")) {
    std::string where = "branches[" + std::to_string(k++) + "]";
    Branch br;
    br.from_bus = required<int>(jl, "from_bus", where);
    br.to_bus = required<int>(jl, "to_bus", where);
    auto it = kv_of.find(br.from_bus);
    if (it == kv_of.end())
      throw InputError(where + ": from_bus " + std::to_string(br.from_bus) + " does not exist");
    double zb = detail::z_base(it->second, net.s_base);
    br.r = required<double>(jl, "r", where) / zb;
    br.x = required<double>(jl, "x", where) / zb;
    br.b_shunt = optional_field<double>(jl, "b_shunt", 0.0, where) * zb;
    net.branches.push_back(br);
  }

  k = 0;
  for (const auto& jt : detail::array_field(doc, "transformers")) {
    std::string where = "transformers[" + std::to_string(k++) + "]";
    Transformer tr;
    tr.primary_bus = required<int>(jt, "primary_bus", where);
    tr.secondary_bus = required<int>(jt, "secondary_bus", where);
    tr.r = required<double>(jt, "r", where);
    tr.x = required<double>(jt, "x", where);
    tr.tap = optional_field<double>(jt, "tap", 1.0, where);
    tr.phase_shift = optional_field<double>(jt, "phase_shift", 0.0, where) / detail::kDegPerRad;
    net.transformers.push_back(tr);
  }

  k = 0;
  for (const auto& jg : detail::array_field(doc, "dgs")) {
    std::string where = "dgs[" + std::to_string(k++) + "]";
    DG g;
    g.id = required<int>(jg, "id", where);
    g.bus = required<int>(jg, "bus", where);
    g.p_out = optional_field<double>(jg, "p_out", 0.0, where) / net.s_base;
    g.q_out = optional_field<double>(jg, "q_out", 0.0, where) / net.s_base;
    g.p_surplus = optional_field<double>(jg, "p_surplus", 0.0, where) / net.s_base;
    g.q_surplus = optional_field<double>(jg, "q_surplus", 0.0, where) / net.s_base;
    // Curtailment can take active output down to zero; reactive headroom is
    // symmetric unless the file says otherwise.
    g.p_surplus_down = optional_field<double>(jg, "p_surplus_down", g.p_out * net.s_base, where) / net.s_base;
    g.q_surplus_down = optional_field<double>(jg, "q_surplus_down", g.q_surplus * net.s_base, where) / net.s_base;
    g.online = optional_field<bool>(jg, "online", true, where);
    net.dgs.push_back(g);
  }
  return net;
}

inline nlohmann::ordered_json network_to_json(const NetworkModel& net) {
  using nlohmann::ordered_json;
  const double s = net.s_base;
  ordered_json doc;
  doc["s_base_mva"] = s;

  std::map<int, double> kv_of;
  ordered_json buses = ordered_json::array();
  for (const auto& b : net.buses) {
    kv_of[b.id] = b.base_kv;
    ordered_json jb;
    jb["id"] = b.id;
    jb["kind"] = b.kind == BusKind::slack ? "slack" : "pq";
    jb["base_kv"] = b.base_kv;
    jb["v_mag"] = b.v_mag;
    jb["v_ang"] = b.v_ang * detail::kDegPerRad;
    jb["p_load"] = b.p_load * s;
    jb["q_load"] = b.q_load * s;
    buses.push_back(std::move(jb));
  }
  doc["buses"] = std::move(buses);

  ordered_json branches = ordered_json::array();
  for (const auto& br : net.branches) {
    double zb = detail::z_base(kv_of.at(br.from_bus), s);
    ordered_json jl;
    jl["from_bus"] = br.from_bus;
    jl["to_bus"] = br.to_bus;
    jl["r"] = br.r * zb;
    jl["x"] = br.x * zb;
    jl["b_shunt"] = br.b_shunt / zb;
    branches.push_back(std::move(jl));
  }
  doc["branches"] = std::move(branches);

  ordered_json transformers = ordered_json::array();
  for (const auto& tr : net.transformers) {
    ordered_json jt;
    jt["primary_bus"] = tr.primary_bus;
    jt["secondary_bus"] = tr.secondary_bus;
    jt["r"] = tr.r;
    jt["x"] = tr.x;
    jt["tap"] = tr.tap;
    jt["phase_shift"] = tr.phase_shift * detail::kDegPerRad;
    transformers.push_back(std::move(jt));
  }
  doc["transformers"] = std::move(transformers);

  ordered_json dgs = ordered_json::array();
  for (const auto& g : net.dgs) {
    ordered_json jg;
    jg["id"] = g.id;
    jg["bus"] = g.bus;
    jg["p_out"] = g.p_out * s;
    jg["q_out"] = g.q_out * s;
    jg["p_surplus"] = g.p_surplus * s;
    jg["q_surplus"] = g.q_surplus * s;
    jg["p_surplus_down"] = g.p_surplus_down * s;
    jg["q_surplus_down"] = g.q_surplus_down * s;
    jg["online"] = g.online;
    dgs.push_back(std::move(jg));
  }
  doc["dgs"] = std::move(dgs);
  return doc;
}

// Parses and validates; throws InputError on malformed text and
// ValidationError when any invariant fails.
inline NetworkModel parse_network(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("parse error: ") + e.what());
  }
  NetworkModel net = network_from_json(doc);
  if (auto v = validate_network(net); !v.empty()) throw ValidationError(std::move(v));
  return net;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline NetworkModel load_network(const std::filesystem::path& path) {
  std::string text = read_text_file(path);
  try {
    return parse_network(text);
  } catch (const ValidationError&) {
    throw;
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void save_network(const NetworkModel& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << network_to_json(net).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic network generator
//
// Layout: a slack substation bus feeds `n_feeders` radial primary feeders.
// Each feeder is a chain of tap buses; every tap bus hosts one network
// transformer down to a rows x cols low-voltage grid. The grid keeps a comb
// spanning tree plus each remaining lattice edge with probability
// `mesh_density`. Loads sit on distinct grid buses and DGs on a subset of the
// load buses.

struct SynthSpec {
  int n_feeders = 2;
  int n_transformers = 4;
  int grid_rows = 4;
  int grid_cols = 4;
  int n_loads = 12;
  int n_dgs = 6;
  std::uint64_t seed = 1;

  double mesh_density = 1.0;
  double slack_v = 1.0;
  double s_base_mva = 1.0;
  double primary_kv = 13.8;
  double secondary_kv = 0.48;

  double load_kw_min = 20.0;
  double load_kw_max = 80.0;
  double load_pf = 0.95;
  double dg_kw_min = 5.0;
  double dg_kw_max = 20.0;
  double dg_q_headroom_kvar = 250.0;
  double dg_p_headroom_kw = 50.0;

  double primary_r_ohm = 0.12;
  double primary_x_ohm = 0.25;
  double secondary_r_ohm = 0.012;
  double secondary_x_ohm = 0.006;
  double transformer_kva = 500.0;
  double transformer_z_pct = 5.0;
  double transformer_xr = 8.0;
};

inline NetworkModel generate_synthetic_network(const SynthSpec& spec) {
  const int grid_n = spec.grid_rows * spec.grid_cols;
  auto fail = [](const std::string& msg) { throw InputError("infeasible synthetic spec: " + msg); };
  if (spec.n_feeders <= 0 || spec.n_transformers <= 0 || spec.grid_rows <= 0 || spec.grid_cols <= 0 ||
      spec.n_loads <= 0 || spec.n_dgs <= 0)
    fail("all counts must be positive");
  if (spec.n_dgs > spec.n_loads) fail("n_dgs (" + std::to_string(spec.n_dgs) + ") exceeds n_loads (" +
                                      std::to_string(spec.n_loads) + ")");
  if (spec.n_loads > grid_n) fail("n_loads exceeds the number of grid buses");
  if (spec.n_transformers > grid_n) fail("n_transformers exceeds the number of grid buses");
  if (spec.n_feeders > spec.n_transformers) fail("every feeder needs at least one transformer");
  if (!(spec.mesh_density >= 0.0 && spec.mesh_density <= 1.0)) fail("mesh_density must lie in [0, 1]");
  if (!(spec.s_base_mva > 0.0) || !(spec.primary_kv > 0.0) || !(spec.secondary_kv > 0.0))
    fail("bases must be positive");

  SplitMix64 rng(spec.seed);
  auto jitter = [&](double v) { return v * rng.uniform(0.8, 1.2); };

  NetworkModel net;
  net.s_base = spec.s_base_mva;
  const double zb_primary = detail::z_base(spec.primary_kv, net.s_base);
  const double zb_secondary = detail::z_base(spec.secondary_kv, net.s_base);

  int next_id = 1;
  Bus slack;
  slack.id = next_id++;
  slack.kind = BusKind::slack;
  slack.base_kv = spec.primary_kv;
  slack.v_mag = spec.slack_v;
  net.buses.push_back(slack);

  // Primary feeders: transformers dealt round-robin to feeders.
  std::vector<int> tap_buses;
  for (int f = 0; f < spec.n_feeders; ++f) {
    int prev = slack.id;
    for (int t = f; t < spec.n_transformers; t += spec.n_feeders) {
      Bus b;
      b.id = next_id++;
      b.base_kv = spec.primary_kv;
      net.buses.push_back(b);
      net.branches.push_back({prev, b.id, jitter(spec.primary_r_ohm) / zb_primary,
                              jitter(spec.primary_x_ohm) / zb_primary, 0.0});
      tap_buses.push_back(b.id);
      prev = b.id;
    }
  }

  const int grid_first = next_id;
  auto grid_id = [&](int r, int c) { return grid_first + r * spec.grid_cols + c; };
  for (int i = 0; i < grid_n; ++i) {
    Bus b;
    b.id = next_id++;
    b.base_kv = spec.secondary_kv;
    net.buses.push_back(b);
  }
  auto grid_branch = [&](int a, int b) {
    net.branches.push_back({a, b, jitter(spec.secondary_r_ohm) / zb_secondary,
                            jitter(spec.secondary_x_ohm) / zb_secondary, 0.0});
  };
  for (int r = 0; r < spec.grid_rows; ++r) {
    for (int c = 0; c < spec.grid_cols; ++c) {
      if (c + 1 < spec.grid_cols) grid_branch(grid_id(r, c), grid_id(r, c + 1));
      if (r + 1 < spec.grid_rows) {
        bool spine = c == 0;
        bool keep = spine || rng.uniform() < spec.mesh_density;
        if (keep) grid_branch(grid_id(r, c), grid_id(r + 1, c));
      }
    }
  }

  std::vector<int> grid_ids(grid_n);
  for (int i = 0; i < grid_n; ++i) grid_ids[i] = grid_first + i;

  // Transformer secondaries spread evenly over the grid.
  const double z_sys = spec.transformer_z_pct / 100.0 * net.s_base / (spec.transformer_kva / 1000.0);
  const double xr = spec.transformer_xr;
  for (int t = 0; t < spec.n_transformers; ++t) {
    int slot = static_cast<int>((static_cast<long long>(t) * grid_n + grid_n / 2) / spec.n_transformers);
    Transformer tr;
    tr.primary_bus = tap_buses[t];
    tr.secondary_bus = grid_ids[slot];
    tr.x = z_sys * xr / std::sqrt(1.0 + xr * xr);
    tr.r = tr.x / xr;
    net.transformers.push_back(tr);
  }

  std::vector<int> shuffled = grid_ids;
  rng.shuffle(shuffled);
  std::vector<int> load_buses(shuffled.begin(), shuffled.begin() + spec.n_loads);
  std::sort(load_buses.begin(), load_buses.end());
  const double q_ratio = std::tan(std::acos(spec.load_pf));
  for (int id : load_buses) {
    Bus* b = net.find_bus(id);
    double p = rng.uniform(spec.load_kw_min, spec.load_kw_max) / 1000.0 / net.s_base;
    b->p_load = p;
    b->q_load = p * q_ratio;
  }

  std::vector<int> dg_buses = load_buses;
  rng.shuffle(dg_buses);
  dg_buses.resize(spec.n_dgs);
  std::sort(dg_buses.begin(), dg_buses.end());
  int dg_id = 1;
  for (int bus : dg_buses) {
    DG g;
    g.id = dg_id++;
    g.bus = bus;
    g.p_out = rng.uniform(spec.dg_kw_min, spec.dg_kw_max) / 1000.0 / net.s_base;
    g.q_out = 0.0;
    g.p_surplus = spec.dg_p_headroom_kw / 1000.0 / net.s_base;
    g.q_surplus = spec.dg_q_headroom_kvar / 1000.0 / net.s_base;
    g.p_surplus_down = g.p_out;
    g.q_surplus_down = g.q_surplus;
    net.dgs.push_back(g);
  }
  return net;
}

}  // namespace dgcomm
