#pragma once

// Voltage control inside one community: neighbouring-DG subsets and the
// max-min LP that picks DG adjustments for a voltage violation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgcomm/common.hpp"
#include "dgcomm/grid_model.hpp"
#include "dgcomm/power_flow.hpp"
#include "dgcomm/simplex.hpp"

namespace dgcomm {

// Raised when a community has no DG it can use.
class NoAvailableDgError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Subsets

// Sensitivity slice of one community: rows are its non-slack buses, columns
// the DGs located inside it (ascending id).
struct CommunityDgView {
  std::vector<int> node_ids;
  std::vector<int> dg_ids;
  std::vector<int> dg_buses;
  Eigen::MatrixXd sens;
};

inline CommunityDgView community_view(const DgColumns& all, const NetworkModel& net,
                                      const std::vector<int>& community_buses) {
  std::set<int> members(community_buses.begin(), community_buses.end());
  CommunityDgView v;
  std::vector<Eigen::Index> rows, cols;
  for (std::size_t i = 0; i < all.node_ids.size(); ++i)
    if (members.count(all.node_ids[i])) {
      v.node_ids.push_back(all.node_ids[i]);
      rows.push_back(static_cast<Eigen::Index>(i));
    }
  for (std::size_t j = 0; j < all.dg_ids.size(); ++j) {
    const DG* g = net.find_dg(all.dg_ids[j]);
    if (g && members.count(g->bus)) {
      v.dg_ids.push_back(g->id);
      v.dg_buses.push_back(g->bus);
      cols.push_back(static_cast<Eigen::Index>(j));
    }
  }
  v.sens.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      v.sens(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = all.values(rows[r], cols[c]);
  return v;
}

// Row-wise argmax over the available columns only; ties go to the lowest
// column. Unavailable columns stay zero.
inline Eigen::MatrixXd build_community_dg_matrix(const Eigen::MatrixXd& sens, const std::vector<bool>& available) {
  if (static_cast<std::size_t>(sens.cols()) != available.size())
    throw InputError("availability mask does not match the DG columns");
  if (std::none_of(available.begin(), available.end(), [](bool b) { return b; }))
    throw NoAvailableDgError("community has no available DG");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(sens.rows(), sens.cols());
  for (Eigen::Index i = 0; i < sens.rows(); ++i) {
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < sens.cols(); ++j) {
      if (!available[static_cast<std::size_t>(j)] || !std::isfinite(sens(i, j))) continue;
      if (best < 0 || sens(i, j) > sens(i, best)) best = j;
    }
    if (best < 0) throw InputError("row " + std::to_string(i) + " has no finite sensitivity to an available DG");
    d(i, best) = 1.0;
  }
  return d;
}

struct Subset {
  int anchor_dg = 0;
  std::vector<int> dg_ids;  // anchor plus available DGs sitting on member nodes, ascending
  std::vector<int> nodes;   // ascending
};

struct CommunitySubsets {
  int community = 0;
  std::vector<Subset> subsets;  // ordered by anchor id
  int generation = 0;

  const Subset* subset_of(int node) const {
    for (const auto& s : subsets)
      if (std::binary_search(s.nodes.begin(), s.nodes.end(), node)) return &s;
    return nullptr;
  }

  // Union of the subset DG sets of the given nodes, ascending.
  std::vector<int> dgs_for(const std::vector<int>& nodes) const {
    std::set<int> out;
    for (int n : nodes)
      if (const Subset* s = subset_of(n)) out.insert(s->dg_ids.begin(), s->dg_ids.end());
    return {out.begin(), out.end()};
  }

  std::string listing() const {
    return join(subsets, ";", [](const Subset& s) {
      return "dgs:" + join_ints(s.dg_ids) + "|nodes:" + join_ints(s.nodes);
    });
  }
};

// Groups nodes by the DG their row selects.
inline CommunitySubsets derive_subsets(int community, const Eigen::MatrixXd& d_com, const std::vector<int>& node_ids,
                                       const std::vector<int>& dg_ids, const std::vector<int>& dg_buses,
                                       const std::vector<bool>& available) {
  if (static_cast<std::size_t>(d_com.rows()) != node_ids.size() ||
      static_cast<std::size_t>(d_com.cols()) != dg_ids.size() || dg_buses.size() != dg_ids.size() ||
      available.size() != dg_ids.size())
    throw InputError("community DG matrix dimensions do not match");
  std::map<int, Subset> by_anchor;
  for (Eigen::Index i = 0; i < d_com.rows(); ++i) {
    for (Eigen::Index j = 0; j < d_com.cols(); ++j) {
      if (d_com(i, j) == 0.0) continue;
      auto& s = by_anchor[dg_ids[static_cast<std::size_t>(j)]];
      s.anchor_dg = dg_ids[static_cast<std::size_t>(j)];
      s.nodes.push_back(node_ids[static_cast<std::size_t>(i)]);
      break;
    }
  }
  CommunitySubsets out;
  out.community = community;
  for (auto& [anchor, s] : by_anchor) {
    std::set<int> dgs{anchor};
    std::sort(s.nodes.begin(), s.nodes.end());
    for (std::size_t j = 0; j < dg_ids.size(); ++j)
      if (available[j] && std::binary_search(s.nodes.begin(), s.nodes.end(), dg_buses[j])) dgs.insert(dg_ids[j]);
    s.dg_ids.assign(dgs.begin(), dgs.end());
    out.subsets.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Control problem

enum class ControlDirection { overvoltage, undervoltage };
enum class ControlMode { reactive, active };

inline const char* to_string(ControlDirection d) {
  return d == ControlDirection::overvoltage ? "overvoltage" : "undervoltage";
}
inline const char* to_string(ControlMode m) { return m == ControlMode::reactive ? "reactive" : "active"; }

// Angle data of one network transformer: the reverse-flow guard requires
// theta_p0 + row_p.x - (theta_s0 + theta_shift + row_s.x) >= 0.
struct TransformerAngleRow {
  int primary_bus = 0;
  int secondary_bus = 0;
  double theta_p0 = 0.0;
  double theta_s0 = 0.0;
  double theta_shift = 0.0;
  std::vector<double> row_p;
  std::vector<double> row_s;
};

struct ControlProblem {
  ControlDirection direction = ControlDirection::overvoltage;
  ControlMode mode = ControlMode::reactive;
  std::vector<int> dg_ids;
  std::vector<int> node_ids;
  std::vector<double> v0;
  Eigen::MatrixXd sens;       // node_ids x dg_ids, dV/dx
  std::vector<double> upper;  // per-DG headroom, raising output
  std::vector<double> lower;  // per-DG headroom, lowering output (<= 0)
  std::vector<TransformerAngleRow> transformers;
  double v_lo = 0.95;
  double v_hi = 1.05;
};

// Gathers the data for one LP from the current operating point. Voltage rows
// cover every non-slack bus in `community_buses`; transformer rows cover every
// transformer with a terminal in the community.
inline ControlProblem build_control_problem(const NetworkModel& net, const PowerFlowSolution& pf,
                                            const SensitivityMatrix& sens, const std::vector<int>& community_buses,
                                            const std::vector<int>& dg_ids, ControlDirection direction,
                                            ControlMode mode, double v_lo, double v_hi) {
  if (dg_ids.empty()) throw InputError("control problem needs at least one DG");
  ControlProblem cp;
  cp.direction = direction;
  cp.mode = mode;
  cp.dg_ids = dg_ids;
  cp.v_lo = v_lo;
  cp.v_hi = v_hi;
  BusLookup lookup(net);
  const bool reactive = mode == ControlMode::reactive;
  const Eigen::MatrixXd& vs = reactive ? sens.a_vq : sens.a_vp;
  const Eigen::MatrixXd& as = reactive ? sens.a_theta_q : sens.a_theta_p;

  std::vector<Eigen::Index> dg_cols;
  for (int id : dg_ids) {
    const DG* g = net.find_dg(id);
    if (!g) throw InputError("unknown dg id " + std::to_string(id));
    auto col = sens.index_of(g->bus);
    if (!col) throw InputError("dg " + std::to_string(id) + " is on the slack bus");
    dg_cols.push_back(static_cast<Eigen::Index>(*col));
    cp.upper.push_back(reactive ? g->q_surplus : g->p_surplus);
    cp.lower.push_back(-(reactive ? g->q_surplus_down : g->p_surplus_down));
  }

  std::set<int> members(community_buses.begin(), community_buses.end());
  for (int bus : members) {
    auto row = sens.index_of(bus);
    if (!row) continue;
    cp.node_ids.push_back(bus);
    cp.v0.push_back(pf.v_mag[lookup.at(bus)]);
  }
  cp.sens.resize(static_cast<Eigen::Index>(cp.node_ids.size()), static_cast<Eigen::Index>(dg_cols.size()));
  for (std::size_t r = 0; r < cp.node_ids.size(); ++r) {
    auto row = static_cast<Eigen::Index>(*sens.index_of(cp.node_ids[r]));
    for (std::size_t c = 0; c < dg_cols.size(); ++c)
      cp.sens(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vs(row, dg_cols[c]);
  }

  auto angle_row = [&](int bus) {
    std::vector<double> out(dg_cols.size(), 0.0);
    if (auto row = sens.index_of(bus))
      for (std::size_t c = 0; c < dg_cols.size(); ++c) out[c] = as(static_cast<Eigen::Index>(*row), dg_cols[c]);
    return out;
  };
  for (const auto& tr : net.transformers) {
    if (!members.count(tr.primary_bus) && !members.count(tr.secondary_bus)) continue;
    TransformerAngleRow t;
    t.primary_bus = tr.primary_bus;
    t.secondary_bus = tr.secondary_bus;
    t.theta_p0 = pf.v_ang[lookup.at(tr.primary_bus)];
    t.theta_s0 = pf.v_ang[lookup.at(tr.secondary_bus)];
    t.theta_shift = tr.phase_shift;
    t.row_p = angle_row(tr.primary_bus);
    t.row_s = angle_row(tr.secondary_bus);
    cp.transformers.push_back(std::move(t));
  }
  return cp;
}

// LP over variables x_0..x_{n-1} (one per controlled DG) and y (last).
struct ControlLp {
  LinearProgram lp;
  std::size_t n_dgs = 0;
  ControlDirection direction = ControlDirection::overvoltage;
  std::vector<int> dg_ids;

  std::size_t y_index() const { return n_dgs; }
};

// Overvoltage: maximize y with x_i >= y and x_i <= 0 (decrease as little as
// possible). Undervoltage: minimize y with x_i <= y and x_i >= 0.
inline ControlLp formulate_lp(const ControlProblem& p) {
  const std::size_t n = p.dg_ids.size();
  if (n == 0) throw InputError("control problem has no DGs");
  if (static_cast<std::size_t>(p.sens.rows()) != p.node_ids.size() || static_cast<std::size_t>(p.sens.cols()) != n ||
      p.v0.size() != p.node_ids.size() || p.upper.size() != n || p.lower.size() != n)
    throw InputError("control problem dimensions are inconsistent");
  const bool over = p.direction == ControlDirection::overvoltage;

  ControlLp out;
  out.n_dgs = n;
  out.direction = p.direction;
  out.dg_ids = p.dg_ids;
  LinearProgram& lp = out.lp;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = p.lower[i], hi = p.upper[i];
    if (over) {
      hi = std::min(hi, 0.0);
    } else {
      lo = std::max(lo, 0.0);
    }
    lp.add_variable("x[" + std::to_string(p.dg_ids[i]) + "]", lo, hi);
  }
  lp.add_variable("y", -kInf, kInf, 1.0);
  lp.maximize = over;

  auto row_of = [&](auto&& fill) {
    std::vector<double> a(n + 1, 0.0);
    fill(a);
    return a;
  };
  for (std::size_t r = 0; r < p.node_ids.size(); ++r) {
    auto a = row_of([&](auto& v) {
      for (std::size_t c = 0; c < n; ++c) v[c] = p.sens(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    });
    std::string bus = std::to_string(p.node_ids[r]);
    lp.constraints.push_back({a, Sense::le, p.v_hi - p.v0[r], "v_hi[" + bus + "]"});
    lp.constraints.push_back({a, Sense::ge, p.v_lo - p.v0[r], "v_lo[" + bus + "]"});
  }
  for (const auto& t : p.transformers) {
    auto a = row_of([&](auto& v) {
      for (std::size_t c = 0; c < n; ++c) v[c] = t.row_p[c] - t.row_s[c];
    });
    lp.constraints.push_back({a, Sense::ge, t.theta_s0 + t.theta_shift - t.theta_p0,
                              "reverse_flow[" + std::to_string(t.primary_bus) + "-" +
                                  std::to_string(t.secondary_bus) + "]"});
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto a = row_of([&](auto& v) {
      v[i] = 1.0;
      v[n] = -1.0;
    });
    lp.constraints.push_back({a, over ? Sense::ge : Sense::le, 0.0, "minmax[" + std::to_string(p.dg_ids[i]) + "]"});
  }
  return out;
}

struct ControlSolution {
  LpStatus status = LpStatus::infeasible;
  bool feasible = false;
  std::vector<int> dg_ids;
  std::vector<double> x;
  double objective = 0.0;  // optimal y
  std::vector<std::string> binding;
};

namespace detail {

inline double row_activity(const LinearConstraint& c, const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) s += c.coeffs[j] * z[j];
  return s;
}

}  // namespace detail

// Solves the max-min LP. Among the max-min optimal points a second pass
// picks the one with the smallest total adjustment.
inline ControlSolution solve_lp(const ControlLp& c, double tol = 1e-9) {
  ControlSolution out;
  out.dg_ids = c.dg_ids;
  LpResult first = solve_simplex(c.lp, tol);
  out.status = first.status;
  if (first.status != LpStatus::optimal) return out;
  const double y_star = first.x[c.y_index()];
  const bool over = c.direction == ControlDirection::overvoltage;

  std::vector<double> z = first.x;
  LinearProgram second = c.lp;
  std::fill(second.objective.begin(), second.objective.end(), 0.0);
  for (std::size_t i = 0; i < c.n_dgs; ++i) second.objective[i] = 1.0;
  if (over) {
    second.lower[c.y_index()] = y_star;
  } else {
    second.upper[c.y_index()] = y_star;
  }
  LpResult refined = solve_simplex(second, tol);
  if (refined.status == LpStatus::optimal) z = refined.x;

  out.feasible = true;
  out.x.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(c.n_dgs));
  out.objective = y_star;
  for (const auto& con : c.lp.constraints) {
    if (std::abs(detail::row_activity(con, z) - con.rhs) <= tol) out.binding.push_back(con.name);
  }
  for (std::size_t i = 0; i < c.n_dgs; ++i) {
    if (std::isfinite(c.lp.upper[i]) && std::abs(z[i] - c.lp.upper[i]) <= tol)
      out.binding.push_back("upper[" + std::to_string(c.dg_ids[i]) + "]");
    if (std::isfinite(c.lp.lower[i]) && std::abs(z[i] - c.lp.lower[i]) <= tol)
      out.binding.push_back("lower[" + std::to_string(c.dg_ids[i]) + "]");
  }
  return out;
}

// Linear voltage prediction V0 + S x.
inline std::vector<double> predict_voltages(const std::vector<double>& v0, const Eigen::MatrixXd& sens,
                                            const std::vector<double>& x) {
  if (static_cast<std::size_t>(sens.rows()) != v0.size() || static_cast<std::size_t>(sens.cols()) != x.size())
    throw InputError("prediction dimensions do not match");
  std::vector<double> out = v0;
  for (std::size_t r = 0; r < v0.size(); ++r)
    for (std::size_t c = 0; c < x.size(); ++c)
      out[r] += sens(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * x[c];
  return out;
}

// ---------------------------------------------------------------------------
// Applying a solution

struct VoltageViolation {
  int bus = 0;
  double v_mag = 0.0;
  bool over = false;
};

inline std::vector<VoltageViolation> find_violations(const NetworkModel& net, const PowerFlowSolution& pf, double v_lo,
                                                     double v_hi, double tol = 1e-9) {
  std::vector<VoltageViolation> out;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    double v = pf.v_mag[i];
    if (v > v_hi + tol) out.push_back({net.buses[i].id, v, true});
    if (v < v_lo - tol) out.push_back({net.buses[i].id, v, false});
  }
  std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.bus < b.bus; });
  return out;
}

// Moves each DG's output by x (clamped to its headroom) and shifts the
// headroom accordingly. Returns the adjustments actually applied.
inline std::vector<double> apply_adjustments(NetworkModel& net, ControlMode mode, const std::vector<int>& dg_ids,
                                             const std::vector<double>& x) {
  std::vector<double> applied(x.size(), 0.0);
  for (std::size_t i = 0; i < dg_ids.size(); ++i) {
    DG* g = net.find_dg(dg_ids[i]);
    if (!g) throw InputError("unknown dg id " + std::to_string(dg_ids[i]));
    double& out = mode == ControlMode::reactive ? g->q_out : g->p_out;
    double& up = mode == ControlMode::reactive ? g->q_surplus : g->p_surplus;
    double& down = mode == ControlMode::reactive ? g->q_surplus_down : g->p_surplus_down;
    double dx = std::clamp(x[i], -down, up);
    if (dx == 0.0) continue;
    out += dx;
    up = std::max(0.0, up - dx);
    down = std::max(0.0, down + dx);
    applied[i] = dx;
  }
  return applied;
}

struct ApplyResult {
  NetworkModel net;
  PowerFlowSolution pf;
  std::vector<VoltageViolation> residual;
};

// Applies a feasible solution, re-solves the power flow from the previous
// operating point and reports any bus still outside [v_lo, v_hi].
inline ApplyResult verify_and_apply(const NetworkModel& net, const PowerFlowSolution& before, ControlMode mode,
                                    const ControlSolution& sol, double v_lo = 0.95, double v_hi = 1.05,
                                    const PowerFlowOptions& opt = {}) {
  if (!sol.feasible) throw InputError("cannot apply an infeasible control solution");
  ApplyResult r{net, {}, {}};
  store_operating_point(r.net, before);
  apply_adjustments(r.net, mode, sol.dg_ids, sol.x);
  PowerFlowOptions warm = opt;
  warm.flat_start = false;
  r.pf = solve_power_flow(r.net, warm);
  if (!r.pf.converged) throw NumericalError("power flow diverged after applying control");
  store_operating_point(r.net, r.pf);
  r.residual = find_violations(r.net, r.pf, v_lo, v_hi);
  return r;
}

}  // namespace dgcomm
