#pragma once

// Newton-Raphson AC power flow in polar coordinates and the voltage/angle
// sensitivity matrix taken from the inverse Jacobian at the solution.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgcomm/common.hpp"
#include "dgcomm/grid_model.hpp"

namespace dgcomm {

struct PowerFlowOptions {
  double tolerance = 1e-8;  // max |mismatch|, pu
  int max_iter = 50;
  bool flat_start = true;  // false: start from the buses' v_mag / v_ang
};

// Voltages are indexed like NetworkModel::buses.
struct PowerFlowSolution {
  std::vector<double> v_mag;
  std::vector<double> v_ang;
  bool converged = false;
  int iterations = 0;
  double max_mismatch = kInf;
  std::vector<double> mismatch_history;  // max |mismatch| before each update
};

// Sparse row-wise bus admittance matrix.
class Admittance {
 public:
  using Entry = std::pair<std::size_t, std::complex<double>>;

  explicit Admittance(const NetworkModel& net) : rows_(net.buses.size()) {
    BusLookup lookup(net);
    for (const auto& br : net.branches) {
      auto y = 1.0 / std::complex<double>(br.r, br.x);
      std::complex<double> half_b(0.0, br.b_shunt / 2.0);
      stamp(lookup.at(br.from_bus), lookup.at(br.to_bus), y + half_b, -y, -y, y + half_b);
    }
    // Primary side carries the off-nominal tap t and shift phi; active flow
    // primary -> secondary grows with theta_p - theta_s - phi.
    for (const auto& tr : net.transformers) {
      auto y = 1.0 / std::complex<double>(tr.r, tr.x);
      auto tau = std::polar(tr.tap, tr.phase_shift);
      stamp(lookup.at(tr.primary_bus), lookup.at(tr.secondary_bus), y / (tr.tap * tr.tap), -y / std::conj(tau),
            -y / tau, y);
    }
    for (auto& row : rows_) std::sort(row.begin(), row.end(), [](auto& a, auto& b) { return a.first < b.first; });
  }

  const std::vector<Entry>& row(std::size_t i) const { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }

  std::complex<double> diagonal(std::size_t i) const {
    std::complex<double> d{};
    for (const auto& [k, y] : rows_[i])
      if (k == i) d += y;
    return d;
  }

 private:
  void add(std::size_t i, std::size_t k, std::complex<double> y) {
    for (auto& e : rows_[i])
      if (e.first == k) {
        e.second += y;
        return;
      }
    rows_[i].emplace_back(k, y);
  }
  void stamp(std::size_t f, std::size_t t, std::complex<double> yff, std::complex<double> yft,
             std::complex<double> ytf, std::complex<double> ytt) {
    add(f, f, yff);
    add(f, t, yft);
    add(t, f, ytf);
    add(t, t, ytt);
  }

  std::vector<std::vector<Entry>> rows_;
};

// Net scheduled injections (generation minus load), indexed like buses.
inline void scheduled_injections(const NetworkModel& net, std::vector<double>& p, std::vector<double>& q) {
  p.assign(net.buses.size(), 0.0);
  q.assign(net.buses.size(), 0.0);
  BusLookup lookup(net);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    p[i] = -net.buses[i].p_load;
    q[i] = -net.buses[i].q_load;
  }
  for (const auto& g : net.dgs) {
    if (!g.online) continue;
    auto i = lookup.at(g.bus);
    p[i] += g.p_out;
    q[i] += g.q_out;
  }
}

inline void calculated_injections(const Admittance& y, const std::vector<double>& vm, const std::vector<double>& va,
                                  std::vector<double>& p, std::vector<double>& q) {
  const std::size_t n = y.size();
  p.assign(n, 0.0);
  q.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [k, yik] : y.row(i)) {
      double d = va[i] - va[k];
      double c = std::cos(d), s = std::sin(d);
      p[i] += vm[k] * (yik.real() * c + yik.imag() * s);
      q[i] += vm[k] * (yik.real() * s - yik.imag() * c);
    }
    p[i] *= vm[i];
    q[i] *= vm[i];
  }
}

namespace detail {

// Unknown ordering: theta of non-slack buses (ascending id), then V of the
// same buses.
struct StateIndex {
  std::vector<std::size_t> bus_pos;  // unknown k -> position in net.buses
  std::vector<int> bus_ids;
  std::size_t slack_pos = 0;

  explicit StateIndex(const NetworkModel& net) {
    BusLookup lookup(net);
    bus_ids = net.non_slack_ids();
    for (int id : bus_ids) bus_pos.push_back(lookup.at(id));
    auto slack = net.slack_id();
    if (!slack) throw InputError("network has no slack bus");
    slack_pos = lookup.at(*slack);
  }
  std::size_t n() const { return bus_pos.size(); }
};

inline Eigen::MatrixXd jacobian(const Admittance& y, const StateIndex& idx, const std::vector<double>& vm,
                                const std::vector<double>& va, const std::vector<double>& p,
                                const std::vector<double>& q) {
  const std::size_t n = idx.n();
  std::vector<long> col_of(y.size(), -1);
  for (std::size_t k = 0; k < n; ++k) col_of[idx.bus_pos[k]] = static_cast<long>(k);

  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = idx.bus_pos[r];
    for (const auto& [k, yik] : y.row(i)) {
      if (k == i) continue;
      long c = col_of[k];
      if (c < 0) continue;
      double d = va[i] - va[k];
      double cs = std::cos(d), sn = std::sin(d);
      double g = yik.real(), b = yik.imag();
      double a1 = g * sn - b * cs;
      double a2 = g * cs + b * sn;
      j(r, c) = vm[i] * vm[k] * a1;
      j(r, n + c) = vm[i] * a2;
      j(n + r, c) = -vm[i] * vm[k] * a2;
      j(n + r, n + c) = vm[i] * a1;
    }
    auto yii = y.diagonal(i);
    double gii = yii.real(), bii = yii.imag();
    double v = vm[i];
    j(r, r) = -q[i] - bii * v * v;
    j(r, n + r) = p[i] / v + gii * v;
    j(n + r, r) = p[i] - gii * v * v;
    j(n + r, n + r) = q[i] / v - bii * v;
  }
  return j;
}

inline bool is_singular(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  double rc = lu.rcond();
  return !(rc > 1e-14) || !std::isfinite(rc);
}

inline double max_abs_mismatch(const StateIndex& idx, const std::vector<double>& dp, const std::vector<double>& dq) {
  double m = 0.0;
  for (std::size_t k = 0; k < idx.n(); ++k) {
    auto i = idx.bus_pos[k];
    double a = std::max(std::abs(dp[i]), std::abs(dq[i]));
    if (!std::isfinite(a)) return kInf;
    m = std::max(m, a);
  }
  return m;
}

}  // namespace detail

// Solves the AC power flow. A singular Jacobian at the starting point throws
// NumericalError; failing to reach the tolerance returns converged = false.
inline PowerFlowSolution solve_power_flow(const NetworkModel& net, const PowerFlowOptions& opt = {}) {
  detail::StateIndex idx(net);
  Admittance y(net);
  const std::size_t nb = net.buses.size();
  const std::size_t n = idx.n();

  PowerFlowSolution sol;
  sol.v_mag.resize(nb);
  sol.v_ang.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& b = net.buses[i];
    bool fixed = b.kind == BusKind::slack;
    sol.v_mag[i] = (opt.flat_start && !fixed) ? 1.0 : b.v_mag;
    sol.v_ang[i] = (opt.flat_start && !fixed) ? net.buses[idx.slack_pos].v_ang : b.v_ang;
  }

  std::vector<double> p_sched, q_sched, p_calc, q_calc, dp(nb), dq(nb);
  scheduled_injections(net, p_sched, q_sched);

  for (int it = 0;; ++it) {
    calculated_injections(y, sol.v_mag, sol.v_ang, p_calc, q_calc);
    for (std::size_t i = 0; i < nb; ++i) {
      dp[i] = p_sched[i] - p_calc[i];
      dq[i] = q_sched[i] - q_calc[i];
    }
    sol.max_mismatch = detail::max_abs_mismatch(idx, dp, dq);
    sol.mismatch_history.push_back(sol.max_mismatch);
    sol.iterations = it;
    if (sol.max_mismatch <= opt.tolerance) {
      sol.converged = true;
      return sol;
    }
    if (it >= opt.max_iter || !std::isfinite(sol.max_mismatch) || sol.max_mismatch > 1e12) return sol;

    Eigen::MatrixXd jac = detail::jacobian(y, idx, sol.v_mag, sol.v_ang, p_calc, q_calc);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (detail::is_singular(lu)) {
      if (it == 0) throw NumericalError("singular power-flow Jacobian at the starting point");
      return sol;
    }
    Eigen::VectorXd rhs(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
      rhs(k) = dp[idx.bus_pos[k]];
      rhs(n + k) = dq[idx.bus_pos[k]];
    }
    Eigen::VectorXd dx = lu.solve(rhs);
    for (std::size_t k = 0; k < n; ++k) {
      sol.v_ang[idx.bus_pos[k]] += dx(k);
      sol.v_mag[idx.bus_pos[k]] += dx(n + k);
    }
  }
}

// Writes the solved voltages back into the buses so later solves can warm
// start from them.
inline void store_operating_point(NetworkModel& net, const PowerFlowSolution& sol) {
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (net.buses[i].kind == BusKind::slack) continue;
    net.buses[i].v_mag = sol.v_mag[i];
    net.buses[i].v_ang = sol.v_ang[i];
  }
}

// ---------------------------------------------------------------------------
// Sensitivity matrix

// Inverse Jacobian split into its four blocks. Rows and columns follow
// bus_ids, the non-slack buses in ascending id order: a_vq(i, j) is the
// change of |V| at bus_ids[i] per unit of reactive injection at bus_ids[j].
struct SensitivityMatrix {
  std::vector<int> bus_ids;
  Eigen::MatrixXd a_theta_p;
  Eigen::MatrixXd a_theta_q;
  Eigen::MatrixXd a_vp;
  Eigen::MatrixXd a_vq;

  std::optional<std::size_t> index_of(int bus_id) const {
    auto it = std::lower_bound(bus_ids.begin(), bus_ids.end(), bus_id);
    if (it == bus_ids.end() || *it != bus_id) return std::nullopt;
    return static_cast<std::size_t>(it - bus_ids.begin());
  }
  std::size_t size() const { return bus_ids.size(); }
};

inline SensitivityMatrix compute_sensitivity_matrix(const NetworkModel& net, const PowerFlowSolution& sol) {
  if (!sol.converged) throw NumericalError("sensitivity requires a converged power flow");
  detail::StateIndex idx(net);
  Admittance y(net);
  std::vector<double> p, q;
  calculated_injections(y, sol.v_mag, sol.v_ang, p, q);
  Eigen::MatrixXd jac = detail::jacobian(y, idx, sol.v_mag, sol.v_ang, p, q);
  const auto n = static_cast<Eigen::Index>(idx.n());

  SensitivityMatrix s;
  s.bus_ids = idx.bus_ids;
  if (n == 0) return s;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
  if (detail::is_singular(lu)) throw NumericalError("singular Jacobian at the operating point");
  Eigen::MatrixXd inv = lu.inverse();
  if (!inv.allFinite()) throw NumericalError("non-finite sensitivity entries");
  s.a_theta_p = inv.topLeftCorner(n, n);
  s.a_theta_q = inv.topRightCorner(n, n);
  s.a_vp = inv.bottomLeftCorner(n, n);
  s.a_vq = inv.bottomRightCorner(n, n);
  return s;
}

enum class SensitivityKind { VQ, VP };

// Sensitivity columns at DG buses: rows are the non-slack buses, columns the
// DGs ordered by id.
struct DgColumns {
  Eigen::MatrixXd values;
  std::vector<int> node_ids;
  std::vector<int> dg_ids;
  std::vector<std::size_t> dg_rows;  // row index of each DG's own bus
};

inline DgColumns dg_columns(const SensitivityMatrix& sens, const NetworkModel& net, SensitivityKind which,
                            bool online_only = false) {
  DgColumns out;
  out.node_ids = sens.bus_ids;
  std::vector<const DG*> picked;
  for (int id : net.dg_ids_sorted()) {
    const DG* g = net.find_dg(id);
    if (online_only && !g->online) continue;
    picked.push_back(g);
  }
  const Eigen::MatrixXd& src = which == SensitivityKind::VQ ? sens.a_vq : sens.a_vp;
  out.values.resize(static_cast<Eigen::Index>(sens.size()), static_cast<Eigen::Index>(picked.size()));
  for (std::size_t c = 0; c < picked.size(); ++c) {
    auto row = sens.index_of(picked[c]->bus);
    if (!row) throw InputError("dg " + std::to_string(picked[c]->id) + " is on the slack bus or an unknown bus");
    out.values.col(static_cast<Eigen::Index>(c)) = src.col(static_cast<Eigen::Index>(*row));
    out.dg_ids.push_back(picked[c]->id);
    out.dg_rows.push_back(*row);
  }
  return out;
}

// One CSV per block: header "bus,<col ids>", then one row per bus.
inline void write_matrix_csv(const std::filesystem::path& path, const std::vector<int>& ids,
                             const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << "bus";
  for (int id : ids) out << ',' << id;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

inline void dump_sensitivity(const SensitivityMatrix& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "a_theta_p.csv", s.bus_ids, s.a_theta_p);
  write_matrix_csv(dir / "a_theta_q.csv", s.bus_ids, s.a_theta_q);
  write_matrix_csv(dir / "a_vp.csv", s.bus_ids, s.a_vp);
  write_matrix_csv(dir / "a_vq.csv", s.bus_ids, s.a_vq);
}

}  // namespace dgcomm
