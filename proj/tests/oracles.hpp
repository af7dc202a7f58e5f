#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library under test except plain data types.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgcomm/common.hpp"
#include "dgcomm/grid_model.hpp"
#include "dgcomm/power_flow.hpp"
#include "dgcomm/simplex.hpp"

namespace oracle {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(DGCOMM_DATA_DIR) / name; }

// Modularity as sum over communities of e_cc/2m - (a_c/2m)^2.
inline double modularity(const Eigen::MatrixXd& w, const std::vector<int>& label) {
  const auto n = w.rows();
  double two_m = w.sum();
  if (two_m <= 0.0) return 0.0;
  int k = 0;
  for (int l : label) k = std::max(k, l + 1);
  std::vector<double> e(static_cast<std::size_t>(k), 0.0), a(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      auto li = static_cast<std::size_t>(label[static_cast<std::size_t>(i)]);
      a[li] += w(i, j);
      if (label[static_cast<std::size_t>(i)] == label[static_cast<std::size_t>(j)]) e[li] += w(i, j);
    }
  double q = 0.0;
  for (std::size_t c = 0; c < e.size(); ++c) q += e[c] / two_m - (a[c] / two_m) * (a[c] / two_m);
  return q;
}

struct BestPartition {
  double modularity = -std::numeric_limits<double>::infinity();
  std::vector<int> labels;
  long count = 0;  // partitions visited
};

// Exhaustive search over all set partitions via restricted growth strings.
inline BestPartition brute_force(const Eigen::MatrixXd& w) {
  const auto n = static_cast<std::size_t>(w.rows());
  BestPartition best;
  std::vector<int> rgs(n, 0), max_prefix(n, 0);
  for (;;) {
    ++best.count;
    double m = modularity(w, rgs);
    if (m > best.modularity) {
      best.modularity = m;
      best.labels = rgs;
    }
    // next restricted growth string
    std::size_t i = n;
    while (i-- > 1) {
      if (rgs[i] <= max_prefix[i - 1]) {
        ++rgs[i];
        int mx = std::max(max_prefix[i - 1], rgs[i]);
        max_prefix[i] = mx;
        for (std::size_t j = i + 1; j < n; ++j) {
          rgs[j] = 0;
          max_prefix[j] = mx;
        }
        break;
      }
    }
    if (i == 0 || n <= 1) break;
  }
  return best;
}

// Two blocks are the same partition if the co-membership relation matches.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

inline Eigen::MatrixXd random_graph(dgcomm::SplitMix64& rng, int n, double density) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < density) w(i, j) = w(j, i) = rng.uniform(0.1, 2.0);
  return w;
}

inline Eigen::MatrixXd two_triangles() {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(6, 6);
  auto edge = [&](int a, int b) { w(a, b) = w(b, a) = 1.0; };
  edge(0, 1), edge(1, 2), edge(0, 2), edge(3, 4), edge(4, 5), edge(3, 5);
  return w;
}

// Two cliques of size k joined by one edge between node k-1 and node k.
inline Eigen::MatrixXd barbell(int k, double bridge = 1.0) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  for (int off : {0, k})
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) w(off + i, off + j) = w(off + j, off + i) = 1.0;
  w(k - 1, k) = w(k, k - 1) = bridge;
  return w;
}

// Receiving-end voltage of a lossless-or-lossy two-bus line with load P+jQ
// at the far end: V^4 + (2(PR+QX) - V1^2) V^2 + (P^2+Q^2)(R^2+X^2) = 0, the
// high-voltage root.
inline double two_bus_voltage(double p, double q, double r, double x, double v1) {
  double b = 2.0 * (p * r + q * x) - v1 * v1;
  double c = (p * p + q * q) * (r * r + x * x);
  return std::sqrt((-b + std::sqrt(b * b - 4.0 * c)) / 2.0);
}

// Row-wise argmax over the columns with mask true, lowest column on ties.
inline std::vector<int> argmax_rows(const Eigen::MatrixXd& m, const std::vector<bool>& mask) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    int best = -1;
    double bv = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!mask[static_cast<std::size_t>(j)]) continue;
      if (m(i, j) > bv) {
        bv = m(i, j);
        best = static_cast<int>(j);
      }
    }
    out.push_back(best);
  }
  return out;
}

// Smallest slack of z against every constraint row and variable bound:
// negative means violated by that much.
inline double min_residual(const dgcomm::LinearProgram& lp, const std::vector<double>& z) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : lp.constraints) {
    double act = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) act += c.coeffs[j] * z[j];
    switch (c.sense) {
      case dgcomm::Sense::le: worst = std::min(worst, c.rhs - act); break;
      case dgcomm::Sense::ge: worst = std::min(worst, act - c.rhs); break;
      case dgcomm::Sense::eq: worst = std::min(worst, -std::abs(act - c.rhs)); break;
    }
  }
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (std::isfinite(lp.lower[j])) worst = std::min(worst, z[j] - lp.lower[j]);
    if (std::isfinite(lp.upper[j])) worst = std::min(worst, lp.upper[j] - z[j]);
  }
  return worst;
}

// A half-plane a1 x1 + a2 x2 <= b in the DG-adjustment plane.
struct HalfPlane {
  double a1, a2, b;
};

struct MaxMin2 {
  bool feasible = false;
  double value = 0.0;  // best min(x1, x2) (or best max for minimize)
};

// Optimum of max min(x1, x2) (maximize) or min max(x1, x2) (minimize) over a
// 2-D polygon. The optimum of a concave piecewise-linear objective sits at a
// polygon vertex or where the kink x1 = x2 crosses an edge, so every pairwise
// line intersection (kink included) is a candidate.
inline MaxMin2 maxmin_2d(const std::vector<HalfPlane>& hp, bool maximize, double tol = 1e-12) {
  std::vector<HalfPlane> lines = hp;
  lines.push_back({1.0, -1.0, 0.0});  // the kink x1 - x2 = 0
  auto inside = [&](double x1, double x2) {
    for (const auto& h : hp)
      if (h.a1 * x1 + h.a2 * x2 > h.b + tol * (1.0 + std::abs(h.b))) return false;
    return true;
  };
  MaxMin2 out;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const auto &p = lines[i], &q = lines[j];
      double det = p.a1 * q.a2 - p.a2 * q.a1;
      if (std::abs(det) < 1e-14) continue;
      double x1 = (p.b * q.a2 - p.a2 * q.b) / det;
      double x2 = (p.a1 * q.b - p.b * q.a1) / det;
      if (!inside(x1, x2)) continue;
      double v = maximize ? std::min(x1, x2) : std::max(x1, x2);
      if (!out.feasible || (maximize ? v > out.value : v < out.value)) out.value = v;
      out.feasible = true;
    }
  return out;
}

// Finite-difference voltage change for an injection perturbation dq at every
// non-slack bus (indexed by the sensitivity bus order), reactive or active.
inline std::vector<double> perturbed_voltages(const dgcomm::NetworkModel& base, const std::vector<int>& bus_ids,
                                              const std::vector<double>& dp, const std::vector<double>& dq) {
  dgcomm::NetworkModel net = base;
  for (std::size_t k = 0; k < bus_ids.size(); ++k) {
    dgcomm::Bus* b = net.find_bus(bus_ids[k]);
    b->p_load -= dp[k];
    b->q_load -= dq[k];
  }
  dgcomm::PowerFlowOptions opt;
  opt.tolerance = 1e-12;
  opt.max_iter = 30;
  auto pf = dgcomm::solve_power_flow(net, opt);
  std::vector<double> v;
  dgcomm::BusLookup look(net);
  for (int id : bus_ids) v.push_back(pf.v_mag[look.at(id)]);
  return v;
}

}  // namespace oracle
