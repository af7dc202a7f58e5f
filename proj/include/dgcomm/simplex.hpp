#pragma once

// Dense two-phase simplex with Bland's rule. Deterministic and meant for the
// small control LPs (tens of variables); no presolve, no sparse algebra.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dgcomm/common.hpp"

namespace dgcomm {

enum class Sense { le, ge, eq };

struct LinearConstraint {
  std::vector<double> coeffs;
  Sense sense = Sense::le;
  double rhs = 0.0;
  std::string name;
};

// maximize (or minimize) objective . z  subject to constraints and
// lower <= z <= upper (either bound may be infinite).
struct LinearProgram {
  std::vector<std::string> var_names;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> objective;
  bool maximize = true;
  std::vector<LinearConstraint> constraints;

  std::size_t n_vars() const { return objective.size(); }

  std::size_t add_variable(std::string name, double lo, double hi, double cost = 0.0) {
    var_names.push_back(std::move(name));
    lower.push_back(lo);
    upper.push_back(hi);
    objective.push_back(cost);
    for (auto& c : constraints) c.coeffs.push_back(0.0);
    return objective.size() - 1;
  }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;
  int pivots = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_(rows * (cols + 1), 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (n_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * (n_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, n_); }
  double rhs(std::size_t r) const { return at(r, n_); }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }
  const std::vector<std::size_t>& basis() const { return basis_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    for (std::size_t c = 0; c <= n_; ++c) at(pr, c) /= p;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= n_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis_[pr] = pc;
  }

  void drop_row(std::size_t r) {
    t_.erase(t_.begin() + static_cast<std::ptrdiff_t>(r * (n_ + 1)),
             t_.begin() + static_cast<std::ptrdiff_t>((r + 1) * (n_ + 1)));
    basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
    --m_;
  }

 private:
  std::size_t m_, n_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

enum class PhaseResult { optimal, unbounded };

// Maximizes cost . u over the current basis, considering only columns below
// `usable`. Bland's rule: lowest-index improving column enters, ties in the
// ratio test leave by lowest basic column index.
inline PhaseResult run_phase(Tableau& t, const std::vector<double>& cost, std::size_t usable, double tol,
                             int& pivots) {
  constexpr int kMaxPivots = 100000;
  std::vector<char> is_basic(t.cols(), 0);
  for (;;) {
    std::fill(is_basic.begin(), is_basic.end(), 0);
    for (auto b : t.basis()) is_basic[b] = 1;
    std::size_t enter = usable;
    for (std::size_t j = 0; j < usable; ++j) {
      if (is_basic[j]) continue;
      double reduced = cost[j];
      for (std::size_t r = 0; r < t.rows(); ++r) reduced -= cost[t.basis()[r]] * t.at(r, j);
      if (reduced > tol) {
        enter = j;
        break;
      }
    }
    if (enter == usable) return PhaseResult::optimal;

    std::size_t leave = t.rows();
    double best_ratio = kInf;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double a = t.at(r, enter);
      if (a <= tol) continue;
      double ratio = std::max(t.rhs(r), 0.0) / a;
      if (leave == t.rows() || ratio < best_ratio - tol) {
        best_ratio = ratio;
        leave = r;
      } else if (ratio <= best_ratio + tol && t.basis()[r] < t.basis()[leave]) {
        best_ratio = std::min(best_ratio, ratio);
        leave = r;
      }
    }
    if (leave == t.rows()) return PhaseResult::unbounded;
    t.pivot(leave, enter);
    if (++pivots > kMaxPivots) throw NumericalError("simplex pivot limit exceeded");
  }
}

}  // namespace detail

inline LpResult solve_simplex(const LinearProgram& lp, double tol = 1e-9) {
  const std::size_t nv = lp.n_vars();
  for (const auto& c : lp.constraints)
    if (c.coeffs.size() != nv) throw InputError("constraint '" + c.name + "' has the wrong width");

  // Map every variable to nonnegative standard columns.
  enum class Kind { shift, mirror, split };
  struct Map {
    Kind kind;
    std::size_t col;
    double offset;
  };
  std::vector<Map> vmap;
  std::size_t ns = 0;
  for (std::size_t j = 0; j < nv; ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    if (std::isfinite(lo)) {
      vmap.push_back({Kind::shift, ns++, lo});
    } else if (std::isfinite(hi)) {
      vmap.push_back({Kind::mirror, ns++, hi});
    } else {
      vmap.push_back({Kind::split, ns, 0.0});
      ns += 2;
    }
  }

  struct Row {
    std::vector<double> a;
    Sense sense;
    double b;
  };
  std::vector<Row> rows;
  auto push_row = [&](const std::vector<double>& coeffs, Sense sense, double rhs) {
    Row r{std::vector<double>(ns, 0.0), sense, rhs};
    for (std::size_t j = 0; j < nv; ++j) {
      const double a = coeffs[j];
      if (a == 0.0) continue;
      const auto& m = vmap[j];
      switch (m.kind) {
        case Kind::shift:
          r.a[m.col] += a;
          r.b -= a * m.offset;
          break;
        case Kind::mirror:
          r.a[m.col] -= a;
          r.b -= a * m.offset;
          break;
        case Kind::split:
          r.a[m.col] += a;
          r.a[m.col + 1] -= a;
          break;
      }
    }
    if (r.b < 0.0) {
      for (auto& v : r.a) v = -v;
      r.b = -r.b;
      if (r.sense == Sense::le) {
        r.sense = Sense::ge;
      } else if (r.sense == Sense::ge) {
        r.sense = Sense::le;
      }
    }
    rows.push_back(std::move(r));
  };
  for (const auto& c : lp.constraints) push_row(c.coeffs, c.sense, c.rhs);
  for (std::size_t j = 0; j < nv; ++j) {
    if (vmap[j].kind == Kind::shift && std::isfinite(lp.upper[j])) {
      std::vector<double> unit(nv, 0.0);
      unit[j] = 1.0;
      push_row(unit, Sense::le, lp.upper[j]);
    }
  }

  std::size_t n_slack = 0, n_art = 0;
  for (const auto& r : rows) {
    if (r.sense != Sense::eq) ++n_slack;
    if (r.sense != Sense::le) ++n_art;
  }
  const std::size_t art0 = ns + n_slack;
  const std::size_t ncols = art0 + n_art;
  detail::Tableau t(rows.size(), ncols);
  std::size_t next_slack = ns, next_art = art0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < ns; ++c) t.at(r, c) = rows[r].a[c];
    t.rhs(r) = rows[r].b;
    switch (rows[r].sense) {
      case Sense::le:
        t.at(r, next_slack) = 1.0;
        t.basis()[r] = next_slack++;
        break;
      case Sense::ge:
        t.at(r, next_slack++) = -1.0;
        t.at(r, next_art) = 1.0;
        t.basis()[r] = next_art++;
        break;
      case Sense::eq:
        t.at(r, next_art) = 1.0;
        t.basis()[r] = next_art++;
        break;
    }
  }

  LpResult res;
  if (n_art > 0) {
    std::vector<double> phase1(ncols, 0.0);
    for (std::size_t c = art0; c < ncols; ++c) phase1[c] = -1.0;
    detail::run_phase(t, phase1, ncols, tol, res.pivots);
    double infeas = 0.0, scale = 1.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.basis()[r] >= art0) infeas += t.rhs(r);
    }
    for (const auto& r : rows) scale = std::max(scale, std::abs(r.b));
    if (infeas > tol * scale) {
      res.status = LpStatus::infeasible;
      return res;
    }
    // Drive zero-valued artificials out of the basis; drop redundant rows.
    for (std::size_t r = 0; r < t.rows();) {
      if (t.basis()[r] < art0) {
        ++r;
        continue;
      }
      std::size_t col = art0;
      for (std::size_t c = 0; c < art0; ++c)
        if (std::abs(t.at(r, c)) > tol) {
          col = c;
          break;
        }
      if (col < art0) {
        t.pivot(r, col);
        ++r;
      } else {
        t.drop_row(r);
      }
    }
  }

  std::vector<double> cost(ncols, 0.0);
  const double sign = lp.maximize ? 1.0 : -1.0;
  for (std::size_t j = 0; j < nv; ++j) {
    const double c = sign * lp.objective[j];
    const auto& m = vmap[j];
    switch (m.kind) {
      case Kind::shift: cost[m.col] += c; break;
      case Kind::mirror: cost[m.col] -= c; break;
      case Kind::split:
        cost[m.col] += c;
        cost[m.col + 1] -= c;
        break;
    }
  }
  if (detail::run_phase(t, cost, art0, tol, res.pivots) == detail::PhaseResult::unbounded) {
    res.status = LpStatus::unbounded;
    return res;
  }

  std::vector<double> u(ncols, 0.0);
  for (std::size_t r = 0; r < t.rows(); ++r) u[t.basis()[r]] = t.rhs(r);
  res.x.resize(nv);
  for (std::size_t j = 0; j < nv; ++j) {
    const auto& m = vmap[j];
    switch (m.kind) {
      case Kind::shift: res.x[j] = m.offset + u[m.col]; break;
      case Kind::mirror: res.x[j] = m.offset - u[m.col]; break;
      case Kind::split: res.x[j] = u[m.col] - u[m.col + 1]; break;
    }
  }
  res.objective = 0.0;
  for (std::size_t j = 0; j < nv; ++j) res.objective += lp.objective[j] * res.x[j];
  res.status = LpStatus::optimal;
  return res;
}

}  // namespace dgcomm
