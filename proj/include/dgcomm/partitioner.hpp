#pragma once

// DG-centric community detection: nearest-DG adjacency, sensitivity-weighted
// graph, and greedy agglomerative modularity maximization.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgcomm/common.hpp"
#include "dgcomm/grid_model.hpp"
#include "dgcomm/power_flow.hpp"

namespace dgcomm {

// Undirected weighted graph on a dense symmetric weight matrix.
class WeightedGraph {
 public:
  explicit WeightedGraph(Eigen::MatrixXd weights) : w_(std::move(weights)) {
    if (w_.rows() != w_.cols()) throw InputError("weight matrix must be square");
    const auto n = w_.rows();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double a = w_(i, j);
        if (!std::isfinite(a) || a < 0.0) throw InputError("weights must be finite and nonnegative");
        if (std::abs(a - w_(j, i)) > 1e-12) throw InputError("weight matrix is not symmetric");
      }
    degrees_ = w_.rowwise().sum();
    total_ = degrees_.sum();
  }

  std::size_t n_nodes() const { return static_cast<std::size_t>(w_.rows()); }
  const Eigen::MatrixXd& weights() const { return w_; }
  double weight(std::size_t i, std::size_t j) const {
    return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  // 2m: every ordered pair counted, so each undirected edge twice.
  double total_weight() const { return total_; }
  double degree(std::size_t i) const { return degrees_(static_cast<Eigen::Index>(i)); }

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd degrees_;
  double total_ = 0.0;
};

struct Partition {
  std::vector<int> community_of;  // node index -> community id, contiguous from 0
  int n_communities = 0;
  double modularity = 0.0;

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_communities));
    for (std::size_t i = 0; i < community_of.size(); ++i) out[static_cast<std::size_t>(community_of[i])].push_back(i);
    return out;
  }
};

// Renumbers labels to 0..k-1 in order of first appearance by node index.
inline std::vector<int> canonical_labels(const std::vector<int>& labels, int* count = nullptr) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  if (count) *count = static_cast<int>(remap.size());
  return out;
}

struct Merge {
  int step = 0;  // 1-based
  int community_a = 0;
  int community_b = 0;  // absorbed into community_a
  double modularity_after = 0.0;
};

struct Dendrogram {
  double initial_modularity = 0.0;  // all singletons
  std::vector<Merge> merges;
  int best_step = 0;  // number of merges applied in the selected partition

  double modularity_at(int step) const { return step == 0 ? initial_modularity : merges[step - 1].modularity_after; }
};

enum class PeakPolicy { global, first_local };

// Exact double sum over every ordered node pair in the same community.
inline double modularity(const WeightedGraph& g, const std::vector<int>& community_of) {
  const std::size_t n = g.n_nodes();
  if (community_of.size() != n) throw InputError("partition does not cover the graph");
  const double two_m = g.total_weight();
  if (!(two_m > 0.0)) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (community_of[i] == community_of[j]) sum += g.weight(i, j) - g.degree(i) * g.degree(j) / two_m;
  return sum / two_m;
}

inline double modularity(const WeightedGraph& g, const Partition& p) { return modularity(g, p.community_of); }

// Agglomerates from singletons, always merging the pair with the largest
// modularity gain (ties to the lexicographically lowest id pair), until one
// community remains. The merged community keeps the lower id.
inline std::pair<Partition, Dendrogram> greedy_partition(const WeightedGraph& g,
                                                         PeakPolicy policy = PeakPolicy::global) {
  const std::size_t n = g.n_nodes();
  if (n == 0) throw InputError("empty graph");
  const double two_m = g.total_weight();
  if (!(two_m > 0.0)) throw InputError("graph has zero total weight");
  constexpr double kTie = 1e-12;

  // e(a, b): weight between communities, e(a, a) intra weight (ordered pairs);
  // a(c): summed degree.
  Eigen::MatrixXd e = g.weights();
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = g.degree(i);
  std::vector<std::size_t> alive(n);
  for (std::size_t i = 0; i < n; ++i) alive[i] = i;
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = static_cast<int>(i);

  Dendrogram dendro;
  dendro.initial_modularity = modularity(g, label);
  std::vector<std::vector<int>> history{label};
  double m_now = dendro.initial_modularity;

  for (int step = 1; alive.size() > 1; ++step) {
    double best = -kInf;
    std::size_t best_a = 0, best_b = 0;
    for (std::size_t ia = 0; ia < alive.size(); ++ia) {
      const auto a = static_cast<Eigen::Index>(alive[ia]);
      for (std::size_t ib = ia + 1; ib < alive.size(); ++ib) {
        const auto b = static_cast<Eigen::Index>(alive[ib]);
        double gain = 2.0 * (e(a, b) / two_m - deg[alive[ia]] * deg[alive[ib]] / (two_m * two_m));
        if (gain > best + kTie) {
          best = gain;
          best_a = ia;
          best_b = ib;
        }
      }
    }
    const std::size_t a = alive[best_a], b = alive[best_b];
    const auto ea = static_cast<Eigen::Index>(a), eb = static_cast<Eigen::Index>(b);
    e(ea, ea) += e(eb, eb) + e(ea, eb) + e(eb, ea);
    for (std::size_t c : alive) {
      if (c == a || c == b) continue;
      const auto ec = static_cast<Eigen::Index>(c);
      e(ea, ec) += e(eb, ec);
      e(ec, ea) = e(ea, ec);
    }
    deg[a] += deg[b];
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(best_b));
    for (auto& l : label)
      if (l == static_cast<int>(b)) l = static_cast<int>(a);

    m_now += best;
    dendro.merges.push_back({step, static_cast<int>(a), static_cast<int>(b), m_now});
    history.push_back(label);
  }

  const int steps = static_cast<int>(dendro.merges.size());
  int chosen = 0;
  if (policy == PeakPolicy::global) {
    for (int s = 1; s <= steps; ++s)
      if (dendro.modularity_at(s) > dendro.modularity_at(chosen) + kTie) chosen = s;
  } else {
    chosen = steps;
    for (int s = 0; s < steps; ++s)
      if (dendro.modularity_at(s + 1) < dendro.modularity_at(s) - kTie) {
        chosen = s;
        break;
      }
  }
  dendro.best_step = chosen;

  Partition p;
  p.community_of = canonical_labels(history[static_cast<std::size_t>(chosen)], &p.n_communities);
  p.modularity = modularity(g, p.community_of);
  return {std::move(p), std::move(dendro)};
}

// ---------------------------------------------------------------------------
// DG adjacency and combined weights

// Row-wise argmax: one 1 per row at the most sensitive DG column. Ties go to
// the lowest column (DG ids are sorted). Non-finite entries are ignored.
inline Eigen::MatrixXd build_dg_adjacency(const Eigen::MatrixXd& dg_cols) {
  if (dg_cols.cols() == 0 || dg_cols.rows() == 0) throw InputError("DG sensitivity matrix is empty");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dg_cols.rows(), dg_cols.cols());
  for (Eigen::Index i = 0; i < dg_cols.rows(); ++i) {
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < dg_cols.cols(); ++j) {
      double v = dg_cols(i, j);
      if (!std::isfinite(v)) continue;
      if (best < 0 || v > dg_cols(i, best)) best = j;
    }
    if (best < 0) throw InputError("row " + std::to_string(i) + " has no finite DG sensitivity");
    d(i, best) = 1.0;
  }
  return d;
}

// W = clamp(A, 0) with +1 at (i, node of DG j) wherever D(i, j) = 1, then
// symmetrized as (W + W^T) / 2 with a zero diagonal.
inline WeightedGraph combine_weights(const Eigen::MatrixXd& sens, const Eigen::MatrixXd& d,
                                     const std::vector<std::size_t>& dg_nodes) {
  if (sens.rows() != sens.cols()) throw InputError("node sensitivity matrix must be square");
  if (d.rows() != sens.rows()) throw InputError("DG adjacency rows do not match the node count");
  if (static_cast<std::size_t>(d.cols()) != dg_nodes.size()) throw InputError("DG adjacency columns do not match DG map");
  Eigen::MatrixXd w = sens.cwiseMax(0.0);
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    auto node = static_cast<Eigen::Index>(dg_nodes[static_cast<std::size_t>(j)]);
    if (node >= w.rows()) throw InputError("DG node index out of range");
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      if (d(i, j) != 0.0) w(i, node) += d(i, j);
  }
  Eigen::MatrixXd sym = (w + w.transpose()) / 2.0;
  sym.diagonal().setZero();
  return WeightedGraph(std::move(sym));
}

// Partition of a network's buses. The graph covers the non-slack buses
// (node_ids); the slack bus joins the community of its lowest-id neighbour
// and appears only in community_by_bus.
struct NetworkPartition {
  std::vector<int> node_ids;
  Partition partition;
  Dendrogram dendrogram;
  std::map<int, int> community_by_bus;

  int n_communities() const { return partition.n_communities; }
  int community_of_bus(int bus) const {
    auto it = community_by_bus.find(bus);
    if (it == community_by_bus.end()) throw InputError("bus " + std::to_string(bus) + " is not partitioned");
    return it->second;
  }
  // Bus ids of one community in ascending order, including the slack if
  // assigned there.
  std::vector<int> buses_of(int community) const {
    std::vector<int> out;
    for (const auto& [bus, c] : community_by_bus)
      if (c == community) out.push_back(bus);
    return out;
  }
};

inline void attach_slack(const NetworkModel& net, NetworkPartition& np) {
  for (std::size_t i = 0; i < np.node_ids.size(); ++i)
    np.community_by_bus[np.node_ids[i]] = np.partition.community_of[i];
  auto slack = net.slack_id();
  if (!slack) return;
  int best = -1;
  auto consider = [&](int a, int b) {
    if (a == *slack && np.community_by_bus.count(b) && (best < 0 || b < best)) best = b;
  };
  for (const auto& br : net.branches) {
    consider(br.from_bus, br.to_bus);
    consider(br.to_bus, br.from_bus);
  }
  for (const auto& tr : net.transformers) {
    consider(tr.primary_bus, tr.secondary_bus);
    consider(tr.secondary_bus, tr.primary_bus);
  }
  np.community_by_bus[*slack] = best >= 0 ? np.community_by_bus[best] : 0;
}

// The full pipeline: DG columns -> nearest-DG adjacency -> combined weights ->
// greedy agglomeration.
inline NetworkPartition partition_network(const NetworkModel& net, const SensitivityMatrix& sens,
                                          SensitivityKind mode = SensitivityKind::VQ,
                                          PeakPolicy policy = PeakPolicy::global) {
  DgColumns cols = dg_columns(sens, net, mode, /*online_only=*/true);
  if (cols.dg_ids.empty()) throw InputError("partitioning requires at least one online DG");
  Eigen::MatrixXd d = build_dg_adjacency(cols.values);
  const Eigen::MatrixXd& node_sens = mode == SensitivityKind::VQ ? sens.a_vq : sens.a_vp;
  WeightedGraph g = combine_weights(node_sens, d, cols.dg_rows);

  NetworkPartition np;
  np.node_ids = sens.bus_ids;
  if (g.n_nodes() == 1) {
    // One non-slack bus: no edges, nothing to merge.
    np.partition.community_of = {0};
    np.partition.n_communities = 1;
  } else {
    auto [p, dendro] = greedy_partition(g, policy);
    np.partition = std::move(p);
    np.dendrogram = std::move(dendro);
  }
  attach_slack(net, np);
  return np;
}

// ---------------------------------------------------------------------------
// Reports

struct CommunityRow {
  int community = 0;
  int nodes = 0;
  int dgs = 0;
};

inline std::vector<CommunityRow> community_table(const NetworkModel& net, const NetworkPartition& np) {
  std::vector<CommunityRow> rows(static_cast<std::size_t>(np.n_communities()));
  for (int c = 0; c < np.n_communities(); ++c) rows[static_cast<std::size_t>(c)].community = c;
  for (const auto& [bus, c] : np.community_by_bus) ++rows[static_cast<std::size_t>(c)].nodes;
  for (const auto& g : net.dgs)
    if (auto it = np.community_by_bus.find(g.bus); it != np.community_by_bus.end())
      ++rows[static_cast<std::size_t>(it->second)].dgs;
  return rows;
}

inline void write_community_table(const std::filesystem::path& path, const std::vector<CommunityRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << "community,nodes,dgs\n";
  for (const auto& r : rows) out << r.community << ',' << r.nodes << ',' << r.dgs << '\n';
}

inline void write_node_assignment(const std::filesystem::path& path, const std::map<int, int>& community_by_node,
                                  const char* node_header = "bus") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << node_header << ",community\n";
  for (const auto& [node, c] : community_by_node) out << node << ',' << c << '\n';
}

inline void write_dendrogram(const std::filesystem::path& path, const Dendrogram& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path.string());
  out << "step,community_a,community_b,modularity\n";
  out << "0,,," << format_double(d.initial_modularity) << '\n';
  for (const auto& m : d.merges)
    out << m.step << ',' << m.community_a << ',' << m.community_b << ',' << format_double(m.modularity_after) << '\n';
}

}  // namespace dgcomm
