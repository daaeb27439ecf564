#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "poset_graph.hpp"

namespace pvseq {

// Dykstra's cyclic projection onto the intersection of the edge half-spaces
// {x_u <= x_v} and the unit box, in the norm weighted by `weights`. Kept
// deliberately independent of the splitting solver: it serves as the test
// oracle. Intended for small instances and strictly positive weights; a
// weight pair summing to zero falls back to the unweighted projection.
inline std::vector<double> dykstra_project(std::size_t n_nodes, std::span<const Edge> edges,
                                           std::span<const double> weights, std::span<const double> targets,
                                           double tol = 1e-10, long max_cycles = 1000000) {
  if (weights.size() != n_nodes || targets.size() != n_nodes)
    throw std::invalid_argument("dykstra_project: weights/targets size mismatch");
  const std::size_t ne = edges.size();
  std::vector<double> x(targets.begin(), targets.end());
  std::vector<double> edge_corr(2 * ne, 0.0);   // per half-space: carried (u, v) increments
  std::vector<double> box_corr(n_nodes, 0.0);
  std::vector<double> prev(x);

  for (long cycle = 0; cycle < max_cycles; ++cycle) {
    prev = x;
    for (std::size_t k = 0; k < ne; ++k) {
      const std::size_t u = edges[k].from, v = edges[k].to;
      const double au = x[u] + edge_corr[2 * k];
      const double av = x[v] + edge_corr[2 * k + 1];
      double pu = au, pv = av;
      if (au > av) {
        const double wu = weights[u], wv = weights[v];
        const double mu = (wu + wv > 0) ? (wu * au + wv * av) / (wu + wv) : 0.5 * (au + av);
        pu = pv = mu;
      }
      edge_corr[2 * k] = au - pu;
      edge_corr[2 * k + 1] = av - pv;
      x[u] = pu;
      x[v] = pv;
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const double a = x[i] + box_corr[i];
      const double p = std::clamp(a, 0.0, 1.0);
      box_corr[i] = a - p;
      x[i] = p;
    }
    double delta = 0;
    for (std::size_t i = 0; i < n_nodes; ++i) delta = std::max(delta, std::abs(x[i] - prev[i]));
    if (delta < tol) break;
  }
  return x;
}

inline std::vector<double> dykstra_project(const PosetGraph& g, std::span<const double> weights,
                                           std::span<const double> targets, double tol = 1e-10,
                                           long max_cycles = 1000000) {
  return dykstra_project(static_cast<std::size_t>(g.node_count()), g.edges, weights, targets, tol, max_cycles);
}

}  // namespace pvseq
