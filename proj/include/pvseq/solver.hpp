#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "poset_graph.hpp"

namespace pvseq {

struct FitConfig {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  long max_iters = 200000;
  // When positive, every node's weight is raised by this amount. Zero-weight
  // nodes otherwise have non-unique fitted values (their objective term
  // vanishes); the bump makes outputs reproducible by pulling them toward
  // their target, which is 0 for never-observed sequences.
  double zero_weight_eps = 0.0;

  void validate() const {
    if (!(abs_tol > 0) || !(rel_tol > 0)) throw std::invalid_argument("FitConfig: tolerances must be > 0");
    if (max_iters < 1) throw std::invalid_argument("FitConfig: max_iters must be >= 1");
    if (zero_weight_eps < 0) throw std::invalid_argument("FitConfig: zero_weight_eps must be >= 0");
  }
};

enum class FitStatus { Converged, MaxIters };

inline const char* to_string(FitStatus s) { return s == FitStatus::Converged ? "converged" : "max_iters"; }

struct FitResult {
  std::vector<double> x;
  double objective = 0;       // sum of w_v (x_v - t_v)^2 with the caller's weights
  long iterations = 0;
  double max_violation = 0;   // largest x_u - x_v over constraint edges
  FitStatus status = FitStatus::Converged;
  // Diagnostics at the solver's exit point (before the feasibility polish):
  // infinity norm of the stationarity residual plus any dual sign violation,
  // and the multiplier per constraint edge.
  double kkt_residual = 0;
  std::vector<double> edge_duals;
};

namespace detail {

// Symmetric operator M = diag(2w + sigma + rho(1 + deg)) - rho * Adjacency,
// the normal matrix of the splitting step. Solved by Jacobi-preconditioned
// conjugate gradients, warm-started across outer iterations.
struct SplitSystem {
  std::size_t n;
  double sigma;
  double rho;
  std::vector<double> base_diag;  // 2w + sigma
  std::vector<std::size_t> adj_off;
  std::vector<std::uint32_t> adj;
  std::vector<double> diag;

  SplitSystem(std::span<const double> w, std::span<const Edge> edges, double sigma_, double rho_)
      : n(w.size()), sigma(sigma_), rho(rho_), base_diag(n), adj_off(n + 1, 0) {
    for (std::size_t i = 0; i < n; ++i) base_diag[i] = 2 * w[i] + sigma;
    for (const Edge& e : edges) {
      ++adj_off[e.from + 1];
      ++adj_off[e.to + 1];
    }
    for (std::size_t i = 0; i < n; ++i) adj_off[i + 1] += adj_off[i];
    adj.resize(adj_off[n]);
    std::vector<std::size_t> at(adj_off.begin(), adj_off.end() - 1);
    for (const Edge& e : edges) {
      adj[at[e.from]++] = e.to;
      adj[at[e.to]++] = e.from;
    }
    refresh_diag();
  }

  void set_rho(double r) {
    rho = r;
    refresh_diag();
  }

  void refresh_diag() {
    diag.assign(base_diag.begin(), base_diag.end());
    for (std::size_t i = 0; i < n; ++i)
      diag[i] += rho * (1.0 + static_cast<double>(adj_off[i + 1] - adj_off[i]));
  }

  void apply(const std::vector<double>& p, std::vector<double>& out) const {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = diag[i] * p[i];
      for (std::size_t k = adj_off[i]; k < adj_off[i + 1]; ++k) acc -= rho * p[adj[k]];
      out[i] = acc;
    }
  }

  // Solves M x = rhs in place of x (x doubles as the warm start).
  void solve(const std::vector<double>& rhs, std::vector<double>& x, std::vector<double>& r,
             std::vector<double>& z, std::vector<double>& p, std::vector<double>& mp) const {
    apply(x, r);
    double rhs_norm2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      r[i] = rhs[i] - r[i];
      rhs_norm2 += rhs[i] * rhs[i];
    }
    const double stop2 = std::max(1e-20 * rhs_norm2, 1e-60);
    double rz = 0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = r[i] / diag[i];
      rz += r[i] * z[i];
    }
    p = z;
    for (int it = 0; it < 500; ++it) {
      double r2 = 0;
      for (std::size_t i = 0; i < n; ++i) r2 += r[i] * r[i];
      if (r2 <= stop2) break;
      apply(p, mp);
      double pmp = 0;
      for (std::size_t i = 0; i < n; ++i) pmp += p[i] * mp[i];
      if (pmp <= 0) break;
      const double alpha = rz / pmp;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * mp[i];
      }
      double rz_next = 0;
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = r[i] / diag[i];
        rz_next += r[i] * z[i];
      }
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
};

inline double max_edge_violation(std::span<const Edge> edges, const std::vector<double>& x) {
  double worst = 0;
  for (const Edge& e : edges) worst = std::max(worst, x[e.from] - x[e.to]);
  return worst;
}

// One monotone sweep in rank order: edges are sorted by (from, to) and every
// edge increases rank, so propagating max along them closes all constraints.
inline void polish_monotone(std::span<const Edge> edges, std::vector<double>& x) {
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  for (const Edge& e : edges)
    if (x[e.to] < x[e.from]) x[e.to] = x[e.from];
}

struct UnionFind {
  std::vector<std::uint32_t> parent;

  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::uint32_t>(i);
  }

  std::uint32_t find(std::uint32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[b] = a;
  }
};

// Active-set refinement: edges the iterate holds (near-)tight are treated as
// equalities, whose optimal solution pools each connected block to its
// weighted target mean (clamped to the box). A final sweep restores order
// between blocks in case the detected set was off; the caller keeps this
// candidate only when it does not worsen the objective.
inline std::vector<double> pool_active_blocks(std::span<const Edge> edges, std::span<const double> w,
                                              std::span<const double> t, const std::vector<double>& x,
                                              double gap_tol) {
  const std::size_t n = x.size();
  UnionFind uf(n);
  for (const Edge& e : edges)
    if (x[e.from] >= x[e.to] - gap_tol) uf.unite(e.from, e.to);
  std::vector<double> sw(n, 0.0), swt(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = uf.find(static_cast<std::uint32_t>(i));
    sw[r] += w[i];
    swt[r] += w[i] * t[i];
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t r = uf.find(static_cast<std::uint32_t>(i));
    out[i] = std::clamp(sw[r] > 0 ? swt[r] / sw[r] : x[i], 0.0, 1.0);
  }
  for (const Edge& e : edges)
    if (out[e.to] < out[e.from]) out[e.to] = out[e.from];
  return out;
}

}  // namespace detail

// Weighted least squares onto the monotone cone of `edges` intersected with
// the unit box: minimize sum_v w_v (x_v - t_v)^2 subject to x_u <= x_v per
// edge and 0 <= x <= 1. Operator-splitting method (ADMM) with over-relaxation
// and adaptive penalty; the returned x is exactly feasible thanks to a final
// clamp-and-sweep polish.
inline FitResult solve_monotone(std::size_t n_nodes, std::span<const Edge> edges,
                                std::span<const double> weights, std::span<const double> targets,
                                const FitConfig& cfg = {}) {
  cfg.validate();
  if (weights.size() != n_nodes || targets.size() != n_nodes)
    throw std::invalid_argument("solve_monotone: weights/targets size mismatch");
  for (double w : weights)
    if (!(w >= 0) || !std::isfinite(w)) throw std::domain_error("solve_monotone: weights must be finite and >= 0");
  for (double t : targets)
    if (!std::isfinite(t)) throw std::domain_error("solve_monotone: targets must be finite");
  for (const Edge& e : edges)
    if (e.from >= n_nodes || e.to >= n_nodes) throw std::invalid_argument("solve_monotone: edge endpoint out of range");

  const std::size_t n = n_nodes;
  const std::size_t ne = edges.size();

  std::vector<double> w(weights.begin(), weights.end());
  if (cfg.zero_weight_eps > 0)
    for (double& wi : w) wi += cfg.zero_weight_eps;

  FitResult res;
  res.edge_duals.assign(ne, 0.0);

  auto eff_objective = [&](const std::vector<double>& v) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - targets[i];
      s += w[i] * d * d;
    }
    return s;
  };

  auto finish = [&](std::vector<double> x, long iters, FitStatus status, double kkt, bool refine) {
    detail::polish_monotone(edges, x);
    if (refine && ne) {
      std::vector<double> pooled = detail::pool_active_blocks(edges, w, targets, x, 1e-6);
      if (eff_objective(pooled) <= eff_objective(x)) x = std::move(pooled);
    }
    res.iterations = iters;
    res.status = status;
    res.kkt_residual = kkt;
    res.max_violation = ne ? detail::max_edge_violation(edges, x) : 0.0;
    res.objective = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - targets[i];
      res.objective += weights[i] * d * d;
    }
    res.x = std::move(x);
    return res;
  };

  // A clamped target that already satisfies every edge is the projection:
  // the box clamp is coordinatewise optimal and lands inside the cone.
  {
    std::vector<double> xc(targets.begin(), targets.end());
    for (double& v : xc) v = std::clamp(v, 0.0, 1.0);
    if (detail::max_edge_violation(edges, xc) <= 0.0) {
      // Interior coordinates are untouched by the clamp, so the gradient
      // vanishes there; clamped ones have it pointing outward. KKT holds
      // exactly with bound multipliers absorbing the gradient.
      return finish(std::move(xc), 0, FitStatus::Converged, 0.0, false);
    }
  }

  const double sigma = 1e-6;
  const double alpha = 1.6;
  double rho = 1.0;
  detail::SplitSystem sys(w, edges, sigma, rho);

  const std::size_t rows = ne + n;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = -2 * w[i] * targets[i];

  std::vector<double> x(targets.begin(), targets.end());
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  std::vector<double> xt = x;  // splitting-step solution, doubles as CG warm start
  std::vector<double> z(rows), y(rows, 0.0), ax(rows), rhs(n);
  std::vector<double> cg_r(n), cg_z(n), cg_p(n), cg_mp(n);

  auto apply_a = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t k = 0; k < ne; ++k) out[k] = v[edges[k].from] - v[edges[k].to];
    for (std::size_t i = 0; i < n; ++i) out[ne + i] = v[i];
  };
  auto clip_row = [&](std::size_t k, double v) {
    return k < ne ? std::min(v, 0.0) : std::clamp(v, 0.0, 1.0);
  };

  apply_a(x, ax);
  for (std::size_t k = 0; k < rows; ++k) z[k] = clip_row(k, ax[k]);

  long used = cfg.max_iters;
  FitStatus status = FitStatus::MaxIters;
  for (long it = 1; it <= cfg.max_iters; ++it) {
    // rhs = sigma x - q + A^T (rho z - y)
    for (std::size_t i = 0; i < n; ++i) rhs[i] = sigma * x[i] - q[i] + rho * z[ne + i] - y[ne + i];
    for (std::size_t k = 0; k < ne; ++k) {
      const double v = rho * z[k] - y[k];
      rhs[edges[k].from] += v;
      rhs[edges[k].to] -= v;
    }
    sys.solve(rhs, xt, cg_r, cg_z, cg_p, cg_mp);
    apply_a(xt, ax);
    for (std::size_t i = 0; i < n; ++i) x[i] = alpha * xt[i] + (1 - alpha) * x[i];
    for (std::size_t k = 0; k < rows; ++k) {
      const double v = alpha * ax[k] + (1 - alpha) * z[k];
      const double zk = clip_row(k, v + y[k] / rho);
      y[k] += rho * (v - zk);
      z[k] = zk;
    }

    if (it % 10 == 0 || it == cfg.max_iters) {
      apply_a(x, ax);
      double prim_res = 0, ax_norm = 0, z_norm = 0;
      for (std::size_t k = 0; k < rows; ++k) {
        prim_res = std::max(prim_res, std::abs(ax[k] - z[k]));
        ax_norm = std::max(ax_norm, std::abs(ax[k]));
        z_norm = std::max(z_norm, std::abs(z[k]));
      }
      // dual = P x + q + A^T y
      double dual_res = 0, px_norm = 0, aty_norm = 0, q_norm = 0;
      {
        std::vector<double>& aty = rhs;  // reuse buffer
        for (std::size_t i = 0; i < n; ++i) aty[i] = y[ne + i];
        for (std::size_t k = 0; k < ne; ++k) {
          aty[edges[k].from] += y[k];
          aty[edges[k].to] -= y[k];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double px = 2 * w[i] * x[i];
          dual_res = std::max(dual_res, std::abs(px + q[i] + aty[i]));
          px_norm = std::max(px_norm, std::abs(px));
          aty_norm = std::max(aty_norm, std::abs(aty[i]));
          q_norm = std::max(q_norm, std::abs(q[i]));
        }
      }
      const double eps_prim = cfg.abs_tol + cfg.rel_tol * std::max(ax_norm, z_norm);
      const double eps_dual = cfg.abs_tol + cfg.rel_tol * std::max({px_norm, aty_norm, q_norm});
      if (prim_res <= eps_prim && dual_res <= eps_dual) {
        used = it;
        status = FitStatus::Converged;
        break;
      }
      if (it % 200 == 0) {
        const double pr = prim_res / std::max({ax_norm, z_norm, 1e-30});
        const double dr = dual_res / std::max({px_norm, aty_norm, q_norm, 1e-30});
        if (pr > 5 * dr || dr > 5 * pr) {
          const double next = std::clamp(rho * std::sqrt(pr / std::max(dr, 1e-30)), 1e-4, 1e4);
          if (next != rho) {
            rho = next;
            sys.set_rho(rho);
          }
        }
      }
    }
  }

  // KKT diagnostics at the exit point: stationarity plus edge-dual sign.
  double kkt = 0;
  {
    std::vector<double>& aty = rhs;
    for (std::size_t i = 0; i < n; ++i) aty[i] = y[ne + i];
    for (std::size_t k = 0; k < ne; ++k) {
      aty[edges[k].from] += y[k];
      aty[edges[k].to] -= y[k];
      kkt = std::max(kkt, -y[k]);  // multipliers of x_u <= x_v must be >= 0
      res.edge_duals[k] = y[k];
    }
    for (std::size_t i = 0; i < n; ++i)
      kkt = std::max(kkt, std::abs(2 * w[i] * x[i] + q[i] + aty[i]));
  }
  return finish(std::move(x), used, status, kkt, true);
}

inline FitResult solve_monotone(const PosetGraph& g, std::span<const double> weights,
                                std::span<const double> targets, const FitConfig& cfg = {}) {
  if (g.node_count() != weights.size())
    throw std::invalid_argument("solve_monotone: graph and weights disagree on node count");
  return solve_monotone(weights.size(), g.edges, weights, targets, cfg);
}

}  // namespace pvseq
