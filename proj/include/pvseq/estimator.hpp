#pragma once

#include <charconv>
#include <ostream>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "solver.hpp"

namespace pvseq {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

template <typename R>
concept HistoryRange = std::ranges::input_range<R> && requires(const std::ranges::range_value_t<R>& h) {
  { h.sequence } -> std::convertible_to<const PVSequence&>;
  { h.chosen } -> std::convertible_to<bool>;
};

// Per-sequence observation counts n_v, choice counts q_v, and empirical
// choice probabilities q_v / n_v (0 where nothing was observed).
struct EmpiricalStats {
  SequenceSpace space;
  std::vector<double> weights;
  std::vector<double> choices;
  std::vector<double> targets;
};

template <HistoryRange R>
EmpiricalStats empirical_sequence_stats(const R& histories, const SequenceSpace& space) {
  EmpiricalStats st{space,
                    std::vector<double>(space.cardinality(), 0.0),
                    std::vector<double>(space.cardinality(), 0.0),
                    std::vector<double>(space.cardinality(), 0.0)};
  for (const auto& h : histories) {
    const auto r = space.rank(h.sequence);
    st.weights[r] += 1.0;
    if (h.chosen) st.choices[r] += 1.0;
  }
  for (std::size_t v = 0; v < st.targets.size(); ++v)
    if (st.weights[v] > 0) st.targets[v] = st.choices[v] / st.weights[v];
  return st;
}

// The same statistics collapsed onto the recency-frequency grid
// [1,n] x [1,m], row-major with recency as the slow axis.
struct RFTable {
  int periods;
  int max_pv;
  std::vector<double> weights;
  std::vector<double> choices;
  std::vector<double> targets;

  std::size_t index(int r, int f) const {
    return static_cast<std::size_t>(r - 1) * static_cast<std::size_t>(max_pv) + static_cast<std::size_t>(f - 1);
  }
  std::size_t cells() const { return static_cast<std::size_t>(periods) * static_cast<std::size_t>(max_pv); }
};

template <HistoryRange R>
RFTable empirical_rf_table(const R& histories, const SequenceSpace& space) {
  RFTable t{space.periods(), space.max_pv(), {}, {}, {}};
  t.weights.assign(t.cells(), 0.0);
  t.choices.assign(t.cells(), 0.0);
  t.targets.assign(t.cells(), 0.0);
  for (const auto& h : histories) {
    const RFKey key = recency_frequency(space, h.sequence);
    const std::size_t c = t.index(key.r, key.f);
    t.weights[c] += 1.0;
    if (h.chosen) t.choices[c] += 1.0;
  }
  for (std::size_t c = 0; c < t.cells(); ++c)
    if (t.weights[c] > 0) t.targets[c] = t.choices[c] / t.weights[c];
  return t;
}

// Monotone grid DAG: each cell is dominated by its right and lower neighbors
// (higher frequency, higher recency). Emitted sorted by (from, to).
inline std::vector<Edge> grid_edges(int rows, int cols) {
  std::vector<Edge> edges;
  for (int r = 0; r < rows; ++r)
    for (int f = 0; f < cols; ++f) {
      const std::uint32_t at = static_cast<std::uint32_t>(r * cols + f);
      if (f + 1 < cols) edges.push_back({at, at + 1});
      if (r + 1 < rows) edges.push_back({at, at + static_cast<std::uint32_t>(cols)});
    }
  return edges;
}

// Shape-restricted fit of the per-sequence model over the given constraint
// graph (reduction, operation, and enumeration variants all describe the
// same feasible cone).
inline FitResult fit_monotone(const PosetGraph& graph, const EmpiricalStats& stats, const FitConfig& cfg = {}) {
  if (!(graph.space == stats.space))
    throw std::invalid_argument("fit_monotone: graph and statistics built over different spaces");
  return solve_monotone(stats.weights.size(), graph.edges, stats.weights, stats.targets, cfg);
}

// Two-dimensional monotone model on the recency-frequency grid.
inline FitResult fit_2d(const RFTable& table, const FitConfig& cfg = {}) {
  const std::vector<Edge> edges = grid_edges(table.periods, table.max_pv);
  return solve_monotone(table.cells(), edges, table.weights, table.targets, cfg);
}

// Monotone correction of externally produced predictions: keep the observed
// weights, swap the targets for the external values, and re-project.
inline FitResult postprocess_predictions(const PosetGraph& graph, const EmpiricalStats& stats,
                                         std::span<const double> external, const FitConfig& cfg = {}) {
  if (!(graph.space == stats.space))
    throw std::invalid_argument("postprocess_predictions: graph and statistics built over different spaces");
  if (external.size() != stats.weights.size())
    throw std::domain_error("postprocess_predictions: one external value per node required");
  return solve_monotone(stats.weights.size(), graph.edges, stats.weights, external, cfg);
}

inline void write_fit_csv(std::ostream& os, const SequenceSpace& space, const EmpiricalStats& stats,
                          const FitResult& fit) {
  os << "rank,sequence,weight,target,fitted\n";
  for (std::uint64_t r = 0; r < space.cardinality(); ++r)
    os << r << ",\"" << sequence_to_string(space.unrank(r)) << "\"," << detail::format_double(stats.weights[r])
       << ',' << detail::format_double(stats.targets[r]) << ',' << detail::format_double(fit.x[r]) << '\n';
}

inline void write_rf_csv(std::ostream& os, const RFTable& table, const FitResult& fit) {
  os << "r,f,weight,target,fitted\n";
  for (int r = 1; r <= table.periods; ++r)
    for (int f = 1; f <= table.max_pv; ++f) {
      const std::size_t c = table.index(r, f);
      os << r << ',' << f << ',' << detail::format_double(table.weights[c]) << ','
         << detail::format_double(table.targets[c]) << ',' << detail::format_double(fit.x[c]) << '\n';
    }
}

// Heatmap slice over (v_1, v_2) with v_3 fixed and all later periods zero.
inline void write_slice_csv(std::ostream& os, const SequenceSpace& space, std::span<const double> values, int v3) {
  if (space.periods() < 3) throw std::invalid_argument("write_slice_csv: needs at least three periods");
  if (v3 < 0 || v3 > space.max_pv()) throw std::domain_error("write_slice_csv: v3 outside [0,max_pv]");
  os << "v1,v2,value\n";
  PVSequence v(static_cast<std::size_t>(space.periods()), 0);
  v[2] = v3;
  for (int v1 = 0; v1 <= space.max_pv(); ++v1)
    for (int v2 = 0; v2 <= space.max_pv(); ++v2) {
      v[0] = v1;
      v[1] = v2;
      os << v1 << ',' << v2 << ',' << detail::format_double(values[space.rank(v)]) << '\n';
    }
}

inline nlohmann::json fit_diagnostics(const FitResult& fit, const FitConfig& cfg, std::uint64_t nodes,
                                      std::uint64_t edges) {
  return nlohmann::json{{"status", to_string(fit.status)},
                        {"iterations", fit.iterations},
                        {"objective", fit.objective},
                        {"max_violation", fit.max_violation},
                        {"kkt_residual", fit.kkt_residual},
                        {"abs_tol", cfg.abs_tol},
                        {"rel_tol", cfg.rel_tol},
                        {"zero_weight_eps", cfg.zero_weight_eps},
                        {"nodes", nodes},
                        {"edges", edges}};
}

}  // namespace pvseq
