#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sequence.hpp"

namespace pvseq {

enum class GraphVariant { Enumeration, Operation, Reduction };

inline const char* to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::Enumeration: return "enumeration";
    case GraphVariant::Operation: return "operation";
    default: return "reduction";
  }
}

// Ranks fit 32 bits; spaces past that are rejected up front.
struct Edge {
  std::uint32_t from;
  std::uint32_t to;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// A DAG over sequence ranks. Edges are grouped by ascending source rank —
// a topological order, since every operation increases rank. Enumeration
// and Reduction variants additionally sort each group by target rank;
// the Operation variant keeps its documented per-operation order.
struct PosetGraph {
  SequenceSpace space;
  Relation relation;
  GraphVariant variant;
  std::vector<Edge> edges;

  std::uint64_t node_count() const { return space.cardinality(); }
  std::uint64_t edge_count() const { return edges.size(); }
};

namespace detail {

constexpr std::uint64_t kMaxRankNodes = 0xFFFFFFFFull;
constexpr std::uint64_t kMaxClosureBitsetBytes = 1ull << 30;

inline void require_rankable(const SequenceSpace& sp) {
  if (sp.cardinality() > kMaxRankNodes)
    throw CapacityError("space too large for 32-bit ranks");
}

// Digit view of a rank plus the place value of each period.
struct RankDigits {
  explicit RankDigits(const SequenceSpace& sp)
      : base(static_cast<std::uint64_t>(sp.max_pv()) + 1), digits(static_cast<std::size_t>(sp.periods())),
        place(static_cast<std::size_t>(sp.periods())) {
    std::uint64_t p = 1;
    for (int s = sp.periods(); s >= 1; --s) {
      place[static_cast<std::size_t>(s - 1)] = p;
      p *= base;
    }
  }

  void decode(std::uint64_t r) {
    for (std::size_t i = digits.size(); i-- > 0;) {
      digits[i] = static_cast<int>(r % base);
      r /= base;
    }
  }

  std::uint64_t base;
  std::vector<int> digits;       // 0-based: digits[s-1] is period s
  std::vector<std::uint64_t> place;  // place[s-1] = base^(n-s)
};

template <typename EmitFn>
void operation_edges_from(const SequenceSpace& sp, Relation rel, const RankDigits& d, std::uint64_t r, EmitFn&& emit) {
  const int n = sp.periods();
  const int m = sp.max_pv();
  const auto& v = d.digits;
  for (int s = 1; s <= n; ++s)
    if (v[static_cast<std::size_t>(s - 1)] <= m - 1) emit(r + d.place[static_cast<std::size_t>(s - 1)]);
  for (int s = 1; s <= n; ++s)
    for (int t = s + 1; t <= n; ++t) {
      const int vs = v[static_cast<std::size_t>(s - 1)];
      const int vt = v[static_cast<std::size_t>(t - 1)];
      if (rel == Relation::UM) {
        if (vs <= m - 1 && vt >= 1)
          emit(r + d.place[static_cast<std::size_t>(s - 1)] - d.place[static_cast<std::size_t>(t - 1)]);
      } else {
        if (vs < vt)
          emit(r + static_cast<std::uint64_t>(vt - vs) *
                       (d.place[static_cast<std::size_t>(s - 1)] - d.place[static_cast<std::size_t>(t - 1)]));
      }
    }
}

// Compact adjacency over ranks.
struct Csr {
  std::vector<std::uint64_t> offsets;
  std::vector<std::uint32_t> targets;
};

inline Csr operation_csr(const SequenceSpace& sp, Relation rel) {
  require_rankable(sp);
  const auto card = sp.cardinality();
  Csr csr;
  csr.offsets.assign(card + 1, 0);
  RankDigits d(sp);
  for (std::uint64_t r = 0; r < card; ++r) {
    d.decode(r);
    std::uint64_t deg = 0;
    operation_edges_from(sp, rel, d, r, [&](std::uint64_t) { ++deg; });
    csr.offsets[r + 1] = csr.offsets[r] + deg;
  }
  csr.targets.resize(csr.offsets[card]);
  for (std::uint64_t r = 0; r < card; ++r) {
    d.decode(r);
    std::uint64_t at = csr.offsets[r];
    operation_edges_from(sp, rel, d, r, [&](std::uint64_t to) { csr.targets[at++] = static_cast<std::uint32_t>(to); });
  }
  return csr;
}

// Per-node successor bitsets for the full order, built back to front: the
// successors of u are the operation targets of u plus their successors.
class ClosureBitsets {
 public:
  ClosureBitsets(const SequenceSpace& sp, Relation rel) : nodes_(sp.cardinality()), words_((nodes_ + 63) / 64) {
    if (nodes_ * words_ * 8 > kMaxClosureBitsetBytes)
      throw CapacityError("closure bitsets would exceed the memory budget");
    bits_.assign(nodes_ * words_, 0);
    const Csr csr = operation_csr(sp, rel);
    for (std::uint64_t r = nodes_; r-- > 0;) {
      std::uint64_t* row = bits_.data() + r * words_;
      for (std::uint64_t k = csr.offsets[r]; k < csr.offsets[r + 1]; ++k) {
        const std::uint32_t w = csr.targets[k];
        row[w / 64] |= 1ull << (w % 64);
        const std::uint64_t* succ = bits_.data() + static_cast<std::uint64_t>(w) * words_;
        for (std::uint64_t i = 0; i < words_; ++i) row[i] |= succ[i];
      }
    }
  }

  std::uint64_t nodes() const { return nodes_; }

  bool test(std::uint64_t u, std::uint64_t v) const {
    return (bits_[u * words_ + v / 64] >> (v % 64)) & 1;
  }

  std::uint64_t count_all() const {
    std::uint64_t total = 0;
    for (std::uint64_t w : bits_) total += static_cast<std::uint64_t>(__builtin_popcountll(w));
    return total;
  }

  template <typename EmitFn>
  void for_each(std::uint64_t u, EmitFn&& emit) const {
    const std::uint64_t* row = bits_.data() + u * words_;
    for (std::uint64_t i = 0; i < words_; ++i) {
      std::uint64_t w = row[i];
      while (w) {
        const int b = __builtin_ctzll(w);
        emit(i * 64 + static_cast<std::uint64_t>(b));
        w &= w - 1;
      }
    }
  }

 private:
  std::uint64_t nodes_;
  std::uint64_t words_;
  std::vector<std::uint64_t> bits_;
};

}  // namespace detail

// All admissible single-operation edges, ordered by source rank, then
// operation kind (Up before Move/Swap), then operation indices.
inline PosetGraph operation_graph(const SequenceSpace& sp, Relation rel) {
  detail::require_rankable(sp);
  PosetGraph g{sp, rel, GraphVariant::Operation, {}};
  detail::RankDigits d(sp);
  const auto card = sp.cardinality();
  for (std::uint64_t r = 0; r < card; ++r) {
    d.decode(r);
    detail::operation_edges_from(sp, rel, d, r, [&](std::uint64_t to) {
      g.edges.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(to)});
    });
  }
  return g;
}

// Number of strictly comparable pairs, without materializing them.
inline std::uint64_t closure_pair_count(const SequenceSpace& sp, Relation rel,
                                        std::uint64_t pair_cap = 100'000'000) {
  const detail::ClosureBitsets closure(sp, rel);
  const std::uint64_t total = closure.count_all();
  if (total > pair_cap) throw CapacityError("comparable-pair count exceeds the configured cap");
  return total;
}

// Full transitive closure as an explicit edge list.
inline PosetGraph enumeration_graph(const SequenceSpace& sp, Relation rel,
                                    std::uint64_t edge_cap = 100'000'000) {
  const detail::ClosureBitsets closure(sp, rel);
  const std::uint64_t total = closure.count_all();
  if (total > edge_cap) throw CapacityError("enumeration graph exceeds the configured edge cap");
  PosetGraph g{sp, rel, GraphVariant::Enumeration, {}};
  g.edges.reserve(total);
  for (std::uint64_t u = 0; u < closure.nodes(); ++u)
    closure.for_each(u, [&](std::uint64_t v) {
      g.edges.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v)});
    });
  return g;  // emitted in (from, to) order already
}

// Transitive reduction of a closure graph: drop (u, v) whenever some w sits
// strictly between, i.e. v is reachable in two or more steps.
inline PosetGraph reduce_general(const PosetGraph& g) {
  if (g.variant != GraphVariant::Enumeration)
    throw std::invalid_argument("reduce_general expects an enumeration (closure) graph");
  const std::uint64_t nodes = g.node_count();
  const std::uint64_t words = (nodes + 63) / 64;
  if (nodes * words * 8 > detail::kMaxClosureBitsetBytes)
    throw CapacityError("reduce_general bitsets would exceed the memory budget");
  std::vector<std::uint64_t> succ(nodes * words, 0);
  for (const Edge& e : g.edges) succ[static_cast<std::uint64_t>(e.from) * words + e.to / 64] |= 1ull << (e.to % 64);

  PosetGraph out{g.space, g.relation, GraphVariant::Reduction, {}};
  std::vector<std::uint64_t> twostep(words);
  std::uint64_t row_begin = 0;
  const std::uint64_t edge_total = g.edges.size();
  for (std::uint64_t u = 0; u < nodes && row_begin < edge_total; ++u) {
    std::uint64_t row_end = row_begin;
    while (row_end < edge_total && g.edges[row_end].from == u) ++row_end;
    if (row_end == row_begin) continue;
    std::fill(twostep.begin(), twostep.end(), 0);
    for (std::uint64_t k = row_begin; k < row_end; ++k) {
      const std::uint64_t* sw = succ.data() + static_cast<std::uint64_t>(g.edges[k].to) * words;
      for (std::uint64_t i = 0; i < words; ++i) twostep[i] |= sw[i];
    }
    for (std::uint64_t k = row_begin; k < row_end; ++k) {
      const std::uint32_t v = g.edges[k].to;
      if (!((twostep[v / 64] >> (v % 64)) & 1)) out.edges.push_back(g.edges[k]);
    }
    row_begin = row_end;
  }
  return out;
}

// --- Direct cover constructions. Both walk the lattice once from the all-zero
// --- sequence and emit exactly the edges that survive transitive reduction.

// Covers under the Up/Move order: raise the oldest period, or shift one
// pageview between adjacent periods.
inline PosetGraph construct_reduction_um(const SequenceSpace& sp) {
  detail::require_rankable(sp);
  PosetGraph g{sp, Relation::UM, GraphVariant::Reduction, {}};
  const auto card = sp.cardinality();
  const int n = sp.periods();
  const int m = sp.max_pv();
  detail::RankDigits d(sp);
  std::vector<char> visited(card, 0);
  std::vector<std::uint32_t> queue;
  queue.reserve(card);
  queue.push_back(0);
  visited[0] = 1;
  std::uint64_t processed = 0;
  for (std::uint64_t head = 0; head < queue.size(); ++head, ++processed) {
    const std::uint64_t r = queue[head];
    d.decode(r);
    const auto& v = d.digits;
    auto emit = [&](std::uint64_t to) {
      g.edges.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(to)});
      if (!visited[to]) {
        visited[to] = 1;
        queue.push_back(static_cast<std::uint32_t>(to));
      }
    };
    if (v[static_cast<std::size_t>(n - 1)] <= m - 1) emit(r + 1);
    for (int s = 1; s <= n - 1; ++s)
      if (v[static_cast<std::size_t>(s - 1)] <= m - 1 && v[static_cast<std::size_t>(s)] >= 1)
        emit(r + d.place[static_cast<std::size_t>(s - 1)] - d.place[static_cast<std::size_t>(s)]);
  }
  if (processed != card) throw std::logic_error("cover walk missed part of the lattice");
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

// Covers under the Up/Swap order. An Up at period s is a cover only when no
// later period holds u_s or u_s + 1; a Swap of s < t survives only while no
// period between them holds a value in [u_s, u_t], tracked by shrinking the
// admissible upper bound as t advances.
inline PosetGraph construct_reduction_us(const SequenceSpace& sp) {
  detail::require_rankable(sp);
  PosetGraph g{sp, Relation::US, GraphVariant::Reduction, {}};
  const auto card = sp.cardinality();
  const int n = sp.periods();
  const int m = sp.max_pv();
  detail::RankDigits d(sp);
  std::vector<char> visited(card, 0);
  std::vector<std::uint32_t> queue;
  queue.reserve(card);
  queue.push_back(0);
  visited[0] = 1;
  std::uint64_t processed = 0;
  for (std::uint64_t head = 0; head < queue.size(); ++head, ++processed) {
    const std::uint64_t r = queue[head];
    d.decode(r);
    const auto& v = d.digits;
    auto emit = [&](std::uint64_t to) {
      g.edges.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(to)});
      if (!visited[to]) {
        visited[to] = 1;
        queue.push_back(static_cast<std::uint32_t>(to));
      }
    };
    for (int s = 1; s <= n; ++s) {
      const int vs = v[static_cast<std::size_t>(s - 1)];
      if (vs > m - 1) continue;
      bool cover = true;
      for (int j = s + 1; j <= n; ++j) {
        const int vj = v[static_cast<std::size_t>(j - 1)];
        if (vj == vs || vj == vs + 1) {
          cover = false;
          break;
        }
      }
      if (cover) emit(r + d.place[static_cast<std::size_t>(s - 1)]);
    }
    for (int s = 1; s <= n - 1; ++s) {
      const int vs = v[static_cast<std::size_t>(s - 1)];
      int bound = m + 1;
      for (int t = s + 1; t <= n; ++t) {
        const int vt = v[static_cast<std::size_t>(t - 1)];
        if (vt == vs) break;
        if (vs < vt && vt < bound) {
          emit(r + static_cast<std::uint64_t>(vt - vs) *
                       (d.place[static_cast<std::size_t>(s - 1)] - d.place[static_cast<std::size_t>(t - 1)]));
          bound = vt;
        }
      }
    }
  }
  if (processed != card) throw std::logic_error("cover walk missed part of the lattice");
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

inline PosetGraph construct_reduction(const SequenceSpace& sp, Relation rel) {
  return rel == Relation::UM ? construct_reduction_um(sp) : construct_reduction_us(sp);
}

inline PosetGraph build_graph(const SequenceSpace& sp, Relation rel, GraphVariant variant,
                              std::uint64_t edge_cap = 100'000'000) {
  switch (variant) {
    case GraphVariant::Enumeration: return enumeration_graph(sp, rel, edge_cap);
    case GraphVariant::Operation: return operation_graph(sp, rel);
    default: return construct_reduction(sp, rel);
  }
}

// Cover successors of a single sequence, in lexicographic order.
inline std::vector<PVSequence> um_successors(const SequenceSpace& sp, const PVSequence& u) {
  sp.require(u);
  std::vector<PVSequence> out;
  const int n = sp.periods();
  if (up_admissible(sp, u, n)) out.push_back(up(sp, u, n));
  for (int s = 1; s <= n - 1; ++s)
    if (move_admissible(sp, u, s, s + 1)) out.push_back(move(sp, u, s, s + 1));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<PVSequence> us_successors(const SequenceSpace& sp, const PVSequence& u) {
  sp.require(u);
  std::vector<PVSequence> out;
  const int n = sp.periods();
  const int m = sp.max_pv();
  for (int s = 1; s <= n; ++s) {
    const int us = u[static_cast<std::size_t>(s - 1)];
    if (us > m - 1) continue;
    bool cover = true;
    for (int j = s + 1; j <= n && cover; ++j) {
      const int uj = u[static_cast<std::size_t>(j - 1)];
      if (uj == us || uj == us + 1) cover = false;
    }
    if (cover) out.push_back(up(sp, u, s));
  }
  for (int s = 1; s <= n - 1; ++s) {
    const int us = u[static_cast<std::size_t>(s - 1)];
    int bound = m + 1;
    for (int t = s + 1; t <= n; ++t) {
      const int ut = u[static_cast<std::size_t>(t - 1)];
      if (ut == us) break;
      if (us < ut && ut < bound) {
        out.push_back(swap(sp, u, s, t));
        bound = ut;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<PVSequence> cover_successors(const SequenceSpace& sp, Relation rel, const PVSequence& u) {
  return rel == Relation::UM ? um_successors(sp, u) : us_successors(sp, u);
}

inline void write_graph_csv(std::ostream& os, const PosetGraph& g) {
  os << "# n=" << g.space.periods() << " m=" << g.space.max_pv() << " relation=" << to_string(g.relation)
     << " variant=" << to_string(g.variant) << "\n";
  os << "u_rank,v_rank\n";
  for (const Edge& e : g.edges) os << e.from << ',' << e.to << '\n';
}

inline nlohmann::json graph_summary(const PosetGraph& g) {
  return nlohmann::json{{"nodes", g.node_count()},
                        {"edges", g.edge_count()},
                        {"relation", to_string(g.relation)},
                        {"variant", to_string(g.variant)}};
}

}  // namespace pvseq
