#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"

namespace pvseq {

// A pageview history over n periods: v[0] is the most recent period, v[n-1]
// the oldest, each entry clipped to 0..m.
using PVSequence = std::vector<int>;

using SequenceIndex = std::uint64_t;

enum class Relation { UM, US };

inline const char* to_string(Relation r) { return r == Relation::UM ? "um" : "us"; }

// Recency r in 1..n (larger = more recent) and frequency f in 0..m.
struct RFKey {
  int r;
  int f;
  friend bool operator==(const RFKey&, const RFKey&) = default;
};

// The set [0,m]^n with a mixed-radix rank in 0..(m+1)^n-1; v[0] is the most
// significant digit, so rank order coincides with lexicographic order.
class SequenceSpace {
 public:
  SequenceSpace(int periods, int max_pv) : n_(periods), m_(max_pv) {
    if (periods < 1) throw std::invalid_argument("SequenceSpace: periods must be >= 1");
    if (max_pv < 1) throw std::invalid_argument("SequenceSpace: max_pv must be >= 1");
    const auto base = static_cast<std::uint64_t>(max_pv) + 1;
    card_ = 1;
    for (int i = 0; i < periods; ++i) {
      if (card_ > std::numeric_limits<std::uint64_t>::max() / base)
        throw CapacityError("SequenceSpace: (max_pv+1)^periods overflows 64 bits");
      card_ *= base;
    }
  }

  int periods() const { return n_; }
  int max_pv() const { return m_; }
  std::uint64_t cardinality() const { return card_; }

  bool contains(const PVSequence& v) const {
    if (static_cast<int>(v.size()) != n_) return false;
    for (int x : v)
      if (x < 0 || x > m_) return false;
    return true;
  }

  void require(const PVSequence& v) const {
    if (!contains(v)) throw std::domain_error("sequence outside [0,max_pv]^periods");
  }

  SequenceIndex rank(const PVSequence& v) const {
    require(v);
    SequenceIndex r = 0;
    const auto base = static_cast<SequenceIndex>(m_) + 1;
    for (int x : v) r = r * base + static_cast<SequenceIndex>(x);
    return r;
  }

  PVSequence unrank(SequenceIndex r) const {
    if (r >= card_) throw std::domain_error("unrank: index past cardinality");
    PVSequence v(static_cast<std::size_t>(n_));
    const auto base = static_cast<SequenceIndex>(m_) + 1;
    for (int i = n_ - 1; i >= 0; --i) {
      v[static_cast<std::size_t>(i)] = static_cast<int>(r % base);
      r /= base;
    }
    return v;
  }

  friend bool operator==(const SequenceSpace& a, const SequenceSpace& b) {
    return a.n_ == b.n_ && a.m_ == b.m_;
  }

 private:
  int n_;
  int m_;
  std::uint64_t card_;
};

inline std::strong_ordering lex_compare(const PVSequence& u, const PVSequence& v) {
  if (u.size() != v.size()) throw std::domain_error("lex_compare: sequences from different spaces");
  return u <=> v;
}

// --- Elementary operations (1-based period indices). Each strictly increases
// --- lexicographic order on its admissible domain.

inline bool up_admissible(const SequenceSpace& sp, const PVSequence& u, int s) {
  return s >= 1 && s <= sp.periods() && u[static_cast<std::size_t>(s - 1)] <= sp.max_pv() - 1;
}

// Add one pageview in period s.
inline PVSequence up(const SequenceSpace& sp, const PVSequence& u, int s) {
  sp.require(u);
  if (!up_admissible(sp, u, s)) throw OperationDomainError("up: period at max_pv or index out of range");
  PVSequence v = u;
  ++v[static_cast<std::size_t>(s - 1)];
  return v;
}

inline bool move_admissible(const SequenceSpace& sp, const PVSequence& u, int s, int t) {
  if (s < 1 || t <= s || t > sp.periods()) return false;
  return u[static_cast<std::size_t>(s - 1)] <= sp.max_pv() - 1 && u[static_cast<std::size_t>(t - 1)] >= 1;
}

// Shift one pageview from period t to the more recent period s.
inline PVSequence move(const SequenceSpace& sp, const PVSequence& u, int s, int t) {
  sp.require(u);
  if (!move_admissible(sp, u, s, t))
    throw OperationDomainError("move: requires s < t, room in period s, and a pageview in period t");
  PVSequence v = u;
  ++v[static_cast<std::size_t>(s - 1)];
  --v[static_cast<std::size_t>(t - 1)];
  return v;
}

inline bool swap_admissible(const SequenceSpace& sp, const PVSequence& u, int s, int t) {
  if (s < 1 || t <= s || t > sp.periods()) return false;
  return u[static_cast<std::size_t>(s - 1)] < u[static_cast<std::size_t>(t - 1)];
}

// Exchange the counts of periods s and t, moving the larger one to the more
// recent slot.
inline PVSequence swap(const SequenceSpace& sp, const PVSequence& u, int s, int t) {
  sp.require(u);
  if (!swap_admissible(sp, u, s, t))
    throw OperationDomainError("swap: requires s < t and u[s] < u[t]");
  PVSequence v = u;
  std::swap(v[static_cast<std::size_t>(s - 1)], v[static_cast<std::size_t>(t - 1)]);
  return v;
}

namespace detail {

template <typename SuccessorFn>
bool reachable(const SequenceSpace& sp, const PVSequence& u, const PVSequence& v, SuccessorFn&& successors) {
  sp.require(u);
  sp.require(v);
  if (u == v) return true;
  if (lex_compare(u, v) != std::strong_ordering::less) return false;
  std::vector<char> seen(sp.cardinality(), 0);
  std::vector<PVSequence> queue{u};
  seen[sp.rank(u)] = 1;
  const SequenceIndex target = sp.rank(v);
  while (!queue.empty()) {
    PVSequence w = std::move(queue.back());
    queue.pop_back();
    for (PVSequence& x : successors(w)) {
      const SequenceIndex rx = sp.rank(x);
      if (rx == target) return true;
      // Operations only increase lex order, so anything past v is a dead end.
      if (rx > target || seen[rx]) continue;
      seen[rx] = 1;
      queue.push_back(std::move(x));
    }
  }
  return false;
}

inline std::vector<PVSequence> op_successors(const SequenceSpace& sp, const PVSequence& u, Relation rel) {
  std::vector<PVSequence> out;
  const int n = sp.periods();
  for (int s = 1; s <= n; ++s)
    if (up_admissible(sp, u, s)) out.push_back(up(sp, u, s));
  for (int s = 1; s <= n; ++s)
    for (int t = s + 1; t <= n; ++t) {
      if (rel == Relation::UM) {
        if (move_admissible(sp, u, s, t)) out.push_back(move(sp, u, s, t));
      } else {
        if (swap_admissible(sp, u, s, t)) out.push_back(swap(sp, u, s, t));
      }
    }
  return out;
}

}  // namespace detail

// Reference reachability oracles: breadth-first search over raw operation
// moves. Exponential-space friendly only; graph construction has the fast
// equivalents.
inline bool leq_um(const SequenceSpace& sp, const PVSequence& u, const PVSequence& v) {
  return detail::reachable(sp, u, v, [&](const PVSequence& w) { return detail::op_successors(sp, w, Relation::UM); });
}

inline bool leq_us(const SequenceSpace& sp, const PVSequence& u, const PVSequence& v) {
  return detail::reachable(sp, u, v, [&](const PVSequence& w) { return detail::op_successors(sp, w, Relation::US); });
}

inline bool leq(const SequenceSpace& sp, Relation rel, const PVSequence& u, const PVSequence& v) {
  return rel == Relation::UM ? leq_um(sp, u, v) : leq_us(sp, u, v);
}

// Collapse a sequence to (recency, frequency). Recency needs at least one
// pageview; frequency saturates at max_pv so both axes share the scale 0..m.
inline RFKey recency_frequency(const SequenceSpace& sp, const PVSequence& v) {
  sp.require(v);
  const int n = sp.periods();
  int first = 0;
  for (int j = 1; j <= n; ++j)
    if (v[static_cast<std::size_t>(j - 1)] > 0) {
      first = j;
      break;
    }
  if (first == 0) throw UndefinedRecencyError("recency undefined for the all-zero sequence");
  const int total = std::accumulate(v.begin(), v.end(), 0);
  return RFKey{n + 1 - first, std::min(total, sp.max_pv())};
}

inline std::string sequence_to_string(const PVSequence& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace pvseq
