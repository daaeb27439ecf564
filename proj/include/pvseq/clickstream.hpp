#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "estimator.hpp"
#include "poset_graph.hpp"

namespace pvseq {

using Day = std::chrono::sys_days;

struct ClickRecord {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;  // UTC unix seconds
  std::string event_type;      // optional fourth input column
};

struct ParseError {
  std::size_t line;
  std::string message;
};

struct ParseResult {
  std::vector<ClickRecord> records;
  std::vector<ParseError> errors;
};

// [train_start, train_end] inclusive; choices are observed on the next day.
struct HistoryWindow {
  Day train_start;
  Day train_end;
  Day base_date() const { return train_end + std::chrono::days{1}; }
};

struct PairHistory {
  std::string user_id;
  std::string item_id;
  PVSequence sequence;
  bool chosen = false;
};

namespace detail {

inline bool parse_uint(std::string_view s, std::size_t at, int digits, int& out) {
  if (at + static_cast<std::size_t>(digits) > s.size()) return false;
  int v = 0;
  for (int i = 0; i < digits; ++i) {
    const char c = s[at + static_cast<std::size_t>(i)];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Uniform in [0, n) by rejection; stable across platforms for a fixed engine.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

inline double unit_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

inline std::optional<Day> parse_date(std::string_view s) {
  int y = 0, mo = 0, d = 0;
  if (s.size() < 10 || !detail::parse_uint(s, 0, 4, y) || s[4] != '-' || !detail::parse_uint(s, 5, 2, mo) ||
      s[7] != '-' || !detail::parse_uint(s, 8, 2, d))
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Day{ymd};
}

// ISO-8601 at second resolution: "YYYY-MM-DD[ T]hh:mm:ss[Z]", time optional.
inline std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  const auto day = parse_date(s.substr(0, std::min<std::size_t>(10, s.size())));
  if (!day) return std::nullopt;
  std::int64_t secs = static_cast<std::int64_t>(day->time_since_epoch().count()) * 86400;
  if (s.size() == 10) return secs;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  int h = 0, mi = 0, se = 0;
  if (s.size() < 19 || !detail::parse_uint(s, 11, 2, h) || s[13] != ':' || !detail::parse_uint(s, 14, 2, mi) ||
      s[16] != ':' || !detail::parse_uint(s, 17, 2, se))
    return std::nullopt;
  if (h > 23 || mi > 59 || se > 60) return std::nullopt;
  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest != "Z") return std::nullopt;
  return secs + h * 3600 + mi * 60 + se;
}

inline std::string format_date(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline Day day_of(std::int64_t timestamp) {
  return Day{std::chrono::days{detail::floor_div(timestamp, 86400)}};
}

// Reads "user_id,item_id,timestamp[,event_type]" rows. Malformed rows are
// collected with their line numbers; the whole parse fails only when their
// share exceeds max_error_ratio.
inline ParseResult parse_records(std::istream& in, double max_error_ratio = 0.25) {
  ParseResult out;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      if (line.rfind("user_id,", 0) == 0) continue;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != 3 && fields.size() != 4) {
      out.errors.push_back({line_no, "expected 3 or 4 fields, got " + std::to_string(fields.size())});
      continue;
    }
    if (fields[0].empty() || fields[1].empty()) {
      out.errors.push_back({line_no, "empty user or item id"});
      continue;
    }
    const auto ts = parse_timestamp(fields[2]);
    if (!ts) {
      out.errors.push_back({line_no, "bad timestamp '" + std::string(fields[2]) + "'"});
      continue;
    }
    out.records.push_back({std::string(fields[0]), std::string(fields[1]), *ts,
                           fields.size() == 4 ? std::string(fields[3]) : std::string()});
  }
  const std::size_t total = out.records.size() + out.errors.size();
  if (total > 0 && static_cast<double>(out.errors.size()) > max_error_ratio * static_cast<double>(total))
    throw std::runtime_error("parse_records: " + std::to_string(out.errors.size()) + " of " +
                             std::to_string(total) + " rows malformed (first at line " +
                             std::to_string(out.errors.front().line) + ": " + out.errors.front().message + ")");
  return out;
}

enum class ChoiceRule { AnyEvent, PurchaseOnly };

// Daily pageview counts per pair, reverse chronological: v_1 counts the day
// before the base date. Anything older than n days is accumulated into v_n,
// then every component is capped at m. Pairs without a single training-window
// pageview are not materialized. Result is sorted by (user_id, item_id).
inline std::vector<PairHistory> build_histories(std::span<const ClickRecord> records, const HistoryWindow& window,
                                                const SequenceSpace& space, ChoiceRule rule = ChoiceRule::AnyEvent) {
  if (window.train_end < window.train_start)
    throw std::invalid_argument("build_histories: train_end before train_start");
  const int n = space.periods();
  const int m = space.max_pv();
  const Day base = window.base_date();
  struct Acc {
    std::vector<std::int64_t> counts;
    bool chosen = false;
  };
  std::map<std::pair<std::string_view, std::string_view>, Acc> acc;
  for (const ClickRecord& rec : records) {
    const Day d = day_of(rec.timestamp);
    if (d < window.train_start || d > base) continue;
    auto& a = acc[{rec.user_id, rec.item_id}];
    if (a.counts.empty()) a.counts.assign(static_cast<std::size_t>(n), 0);
    if (d == base) {
      if (rule == ChoiceRule::AnyEvent || rec.event_type == "purchase") a.chosen = true;
      continue;
    }
    const auto back = (base - d).count();  // >= 1 within the window
    a.counts[static_cast<std::size_t>(std::min<std::int64_t>(back, n) - 1)] += 1;
  }
  std::vector<PairHistory> out;
  out.reserve(acc.size());
  for (auto& [key, a] : acc) {
    PVSequence v(static_cast<std::size_t>(n));
    bool any = false;
    for (int j = 0; j < n; ++j) {
      v[static_cast<std::size_t>(j)] = static_cast<int>(std::min<std::int64_t>(a.counts[static_cast<std::size_t>(j)], m));
      any = any || v[static_cast<std::size_t>(j)] > 0;
    }
    if (!any) continue;
    out.push_back({std::string(key.first), std::string(key.second), std::move(v), a.chosen});
  }
  return out;  // std::map iteration already sorted by (user_id, item_id)
}

struct SplitScheme {
  Day first_start;
  int span_days = 90;
  int stride_days = 10;
  int count = 5;
};

struct TrainValidationSplit {
  HistoryWindow train;
  Day validation;  // equals train.base_date()
};

inline std::vector<TrainValidationSplit> rolling_splits(const SplitScheme& scheme) {
  if (scheme.span_days < 1 || scheme.stride_days < 1 || scheme.count < 1)
    throw std::invalid_argument("rolling_splits: span, stride, and count must be >= 1");
  std::vector<TrainValidationSplit> out;
  out.reserve(static_cast<std::size_t>(scheme.count));
  for (int k = 0; k < scheme.count; ++k) {
    const Day start = scheme.first_start + std::chrono::days{k * scheme.stride_days};
    const Day end = start + std::chrono::days{scheme.span_days - 1};
    out.push_back({{start, end}, end + std::chrono::days{1}});
  }
  return out;
}

// Uniform sample without replacement keeping the original order; rate 1.0 is
// the identity.
inline std::vector<PairHistory> sample_pairs(std::span<const PairHistory> histories, double rate,
                                             std::uint64_t seed) {
  if (!(rate > 0.0) || rate > 1.0) throw std::domain_error("sample_pairs: rate must be in (0,1]");
  if (rate == 1.0) return {histories.begin(), histories.end()};
  const std::size_t total = histories.size();
  const auto keep = static_cast<std::size_t>(rate * static_cast<double>(total));
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < keep; ++i)
    std::swap(idx[i], idx[i + detail::bounded(rng, total - i)]);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<PairHistory> out;
  out.reserve(keep);
  for (std::size_t i : idx) out.push_back(histories[i]);
  return out;
}

// --- Synthetic data with known ground truth.

// truth(v) = lo + (hi - lo) * (sum of v) / (n * m); monotone for both orders.
inline std::vector<double> make_linear_truth(const SequenceSpace& space, double lo, double hi) {
  std::vector<double> t(space.cardinality());
  const double denom = static_cast<double>(space.periods()) * static_cast<double>(space.max_pv());
  for (std::uint64_t r = 0; r < space.cardinality(); ++r) {
    const PVSequence v = space.unrank(r);
    int sum = 0;
    for (int x : v) sum += x;
    t[r] = lo + (hi - lo) * static_cast<double>(sum) / denom;
  }
  return t;
}

// Recency-weighted variant: period j contributes with weight n + 1 - j, so
// both more pageviews and more recent pageviews raise the probability.
inline std::vector<double> make_recency_truth(const SequenceSpace& space, double lo, double hi) {
  std::vector<double> t(space.cardinality());
  const int n = space.periods();
  const double denom = static_cast<double>(space.max_pv()) * (static_cast<double>(n) * (n + 1) / 2.0);
  for (std::uint64_t r = 0; r < space.cardinality(); ++r) {
    const PVSequence v = space.unrank(r);
    double dot = 0;
    for (int j = 1; j <= n; ++j) dot += static_cast<double>(n + 1 - j) * v[static_cast<std::size_t>(j - 1)];
    t[r] = lo + (hi - lo) * dot / denom;
  }
  return t;
}

struct SynthOptions {
  int items_per_user = 20;
  // Per-rank draw weights; empty means uniform over nonzero sequences. The
  // all-zero sequence is never drawn (histories require a pageview).
  std::vector<double> draw_weights;
};

struct SynthResult {
  std::vector<PairHistory> histories;
  std::vector<double> truth;
};

// Draws pair sequences from the configured distribution and choice labels
// from Bernoulli(truth). The truth table must be monotone for the relation,
// which is checked against its cover graph.
inline SynthResult synthesize(const SequenceSpace& space, Relation rel, std::span<const double> truth,
                              std::size_t n_pairs, std::uint64_t seed, const SynthOptions& opts = {}) {
  if (truth.size() != space.cardinality())
    throw std::domain_error("synthesize: one truth value per sequence required");
  for (double p : truth)
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw std::domain_error("synthesize: truth values must be in [0,1]");
  const PosetGraph covers = construct_reduction(space, rel);
  for (const Edge& e : covers.edges)
    if (truth[e.from] > truth[e.to] + 1e-12)
      throw std::domain_error("synthesize: truth table is not monotone for the relation");
  if (opts.items_per_user < 1) throw std::invalid_argument("synthesize: items_per_user must be >= 1");

  std::vector<double> cum(space.cardinality(), 0.0);
  {
    double total = 0;
    for (std::uint64_t r = 1; r < space.cardinality(); ++r) {
      double wr = 1.0;
      if (!opts.draw_weights.empty()) {
        if (opts.draw_weights.size() != space.cardinality())
          throw std::domain_error("synthesize: one draw weight per sequence required");
        wr = opts.draw_weights[r];
        if (!(wr >= 0) || !std::isfinite(wr)) throw std::domain_error("synthesize: draw weights must be finite and >= 0");
      }
      total += wr;
      cum[r] = total;
    }
    if (total <= 0) throw std::domain_error("synthesize: draw weights sum to zero");
    for (double& c : cum) c /= total;
  }

  std::mt19937_64 rng(seed);
  SynthResult out;
  out.truth.assign(truth.begin(), truth.end());
  out.histories.reserve(n_pairs);
  const int digits_user = 8;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const double u = detail::unit_real(rng);
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const auto rank = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(
        std::distance(cum.begin(), it), static_cast<std::ptrdiff_t>(space.cardinality()) - 1));
    const bool chosen = detail::unit_real(rng) < truth[rank];
    char user[32], item[32];
    std::snprintf(user, sizeof user, "u%0*zu", digits_user, i / static_cast<std::size_t>(opts.items_per_user));
    std::snprintf(item, sizeof item, "i%04zu", i % static_cast<std::size_t>(opts.items_per_user));
    out.histories.push_back({user, item, space.unrank(rank), chosen});
  }
  return out;
}

inline void write_histories_csv(std::ostream& os, std::span<const PairHistory> histories,
                                const SequenceSpace& space) {
  os << "user_id,item_id";
  for (int j = 1; j <= space.periods(); ++j) os << ",v" << j;
  os << ",chosen\n";
  for (const PairHistory& h : histories) {
    os << h.user_id << ',' << h.item_id;
    for (int x : h.sequence) os << ',' << x;
    os << ',' << (h.chosen ? 1 : 0) << '\n';
  }
}

inline std::vector<PairHistory> read_histories_csv(std::istream& in, const SequenceSpace& space) {
  std::vector<PairHistory> out;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t want = static_cast<std::size_t>(space.periods()) + 3;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      if (line.rfind("user_id,", 0) == 0) continue;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != want)
      throw std::runtime_error("histories line " + std::to_string(line_no) + ": expected " + std::to_string(want) +
                               " fields, got " + std::to_string(fields.size()));
    PairHistory h;
    h.user_id = std::string(fields[0]);
    h.item_id = std::string(fields[1]);
    h.sequence.resize(static_cast<std::size_t>(space.periods()));
    for (int j = 0; j < space.periods(); ++j) {
      const auto f = fields[static_cast<std::size_t>(j) + 2];
      int v = 0;
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size())
        throw std::runtime_error("histories line " + std::to_string(line_no) + ": bad count '" + std::string(f) + "'");
      h.sequence[static_cast<std::size_t>(j)] = v;
    }
    const auto c = fields.back();
    if (c == "1") h.chosen = true;
    else if (c == "0") h.chosen = false;
    else throw std::runtime_error("histories line " + std::to_string(line_no) + ": chosen must be 0 or 1");
    space.require(h.sequence);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace pvseq
