#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickstream.hpp"
#include "estimator.hpp"

namespace pvseq {

struct Candidate {
  std::string item_id;
  double probability = 0;
  std::int64_t last_view = 0;  // larger = more recent
};

// Top N by probability; ties prefer the more recently viewed item, then the
// smaller item_id so selection is fully deterministic.
inline std::vector<std::string> top_n_select(std::vector<Candidate> candidates, int N) {
  if (N < 1) throw std::invalid_argument("top_n_select: N must be >= 1");
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.last_view != b.last_view) return a.last_view > b.last_view;
    return a.item_id < b.item_id;
  });
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(N), candidates.size());
  std::vector<std::string> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(std::move(candidates[i].item_id));
  return out;
}

struct F1Stats {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
  bool defined = false;  // false when either set is empty
};

inline F1Stats f1_score(std::span<const std::string> selected, std::span<const std::string> viewed) {
  if (selected.empty() || viewed.empty()) return {};
  const std::unordered_set<std::string_view> view_set(viewed.begin(), viewed.end());
  std::size_t hits = 0;
  for (const std::string& s : selected) hits += view_set.count(s);
  F1Stats st;
  st.defined = true;
  st.recall = static_cast<double>(hits) / static_cast<double>(view_set.size());
  st.precision = static_cast<double>(hits) / static_cast<double>(selected.size());
  st.f1 = (st.recall + st.precision > 0) ? 2 * st.recall * st.precision / (st.recall + st.precision) : 0.0;
  return st;
}

struct EvalOptions {
  int top_n = 3;
  // Users whose validation-day view set is empty have no defined F1 and are
  // excluded from the averages; set this to count them as zero instead.
  bool impute_empty_as_zero = false;
};

struct EvalSummary {
  int top_n = 0;
  std::uint64_t users_evaluated = 0;
  double mean_f1 = 0;
  double mean_recall = 0;
  double mean_precision = 0;
};

// Position of the most recent pageview, as an ordinal where larger means
// more recent (v_1 is one day before the base date).
inline std::int64_t last_view_key(const PVSequence& v) {
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j] > 0) return -static_cast<std::int64_t>(j + 1);
  throw UndefinedRecencyError("last view undefined for the all-zero sequence");
}

// Scores a probability model over per-pair histories: candidates are the
// user's training-window items, the viewed set is the items with a
// base-date choice. `prob` maps a PVSequence to the model probability.
// Histories must be grouped by user (build_histories output is).
template <typename ProbFn>
EvalSummary evaluate_model(std::span<const PairHistory> histories, ProbFn&& prob, const EvalOptions& opts = {}) {
  if (opts.top_n < 1) throw std::invalid_argument("evaluate_model: top_n must be >= 1");
  EvalSummary sum;
  sum.top_n = opts.top_n;
  double tf1 = 0, trec = 0, tprec = 0;

  std::vector<Candidate> candidates;
  std::vector<std::string> viewed;
  auto flush = [&]() {
    if (candidates.empty()) return;
    if (viewed.empty() && !opts.impute_empty_as_zero) {
      candidates.clear();
      return;
    }
    if (viewed.empty()) {
      ++sum.users_evaluated;
      candidates.clear();
      return;
    }
    const auto selected = top_n_select(std::move(candidates), opts.top_n);
    const F1Stats st = f1_score(selected, viewed);
    tf1 += st.f1;
    trec += st.recall;
    tprec += st.precision;
    ++sum.users_evaluated;
    candidates.clear();
    viewed.clear();
  };

  const std::string* current = nullptr;
  for (const PairHistory& h : histories) {
    if (current && h.user_id != *current) flush();
    current = &h.user_id;
    candidates.push_back({h.item_id, prob(h.sequence), last_view_key(h.sequence)});
    if (h.chosen) viewed.push_back(h.item_id);
  }
  flush();

  if (sum.users_evaluated > 0) {
    sum.mean_f1 = tf1 / static_cast<double>(sum.users_evaluated);
    sum.mean_recall = trec / static_cast<double>(sum.users_evaluated);
    sum.mean_precision = tprec / static_cast<double>(sum.users_evaluated);
  }
  return sum;
}

// Model adapters for the two fitted representations.
inline auto sequence_model(const SequenceSpace& space, std::span<const double> values) {
  return [&space, values](const PVSequence& v) { return values[space.rank(v)]; };
}

inline auto rf_model(const SequenceSpace& space, const RFTable& table, std::span<const double> values) {
  return [&space, &table, values](const PVSequence& v) {
    const RFKey key = recency_frequency(space, v);
    return values[table.index(key.r, key.f)];
  };
}

inline nlohmann::json metrics_json(const EvalSummary& s) {
  return nlohmann::json{{"N", s.top_n},
                        {"users_evaluated", s.users_evaluated},
                        {"mean_f1", s.mean_f1},
                        {"mean_recall", s.mean_recall},
                        {"mean_precision", s.mean_precision}};
}

}  // namespace pvseq
