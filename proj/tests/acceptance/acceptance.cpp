// Acceptance harness: one pass/fail line per criterion, nonzero exit on any
// failure. `--skip-slow` omits the large enumeration counts; `--only-slow`
// runs just those.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <pvseq/pvseq.hpp>

#include "../support/oracles.hpp"

using namespace pvseq;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleNormTol = 1e-6;   // fit vs Dykstra, weighted norm
constexpr double kViolationTol = 1e-8;    // max edge violation of fitted values
constexpr double kIdempotenceTol = 1e-8;  // refit drift, max abs
constexpr double kPavTol = 1e-8;          // fit vs PAV on chains, max abs
constexpr double kSurfaceTol = 1e-8;      // monotonicity along fitted surface edges
constexpr double kCountBudgetSec = 120.0; // mandatory count reproduction
constexpr double kReductionBudgetSec = 60.0;  // per large reduction
constexpr double kSolverBudgetSec = 300.0;    // oracle sweep

struct Check {
  bool pass = true;
  std::string detail;
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

void note_mismatch(Check& c, const std::string& what) {
  c.pass = false;
  if (!c.detail.empty()) c.detail += "; ";
  c.detail += what;
}

// --- criterion 1: constraint counts across the (n,m) grid.

struct CountRow {
  int n, m;
  std::uint64_t vars, enum_um, enum_us, op_um, op_us, red_um, red_us;
};

constexpr CountRow kCountRows[] = {
    {5, 1, 32, 430, 430, 160, 160, 48, 48},
    {5, 2, 243, 21383, 17945, 1890, 1620, 594, 634},
    {5, 3, 1024, 346374, 255260, 9600, 7680, 3072, 3546},
    {5, 4, 3125, 3045422, 2038236, 32500, 25000, 10500, 12898},
    {5, 5, 7776, 18136645, 11282058, 86400, 64800, 28080, 36174},
    {5, 6, 16807, 82390140, 48407475, 195510, 144060, 63798, 85272},
    {1, 6, 7, 21, 21, 6, 6, 6, 6},
    {2, 6, 49, 1001, 861, 120, 105, 78, 93},
    {3, 6, 343, 42903, 32067, 1638, 1323, 798, 1018},
    {4, 6, 2401, 1860622, 1224030, 18816, 14406, 7350, 9675},
};

constexpr std::uint64_t kEnumMandatoryLimit = 3125;  // larger spaces are slow-marked

Check criterion1(bool include_slow_enumeration, bool include_fast) {
  Check c;
  const Timer timer;
  for (const CountRow& row : kCountRows) {
    const SequenceSpace sp(row.n, row.m);
    if (sp.cardinality() != row.vars)
      note_mismatch(c, fmt("(%d,%d) vars %llu != %llu", row.n, row.m,
                           (unsigned long long)sp.cardinality(), (unsigned long long)row.vars));
    if (include_fast) {
      const std::uint64_t op_um = operation_graph(sp, Relation::UM).edge_count();
      const std::uint64_t op_us = operation_graph(sp, Relation::US).edge_count();
      const std::uint64_t red_um = construct_reduction(sp, Relation::UM).edge_count();
      const std::uint64_t red_us = construct_reduction(sp, Relation::US).edge_count();
      if (op_um != row.op_um || op_us != row.op_us)
        note_mismatch(c, fmt("(%d,%d) operation %llu/%llu != %llu/%llu", row.n, row.m,
                             (unsigned long long)op_um, (unsigned long long)op_us,
                             (unsigned long long)row.op_um, (unsigned long long)row.op_us));
      if (red_um != row.red_um || red_us != row.red_us)
        note_mismatch(c, fmt("(%d,%d) reduction %llu/%llu != %llu/%llu", row.n, row.m,
                             (unsigned long long)red_um, (unsigned long long)red_us,
                             (unsigned long long)row.red_um, (unsigned long long)row.red_us));
    }
    const bool mandatory_enum = row.vars <= kEnumMandatoryLimit;
    if ((mandatory_enum && include_fast) || (!mandatory_enum && include_slow_enumeration)) {
      const std::uint64_t e_um = closure_pair_count(sp, Relation::UM, 200'000'000);
      const std::uint64_t e_us = closure_pair_count(sp, Relation::US, 200'000'000);
      if (e_um != row.enum_um || e_us != row.enum_us)
        note_mismatch(c, fmt("(%d,%d) enumeration %llu/%llu != %llu/%llu", row.n, row.m,
                             (unsigned long long)e_um, (unsigned long long)e_us,
                             (unsigned long long)row.enum_um, (unsigned long long)row.enum_us));
    }
  }
  const double sec = timer.seconds();
  if (include_fast && sec > kCountBudgetSec) note_mismatch(c, fmt("took %.1f s > %.0f s", sec, kCountBudgetSec));
  if (c.pass) {
    c.detail = fmt("all counts exact in %.2f s", sec);
    if (include_fast && !include_slow_enumeration) c.detail += " (large enumeration rows deferred to the slow suite)";
  }
  return c;
}

// --- criterion 2: reduction counts for the wide/deep spaces, each under budget.

Check criterion2() {
  Check c;
  struct Row {
    int n, m;
    std::uint64_t red_um, red_us;
  };
  constexpr Row rows[] = {
      {3, 30, 84630, 118850}, {4, 12, 99372, 142800}, {6, 4, 62500, 76506},
      {7, 3, 67584, 76818},   {8, 2, 24786, 25879},   {9, 2, 83106, 86386},
  };
  double slowest = 0;
  for (const Row& row : rows) {
    const SequenceSpace sp(row.n, row.m);
    for (const auto rel : {Relation::UM, Relation::US}) {
      const Timer timer;
      const std::uint64_t edges = construct_reduction(sp, rel).edge_count();
      const double sec = timer.seconds();
      slowest = std::max(slowest, sec);
      const std::uint64_t want = rel == Relation::UM ? row.red_um : row.red_us;
      if (edges != want)
        note_mismatch(c, fmt("(%d,%d) %s reduction %llu != %llu", row.n, row.m, to_string(rel),
                             (unsigned long long)edges, (unsigned long long)want));
      if (sec > kReductionBudgetSec)
        note_mismatch(c, fmt("(%d,%d) %s took %.1f s > %.0f s", row.n, row.m, to_string(rel), sec,
                             kReductionBudgetSec));
    }
  }
  if (c.pass) c.detail = fmt("all counts exact, slowest build %.2f s", slowest);
  return c;
}

// --- criterion 3: small-space edge counts.

Check criterion3() {
  Check c;
  const SequenceSpace sp(3, 2);
  const std::uint64_t op_um = operation_graph(sp, Relation::UM).edge_count();
  const std::uint64_t op_us = operation_graph(sp, Relation::US).edge_count();
  const std::uint64_t red_um = construct_reduction(sp, Relation::UM).edge_count();
  const std::uint64_t red_us = construct_reduction(sp, Relation::US).edge_count();
  if (op_um != 90) note_mismatch(c, fmt("operation um %llu != 90", (unsigned long long)op_um));
  if (op_us != 81) note_mismatch(c, fmt("operation us %llu != 81", (unsigned long long)op_us));
  if (red_um != 42) note_mismatch(c, fmt("reduction um %llu != 42", (unsigned long long)red_um));
  if (red_us != 46) note_mismatch(c, fmt("reduction us %llu != 46", (unsigned long long)red_us));
  if (c.pass) c.detail = "operation 90/81, reduction 42/46";
  return c;
}

// --- criterion 4: constructive reduction equals the general-purpose one, and
// --- cover predicates equal reachability-computed covers.

Check criterion4() {
  Check c;
  const Timer timer;
  int equiv_spaces = 0;
  for (const auto& sp : oracles::spaces_up_to(1024)) {
    ++equiv_spaces;
    for (const auto rel : {Relation::UM, Relation::US}) {
      const PosetGraph direct = construct_reduction(sp, rel);
      const PosetGraph general = reduce_general(enumeration_graph(sp, rel, 600'000));
      if (direct.edges != general.edges) {
        note_mismatch(c, fmt("edge sets differ at (%d,%d) %s", sp.periods(), sp.max_pv(), to_string(rel)));
        break;
      }
    }
  }
  int cover_spaces = 0;
  for (const auto& sp : oracles::spaces_up_to(256)) {
    ++cover_spaces;
    for (const auto rel : {Relation::UM, Relation::US}) {
      const PosetGraph direct = construct_reduction(sp, rel);
      if (direct.edges != oracles::covers_by_reachability(sp, rel)) {
        note_mismatch(c, fmt("covers differ at (%d,%d) %s", sp.periods(), sp.max_pv(), to_string(rel)));
        break;
      }
    }
  }
  if (c.pass)
    c.detail = fmt("%d spaces match the general reduction, %d match reachability covers, %.1f s",
                   equiv_spaces, cover_spaces, timer.seconds());
  return c;
}

// --- criterion 5: worked micro-examples.

std::vector<PVSequence> sorted_seqs(std::vector<PVSequence> v) {
  std::sort(v.begin(), v.end());
  return v;
}

Check criterion5() {
  Check c;
  const SequenceSpace sp(3, 2);
  const PVSequence u{0, 2, 1};

  if (sorted_seqs(detail::op_successors(sp, u, Relation::UM)) !=
      sorted_seqs({{1, 2, 1}, {0, 2, 2}, {1, 1, 1}, {1, 2, 0}}))
    note_mismatch(c, "um operation images of (0,2,1)");
  if (sorted_seqs(cover_successors(sp, Relation::UM, u)) != sorted_seqs({{0, 2, 2}, {1, 1, 1}}))
    note_mismatch(c, "um cover successors of (0,2,1)");
  if (sorted_seqs(detail::op_successors(sp, u, Relation::US)) !=
      sorted_seqs({{1, 2, 1}, {0, 2, 2}, {2, 0, 1}, {1, 2, 0}}))
    note_mismatch(c, "us operation images of (0,2,1)");
  if (sorted_seqs(cover_successors(sp, Relation::US, u)) !=
      sorted_seqs({{0, 2, 2}, {2, 0, 1}, {1, 2, 0}}))
    note_mismatch(c, "us cover successors of (0,2,1)");

  if (up(sp, {0, 1, 1}, 1) != PVSequence{1, 1, 1} || up(sp, {1, 1, 1}, 2) != PVSequence{1, 2, 1})
    note_mismatch(c, "up examples");
  if (move(sp, {1, 1, 1}, 2, 3) != PVSequence{1, 2, 0} ||
      move(sp, {1, 2, 0}, 1, 2) != PVSequence{2, 1, 0})
    note_mismatch(c, "move examples");
  if (!swap_admissible(sp, {1, 0, 2}, 2, 3) || swap(sp, {1, 0, 2}, 2, 3) != PVSequence{1, 2, 0} ||
      swap(sp, {1, 2, 0}, 1, 2) != PVSequence{2, 1, 0})
    note_mismatch(c, "swap examples");

  // Six user-item pairs observed over a three-day window with labels on the
  // following day; sequences, recency-frequency keys, and the empirical grid
  // must all come out exactly.
  const auto day = [](int d) { return Day(std::chrono::year{2015} / 4 / d); };
  const auto at = [&](const char* user, const char* item, int d, int hour = 12) {
    return ClickRecord{user, item,
                       std::chrono::duration_cast<std::chrono::seconds>(day(d).time_since_epoch()).count() +
                           hour * 3600,
                       "view"};
  };
  std::vector<ClickRecord> recs;
  recs.push_back(at("u1", "i2", 1));
  recs.push_back(at("u1", "i2", 3));
  recs.push_back(at("u1", "i4", 2));
  recs.push_back(at("u1", "i4", 4));  // base-date view: the choice
  for (int k = 0; k < 3; ++k) recs.push_back(at("u2", "i1", 1, 8 + k));
  for (int k = 0; k < 3; ++k) recs.push_back(at("u2", "i3", 3, 8 + k));
  recs.push_back(at("u2", "i3", 4));
  recs.push_back(at("u2", "i4", 1));
  recs.push_back(at("u2", "i4", 2));
  recs.push_back(at("u2", "i4", 3));
  recs.push_back(at("u3", "i2", 1, 9));
  recs.push_back(at("u3", "i2", 1, 21));
  recs.push_back(at("u3", "i2", 3));

  const SequenceSpace sp3(3, 3);
  const auto hist = build_histories(recs, HistoryWindow{day(1), day(3)}, sp3);
  const std::vector<PVSequence> want_seq{{1, 0, 1}, {0, 1, 0}, {0, 0, 3},
                                         {3, 0, 0}, {1, 1, 1}, {1, 0, 2}};
  const std::vector<RFKey> want_rf{{3, 2}, {2, 1}, {1, 3}, {3, 3}, {3, 3}, {3, 3}};
  const std::vector<bool> want_chosen{false, true, false, true, false, false};
  if (hist.size() != 6) {
    note_mismatch(c, fmt("expected 6 pair histories, got %zu", hist.size()));
  } else {
    for (std::size_t i = 0; i < 6; ++i) {
      if (hist[i].sequence != want_seq[i]) note_mismatch(c, fmt("sequence %zu", i));
      if (hist[i].chosen != want_chosen[i]) note_mismatch(c, fmt("choice label %zu", i));
      const RFKey key = recency_frequency(sp3, hist[i].sequence);
      if (key.r != want_rf[i].r || key.f != want_rf[i].f)
        note_mismatch(c, fmt("recency-frequency key %zu", i));
    }
    const RFTable grid = empirical_rf_table(hist, sp3);
    const std::vector<double> want_w{0, 0, 1, 1, 0, 0, 0, 1, 3};
    const std::vector<double> want_t{0, 0, 0, 1, 0, 0, 0, 0, 1.0 / 3.0};
    if (grid.weights != want_w) note_mismatch(c, "empirical grid weights");
    for (std::size_t i = 0; i < want_t.size(); ++i)
      if (std::abs(grid.targets[i] - want_t[i]) > 1e-15) note_mismatch(c, "empirical grid ratios");
  }
  if (c.pass) c.detail = "successor sets, operations, and empirical tables all exact";
  return c;
}

// --- criterion 6: solver agreement with projection oracles.

Check criterion6() {
  Check c;
  const Timer timer;
  const FitConfig tight{1e-10, 1e-9, 200000, 0.0};
  std::mt19937_64 rng(20260816);
  std::uniform_real_distribution<double> wdist(1.0, 30.0);
  std::uniform_real_distribution<double> tdist(0.0, 1.0);
  const auto random_instance = [&](std::size_t nn, std::vector<double>& w, std::vector<double>& t) {
    w.resize(nn);
    t.resize(nn);
    for (auto& x : w) x = wdist(rng);
    for (auto& x : t) x = tdist(rng);
  };

  constexpr int kTrials = 100;
  double worst_norm = 0, worst_viol = 0, worst_idem = 0;
  int fits = 0;
  for (const auto& sp : oracles::spaces_up_to(243)) {
    if (sp.max_pv() > 6) continue;  // matches the experimental grid; see chains below
    for (const auto rel : {Relation::UM, Relation::US}) {
      if (sp.periods() == 1 && rel == Relation::US) continue;  // chains coincide
      const PosetGraph g = construct_reduction(sp, rel);
      const std::size_t nn = sp.cardinality();
      std::vector<double> w, t;
      for (int trial = 0; trial < kTrials; ++trial) {
        random_instance(nn, w, t);
        const FitResult fit = solve_monotone(nn, g.edges, w, t, tight);
        ++fits;
        const auto oracle = dykstra_project(nn, g.edges, w, t, 1e-11, 2000000);
        worst_norm = std::max(worst_norm, oracles::weighted_norm_diff(w, fit.x, oracle));
        worst_viol = std::max(worst_viol, detail::max_edge_violation(g.edges, fit.x));
        const FitResult again = solve_monotone(nn, g.edges, w, fit.x, tight);
        for (std::size_t i = 0; i < nn; ++i)
          worst_idem = std::max(worst_idem, std::abs(again.x[i] - fit.x[i]));
      }
    }
  }

  // Chain instances against pool-adjacent-violators, including chains long
  // enough that alternating projections would be the sloppier oracle.
  double worst_pav = 0;
  for (const int m : {1, 2, 3, 4, 5, 6, 10, 25, 50, 99, 242}) {
    const SequenceSpace sp(1, m);
    const PosetGraph g = construct_reduction(sp, Relation::UM);
    std::vector<double> w, t;
    for (int trial = 0; trial < kTrials; ++trial) {
      random_instance(sp.cardinality(), w, t);
      const FitResult fit = solve_monotone(sp.cardinality(), g.edges, w, t, tight);
      ++fits;
      const auto pav = oracles::pav_chain(w, t);
      for (std::size_t i = 0; i < pav.size(); ++i)
        worst_pav = std::max(worst_pav, std::abs(fit.x[i] - pav[i]));
      worst_viol = std::max(worst_viol, detail::max_edge_violation(g.edges, fit.x));
    }
  }

  const double sec = timer.seconds();
  if (worst_norm > kOracleNormTol)
    note_mismatch(c, fmt("fit vs projection oracle %.3g > %.1g", worst_norm, kOracleNormTol));
  if (worst_viol > kViolationTol)
    note_mismatch(c, fmt("constraint violation %.3g > %.1g", worst_viol, kViolationTol));
  if (worst_idem > kIdempotenceTol)
    note_mismatch(c, fmt("idempotence drift %.3g > %.1g", worst_idem, kIdempotenceTol));
  if (worst_pav > kPavTol) note_mismatch(c, fmt("chain fit vs PAV %.3g > %.1g", worst_pav, kPavTol));
  if (sec > kSolverBudgetSec) note_mismatch(c, fmt("took %.1f s > %.0f s", sec, kSolverBudgetSec));
  if (c.pass)
    c.detail = fmt("%d fits: oracle norm %.2g, violation %.2g, idempotence %.2g, pav %.2g, %.1f s",
                   fits, worst_norm, worst_viol, worst_idem, worst_pav, sec);
  return c;
}

// --- criterion 7: on sparse synthetic samples, the shape-restricted fit must
// --- beat the raw empirical table both in ranking quality and in accuracy.

Check criterion7() {
  Check c;
  const Timer timer;
  const SequenceSpace sp(5, 2);
  const auto truth = make_recency_truth(sp, 0.02, 0.30);
  const PosetGraph covers = construct_reduction(sp, Relation::UM);

  constexpr int kSeeds = 10;
  constexpr std::size_t kPopulation = 400000;
  constexpr double kSampleRate = 0.001;  // 0.1% of the population
  double f1_fit_sum = 0, f1_emp_sum = 0;
  int rmse_wins = 0;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const auto pop = synthesize(sp, Relation::UM, truth, kPopulation, 1000 + 3 * seed);
    const auto train = sample_pairs(pop.histories, kSampleRate, 2000 + 3 * seed);
    const auto stats = empirical_sequence_stats(train, sp);
    const FitResult fit = fit_monotone(covers, stats);

    const auto valid = synthesize(sp, Relation::UM, truth, kPopulation, 5000 + 3 * seed);
    EvalOptions opts;
    opts.top_n = 3;
    f1_fit_sum += evaluate_model(valid.histories, sequence_model(sp, fit.x), opts).mean_f1;
    f1_emp_sum += evaluate_model(valid.histories, sequence_model(sp, stats.targets), opts).mean_f1;

    double se_fit = 0, se_emp = 0;  // uniform over the drawable (nonzero) sequences
    for (std::uint64_t r = 1; r < sp.cardinality(); ++r) {
      se_fit += (fit.x[r] - truth[r]) * (fit.x[r] - truth[r]);
      se_emp += (stats.targets[r] - truth[r]) * (stats.targets[r] - truth[r]);
    }
    if (se_fit < se_emp) ++rmse_wins;
  }
  const double f1_fit = f1_fit_sum / kSeeds;
  const double f1_emp = f1_emp_sum / kSeeds;
  if (!(f1_fit >= f1_emp))
    note_mismatch(c, fmt("mean F1 fitted %.4f < empirical %.4f", f1_fit, f1_emp));
  if (rmse_wins < 9) note_mismatch(c, fmt("truth RMSE wins %d/10 < 9/10", rmse_wins));
  if (c.pass)
    c.detail = fmt("mean F1 %.4f vs %.4f, truth RMSE wins %d/10, %.1f s", f1_fit, f1_emp,
                   rmse_wins, timer.seconds());
  return c;
}

// --- criterion 8: fitted surface on the full-size lattice stays monotone and
// --- the heatmap slices write cleanly.

Check criterion8() {
  Check c;
  const Timer timer;
  const SequenceSpace sp(5, 6);
  const auto truth = make_recency_truth(sp, 0.01, 0.25);
  const auto population = synthesize(sp, Relation::UM, truth, 200000, 15);
  const auto stats = empirical_sequence_stats(population.histories, sp);

  std::vector<double> um_fit;
  for (const auto rel : {Relation::UM, Relation::US}) {
    const PosetGraph g = construct_reduction(sp, rel);
    const FitResult fit = fit_monotone(g, stats);
    double worst = 0;
    for (const Edge& e : g.edges) worst = std::max(worst, fit.x[e.from] - fit.x[e.to]);
    if (worst > kSurfaceTol)
      note_mismatch(c, fmt("%s surface violation %.3g > %.1g", to_string(rel), worst, kSurfaceTol));
    if (rel == Relation::UM) um_fit = fit.x;
  }

  const fs::path dir = fs::temp_directory_path() / "pvseq_acceptance_slices";
  std::error_code ec;
  fs::create_directories(dir, ec);
  for (const int v3 : {0, 1, 2}) {
    const fs::path path = dir / ("slice_v3_" + std::to_string(v3) + ".csv");
    {
      std::ofstream os(path, std::ios::binary);
      if (!os.good()) {
        note_mismatch(c, "slice file not writable");
        continue;
      }
      write_slice_csv(os, sp, um_fit, v3);
    }
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    if (lines != 1 + 7 * 7) note_mismatch(c, fmt("slice v3=%d has %zu lines", v3, lines));
  }
  if (c.pass) c.detail = fmt("both relations monotone, three slices written, %.1f s", timer.seconds());
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_slow = false, only_slow = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--skip-slow") == 0) skip_slow = true;
    else if (std::strcmp(argv[i], "--only-slow") == 0) only_slow = true;
    else {
      std::fprintf(stderr, "usage: %s [--skip-slow | --only-slow]\n", argv[0]);
      return 2;
    }
  }

  int failures = 0;
  const auto report = [&](int idx, const char* label, const Check& c) {
    std::printf("[%s] criterion %d: %s%s%s\n", c.pass ? "PASS" : "FAIL", idx, label,
                c.detail.empty() ? "" : " -- ", c.detail.c_str());
    if (!c.pass) ++failures;
  };
  const auto guarded = [](auto&& fn) -> Check {
    try {
      return fn();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  if (only_slow) {
    report(1, "large-space enumeration counts", guarded([] { return criterion1(true, false); }));
  } else {
    report(1, "constraint counts across the (n,m) grid",
           guarded([&] { return criterion1(!skip_slow, true); }));
    report(2, "reduction counts for wide and deep spaces", guarded(criterion2));
    report(3, "operation and reduction edge counts at (3,2)", guarded(criterion3));
    report(4, "constructive reduction matches general reduction and reachability covers",
           guarded(criterion4));
    report(5, "worked micro-examples", guarded(criterion5));
    report(6, "solver agreement with projection oracles", guarded(criterion6));
    report(7, "sparse-sample benchmark: fitted beats empirical", guarded(criterion7));
    report(8, "monotone fitted surface with heatmap slices", guarded(criterion8));
  }
  return failures == 0 ? 0 : 1;
}
