#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pvseq/pvseq.hpp>

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitNoConvergence = 4;

struct SpaceArgs {
  int n = 0;
  int m = 0;
  std::string relation = "um";
};

void add_space_options(CLI::App& cmd, SpaceArgs& args, bool with_relation = true) {
  cmd.add_option("--n", args.n, "Number of periods (days) in a PV sequence")->required()->check(CLI::PositiveNumber);
  cmd.add_option("--m", args.m, "Maximum PV count per period")->required()->check(CLI::PositiveNumber);
  if (with_relation)
    cmd.add_option("--relation", args.relation, "Partial order: um (Up/Move) or us (Up/Swap)")
        ->check(CLI::IsMember({"um", "us"}));
}

pvseq::Relation to_relation(const std::string& s) {
  return s == "um" ? pvseq::Relation::UM : pvseq::Relation::US;
}

pvseq::GraphVariant to_variant(const std::string& s) {
  if (s == "enumeration") return pvseq::GraphVariant::Enumeration;
  if (s == "operation") return pvseq::GraphVariant::Operation;
  return pvseq::GraphVariant::Reduction;
}

struct FitArgs {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  long max_iters = 200000;
  double zero_weight_eps = 0.0;
};

void add_fit_options(CLI::App& cmd, FitArgs& args) {
  cmd.add_option("--abs-tol", args.abs_tol, "Solver absolute tolerance")->check(CLI::PositiveNumber);
  cmd.add_option("--rel-tol", args.rel_tol, "Solver relative tolerance")->check(CLI::PositiveNumber);
  cmd.add_option("--max-iters", args.max_iters, "Solver iteration cap")->check(CLI::PositiveNumber);
  cmd.add_option("--zero-weight-eps", args.zero_weight_eps,
                 "Weight bump making unobserved sequences deterministic")
      ->check(CLI::NonNegativeNumber);
}

pvseq::FitConfig to_config(const FitArgs& a) { return {a.abs_tol, a.rel_tol, a.max_iters, a.zero_weight_eps}; }

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
  return is;
}

double parse_double_field(std::string_view f, const std::string& path, std::size_t line_no) {
  double v = 0;
  const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || p != f.data() + f.size())
    throw std::runtime_error(path + " line " + std::to_string(line_no) + ": bad number '" + std::string(f) + "'");
  return v;
}

// "rank,value" rows covering every rank exactly once, in any order.
std::vector<double> read_rank_value_csv(const std::string& path, std::uint64_t cardinality) {
  auto in = open_in(path);
  std::vector<double> values(cardinality, 0.0);
  std::vector<char> seen(cardinality, 0);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      if (line.rfind("rank,", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": expected rank,value");
    const auto rank = static_cast<std::uint64_t>(parse_double_field(std::string_view(line).substr(0, comma), path, line_no));
    if (rank >= cardinality)
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": rank out of range");
    if (seen[rank]) throw std::runtime_error(path + " line " + std::to_string(line_no) + ": duplicate rank");
    seen[rank] = 1;
    values[rank] = parse_double_field(std::string_view(line).substr(comma + 1), path, line_no);
  }
  for (std::uint64_t r = 0; r < cardinality; ++r)
    if (!seen[r]) throw std::runtime_error(path + ": missing value for rank " + std::to_string(r));
  return values;
}

// Pulls the leading rank and the trailing fitted column back out of a
// "rank,sequence,weight,target,fitted" table.
std::vector<double> read_fitted_csv(const std::string& path, std::uint64_t cardinality) {
  auto in = open_in(path);
  std::vector<double> values(cardinality, 0.0);
  std::vector<char> seen(cardinality, 0);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      if (line.rfind("rank,", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    const auto last = line.rfind(',');
    if (comma == std::string::npos || last == comma)
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": malformed row");
    const auto rank = static_cast<std::uint64_t>(parse_double_field(std::string_view(line).substr(0, comma), path, line_no));
    if (rank >= cardinality)
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": rank out of range");
    if (seen[rank]) throw std::runtime_error(path + " line " + std::to_string(line_no) + ": duplicate rank");
    seen[rank] = 1;
    values[rank] = parse_double_field(std::string_view(line).substr(last + 1), path, line_no);
  }
  for (std::uint64_t r = 0; r < cardinality; ++r)
    if (!seen[r]) throw std::runtime_error(path + ": missing fitted value for rank " + std::to_string(r));
  return values;
}

// "r,f,weight,target,fitted" rows back into a row-major grid.
std::vector<double> read_rf_fitted_csv(const std::string& path, const pvseq::RFTable& dims) {
  auto in = open_in(path);
  std::vector<double> values(dims.cells(), 0.0);
  std::vector<char> seen(dims.cells(), 0);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      if (line.rfind("r,", 0) == 0) continue;
    }
    const auto fields = pvseq::detail::split_fields(line);
    if (fields.size() != 5) throw std::runtime_error(path + " line " + std::to_string(line_no) + ": malformed row");
    const int r = static_cast<int>(parse_double_field(fields[0], path, line_no));
    const int f = static_cast<int>(parse_double_field(fields[1], path, line_no));
    if (r < 1 || r > dims.periods || f < 1 || f > dims.max_pv)
      throw std::runtime_error(path + " line " + std::to_string(line_no) + ": cell out of range");
    const std::size_t c = dims.index(r, f);
    if (seen[c]) throw std::runtime_error(path + " line " + std::to_string(line_no) + ": duplicate cell");
    seen[c] = 1;
    values[c] = parse_double_field(fields[4], path, line_no);
  }
  for (std::size_t c = 0; c < dims.cells(); ++c)
    if (!seen[c]) throw std::runtime_error(path + ": missing fitted value for a grid cell");
  return values;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  long long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  }
};

// --- reduce: build one graph variant and export it.

struct ReduceArgs {
  SpaceArgs space;
  std::string variant = "reduction";
  std::string out;
  std::string summary;
  std::uint64_t edge_cap = 100000000;
};

int run_reduce(const ReduceArgs& a) {
  const pvseq::SequenceSpace sp(a.space.n, a.space.m);
  const Timer timer;
  const pvseq::PosetGraph g = pvseq::build_graph(sp, to_relation(a.space.relation), to_variant(a.variant), a.edge_cap);
  const auto wall = timer.ms();
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    pvseq::write_graph_csv(os, g);
  }
  if (!a.summary.empty()) {
    auto os = open_out(a.summary);
    os << pvseq::graph_summary(g).dump(2) << '\n';
  }
  std::cout << "nodes=" << g.node_count() << " edges=" << g.edge_count() << " relation=" << a.space.relation
            << " variant=" << a.variant << " wall_ms=" << wall << '\n';
  return 0;
}

// --- tables: constraint-count matrix over the standard row set.

struct TablesArgs {
  std::string out;
  std::uint64_t pair_cap = 100000000;
};

int run_tables(const TablesArgs& a) {
  static const std::pair<int, int> rows[] = {{5, 1}, {5, 2}, {5, 3}, {5, 4}, {5, 5}, {5, 6},
                                             {1, 6}, {2, 6}, {3, 6}, {4, 6},
                                             {3, 30}, {4, 12}, {6, 4}, {7, 3}, {8, 2}, {9, 2}};
  const Timer timer;
  std::ostringstream csv;
  csv << "n,m,vars,enumeration_um,enumeration_us,operation_um,operation_us,reduction_um,reduction_us\n";
  for (const auto& [n, m] : rows) {
    const pvseq::SequenceSpace sp(n, m);
    if (sp.cardinality() > 30000) continue;
    csv << n << ',' << m << ',' << sp.cardinality();
    for (const auto rel : {pvseq::Relation::UM, pvseq::Relation::US}) {
      std::string cell;
      try {
        cell = std::to_string(pvseq::closure_pair_count(sp, rel, a.pair_cap));
      } catch (const pvseq::CapacityError&) {
        cell = "OM";
      }
      csv << ',' << cell;
    }
    for (const auto rel : {pvseq::Relation::UM, pvseq::Relation::US})
      csv << ',' << pvseq::operation_graph(sp, rel).edge_count();
    for (const auto rel : {pvseq::Relation::UM, pvseq::Relation::US})
      csv << ',' << pvseq::construct_reduction(sp, rel).edge_count();
    csv << '\n';
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    auto os = open_out(a.out);
    os << csv.str();
    std::cout << "rows written to " << a.out << " wall_ms=" << timer.ms() << '\n';
  }
  return 0;
}

// --- fit: histories -> empirical stats -> shape-restricted fit -> tables.

struct FitCmdArgs {
  SpaceArgs space;
  std::string variant = "reduction";
  std::string model = "sequence";
  std::string histories;
  std::string out;
  std::string diagnostics;
  std::string slice_out;
  std::vector<int> slice_v3;
  FitArgs fit;
};

int run_fit(const FitCmdArgs& a) {
  const pvseq::SequenceSpace sp(a.space.n, a.space.m);
  auto in = open_in(a.histories);
  const auto histories = pvseq::read_histories_csv(in, sp);
  const pvseq::FitConfig cfg = to_config(a.fit);
  const Timer timer;

  pvseq::FitResult fit;
  std::uint64_t nodes = 0, edges = 0;
  if (a.model == "sequence") {
    const pvseq::EmpiricalStats stats = pvseq::empirical_sequence_stats(histories, sp);
    const pvseq::PosetGraph g = pvseq::build_graph(sp, to_relation(a.space.relation), to_variant(a.variant));
    nodes = g.node_count();
    edges = g.edge_count();
    fit = pvseq::fit_monotone(g, stats, cfg);
    if (!a.out.empty()) {
      auto os = open_out(a.out);
      pvseq::write_fit_csv(os, sp, stats, fit);
    }
    for (int v3 : a.slice_v3) {
      auto os = open_out(a.slice_out + "_v3_" + std::to_string(v3) + ".csv");
      pvseq::write_slice_csv(os, sp, fit.x, v3);
    }
  } else {  // rf
    if (!a.slice_v3.empty()) throw std::runtime_error("slices are only defined for the sequence model");
    const pvseq::RFTable table = pvseq::empirical_rf_table(histories, sp);
    nodes = table.cells();
    edges = pvseq::grid_edges(table.periods, table.max_pv).size();
    fit = pvseq::fit_2d(table, cfg);
    if (!a.out.empty()) {
      auto os = open_out(a.out);
      pvseq::write_rf_csv(os, table, fit);
    }
  }

  if (!a.diagnostics.empty()) {
    auto os = open_out(a.diagnostics);
    os << pvseq::fit_diagnostics(fit, cfg, nodes, edges).dump(2) << '\n';
  }
  std::cout << "status=" << pvseq::to_string(fit.status) << " iterations=" << fit.iterations
            << " objective=" << pvseq::detail::format_double(fit.objective) << " wall_ms=" << timer.ms() << '\n';
  return fit.status == pvseq::FitStatus::Converged ? 0 : kExitNoConvergence;
}

// --- evaluate: fitted table + validation histories -> top-N metrics.

struct EvaluateArgs {
  SpaceArgs space;
  std::string model = "sequence";
  std::string model_csv;
  std::string histories;
  std::string out;
  int top_n = 3;
  bool impute_empty = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const pvseq::SequenceSpace sp(a.space.n, a.space.m);
  auto in = open_in(a.histories);
  const auto histories = pvseq::read_histories_csv(in, sp);
  pvseq::EvalOptions opts;
  opts.top_n = a.top_n;
  opts.impute_empty_as_zero = a.impute_empty;

  pvseq::EvalSummary summary;
  if (a.model == "sequence") {
    const auto values = read_fitted_csv(a.model_csv, sp.cardinality());
    summary = pvseq::evaluate_model(histories, pvseq::sequence_model(sp, values), opts);
  } else {
    pvseq::RFTable dims{sp.periods(), sp.max_pv(), {}, {}, {}};
    const auto values = read_rf_fitted_csv(a.model_csv, dims);
    summary = pvseq::evaluate_model(histories, pvseq::rf_model(sp, dims, values), opts);
  }

  const auto j = pvseq::metrics_json(summary);
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    os << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

// --- synth: ground-truth generator for end-to-end runs.

struct SynthArgs {
  SpaceArgs space;
  std::string truth = "linear";
  double lo = 0.0;
  double hi = 0.5;
  std::uint64_t pairs = 1000;
  std::uint64_t seed = 1;
  int items_per_user = 20;
  std::string out;
  std::string truth_out;
};

int run_synth(const SynthArgs& a) {
  const pvseq::SequenceSpace sp(a.space.n, a.space.m);
  if (!(a.lo >= 0.0) || !(a.hi <= 1.0) || !(a.lo <= a.hi))
    throw std::runtime_error("truth range must satisfy 0 <= lo <= hi <= 1");
  const std::vector<double> truth = a.truth == "linear" ? pvseq::make_linear_truth(sp, a.lo, a.hi)
                                                        : pvseq::make_recency_truth(sp, a.lo, a.hi);
  pvseq::SynthOptions opts;
  opts.items_per_user = a.items_per_user;
  const pvseq::SynthResult result =
      pvseq::synthesize(sp, to_relation(a.space.relation), truth, a.pairs, a.seed, opts);

  if (!a.out.empty()) {
    auto os = open_out(a.out);
    pvseq::write_histories_csv(os, result.histories, sp);
  }
  if (!a.truth_out.empty()) {
    auto os = open_out(a.truth_out);
    os << "rank,value\n";
    for (std::uint64_t r = 0; r < sp.cardinality(); ++r)
      os << r << ',' << pvseq::detail::format_double(result.truth[r]) << '\n';
  }
  std::size_t chosen = 0;
  for (const auto& h : result.histories) chosen += h.chosen ? 1 : 0;
  std::cout << "pairs=" << result.histories.size() << " chosen=" << chosen << '\n';
  return 0;
}

// --- postprocess: monotone correction of external predictions.

struct PostprocessArgs {
  SpaceArgs space;
  std::string variant = "reduction";
  std::string histories;
  std::string external;
  std::string out;
  std::string diagnostics;
  FitArgs fit;
};

int run_postprocess(const PostprocessArgs& a) {
  const pvseq::SequenceSpace sp(a.space.n, a.space.m);
  auto in = open_in(a.histories);
  const auto histories = pvseq::read_histories_csv(in, sp);
  const pvseq::EmpiricalStats stats = pvseq::empirical_sequence_stats(histories, sp);
  const auto external = read_rank_value_csv(a.external, sp.cardinality());
  const pvseq::PosetGraph g = pvseq::build_graph(sp, to_relation(a.space.relation), to_variant(a.variant));
  const pvseq::FitConfig cfg = to_config(a.fit);

  const pvseq::FitResult fit = pvseq::postprocess_predictions(g, stats, external, cfg);
  if (!a.out.empty()) {
    auto os = open_out(a.out);
    os << "rank,external,corrected\n";
    for (std::uint64_t r = 0; r < sp.cardinality(); ++r)
      os << r << ',' << pvseq::detail::format_double(external[r]) << ','
         << pvseq::detail::format_double(fit.x[r]) << '\n';
  }
  if (!a.diagnostics.empty()) {
    auto os = open_out(a.diagnostics);
    os << pvseq::fit_diagnostics(fit, cfg, g.node_count(), g.edge_count()).dump(2) << '\n';
  }
  std::cout << "status=" << pvseq::to_string(fit.status) << " max_violation="
            << pvseq::detail::format_double(fit.max_violation) << '\n';
  return fit.status == pvseq::FitStatus::Converged ? 0 : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Item-choice probability estimation over partially ordered pageview sequences"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Flat key=value config file with dotted keys (e.g. reduce.n=5); "
                 "command-line flags take precedence. Place before the subcommand.");
  int rc = 0;

  ReduceArgs reduce_args;
  CLI::App* reduce = app.add_subcommand("reduce", "Build an order graph (enumeration, operation, or reduction)");
  add_space_options(*reduce, reduce_args.space);
  reduce->add_option("--variant", reduce_args.variant, "Graph variant to build")
      ->check(CLI::IsMember({"enumeration", "operation", "reduction"}));
  reduce->add_option("--out", reduce_args.out, "Edge-list CSV output path");
  reduce->add_option("--summary", reduce_args.summary, "Summary JSON output path");
  reduce->add_option("--edge-cap", reduce_args.edge_cap, "Enumeration edge budget before aborting");
  reduce->callback([&] { rc = run_reduce(reduce_args); });

  TablesArgs tables_args;
  CLI::App* tables = app.add_subcommand("tables", "Constraint-count table across the standard spaces");
  tables->add_option("--out", tables_args.out, "CSV output path (stdout when omitted)");
  tables->add_option("--pair-cap", tables_args.pair_cap, "Closure pair budget; rows beyond it print OM");
  tables->callback([&] { rc = run_tables(tables_args); });

  FitCmdArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit the shape-restricted model to pair histories");
  add_space_options(*fit, fit_args.space);
  fit->add_option("--variant", fit_args.variant, "Constraint graph variant")
      ->check(CLI::IsMember({"operation", "reduction"}));
  fit->add_option("--model", fit_args.model, "sequence (full lattice) or rf (recency-frequency grid)")
      ->check(CLI::IsMember({"sequence", "rf"}));
  fit->add_option("--histories", fit_args.histories, "Input pair-history CSV")->required();
  fit->add_option("--out", fit_args.out, "Fitted-table CSV output path");
  fit->add_option("--diagnostics", fit_args.diagnostics, "Solver diagnostics JSON output path");
  fit->add_option("--slice-out", fit_args.slice_out, "Path prefix for (v1,v2) heatmap slices");
  fit->add_option("--slice-v3", fit_args.slice_v3, "Emit a heatmap slice at this v3 (repeatable)");
  add_fit_options(*fit, fit_args.fit);
  fit->callback([&] { rc = run_fit(fit_args); });

  EvaluateArgs eval_args;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a fitted model on validation histories");
  add_space_options(*evaluate, eval_args.space, false);
  evaluate->add_option("--model", eval_args.model, "sequence or rf")->check(CLI::IsMember({"sequence", "rf"}));
  evaluate->add_option("--model-csv", eval_args.model_csv, "Fitted table produced by `fit`")->required();
  evaluate->add_option("--histories", eval_args.histories, "Validation pair-history CSV")->required();
  evaluate->add_option("--out", eval_args.out, "Metrics JSON output path");
  evaluate->add_option("--top-n", eval_args.top_n, "Items selected per user")->check(CLI::PositiveNumber);
  evaluate->add_flag("--impute-empty", eval_args.impute_empty, "Count users without validation views as zero F1");
  evaluate->callback([&] { rc = run_evaluate(eval_args); });

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate synthetic histories with known ground truth");
  add_space_options(*synth, synth_args.space);
  synth->add_option("--truth", synth_args.truth, "Ground-truth family")->check(CLI::IsMember({"linear", "recency"}));
  synth->add_option("--lo", synth_args.lo, "Truth value at the all-zero sequence");
  synth->add_option("--hi", synth_args.hi, "Truth value at the all-m sequence");
  synth->add_option("--pairs", synth_args.pairs, "Number of user-item pairs to draw");
  synth->add_option("--seed", synth_args.seed, "Random seed");
  synth->add_option("--items-per-user", synth_args.items_per_user, "Pairs grouped per synthetic user")
      ->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_args.out, "Histories CSV output path");
  synth->add_option("--truth-out", synth_args.truth_out, "Ground-truth rank,value CSV output path");
  synth->callback([&] { rc = run_synth(synth_args); });

  PostprocessArgs post_args;
  CLI::App* post = app.add_subcommand("postprocess", "Monotone correction of external predictions");
  add_space_options(*post, post_args.space);
  post->add_option("--variant", post_args.variant, "Constraint graph variant")
      ->check(CLI::IsMember({"operation", "reduction"}));
  post->add_option("--histories", post_args.histories, "Training pair-history CSV (observation weights)")->required();
  post->add_option("--external", post_args.external, "External rank,value prediction CSV")->required();
  post->add_option("--out", post_args.out, "Corrected prediction CSV output path");
  post->add_option("--diagnostics", post_args.diagnostics, "Solver diagnostics JSON output path");
  add_fit_options(*post, post_args.fit);
  post->callback([&] { rc = run_postprocess(post_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const pvseq::CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return rc;
}
