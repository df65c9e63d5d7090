#pragma once

// Config-driven Monte Carlo studies. Each runner returns structured results
// together with the CSV and SVG files it would write. Tasks are
// (grid point, replicate) units run on a fixed worker pool; results are
// merged in task order, so output never depends on scheduling.

#include "gm/faq.hpp"
#include "gm/io.hpp"
#include "gm/svg.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <vector>

namespace gm {

enum class ExperimentKind {
  trajectory,
  phase_transition,
  disagreement,
  expectation_check,
  two_step_check,
  restart_probe
};

inline std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::trajectory: return "trajectory";
    case ExperimentKind::phase_transition: return "phase_transition";
    case ExperimentKind::disagreement: return "disagreement";
    case ExperimentKind::expectation_check: return "expectation_check";
    case ExperimentKind::two_step_check: return "two_step_check";
    case ExperimentKind::restart_probe: return "restart_probe";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::trajectory, ExperimentKind::phase_transition,
                    ExperimentKind::disagreement, ExperimentKind::expectation_check,
                    ExperimentKind::two_step_check, ExperimentKind::restart_probe})
    if (to_string(kind) == name) return kind;
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::trajectory;
  std::string description;
  std::string expected_runtime;
  std::vector<ModelSpec> models;
  std::vector<Index> s_grid;
  std::vector<Index> n_grid;
  std::vector<Index> delta_grid;
  std::vector<double> trace_grid;
  int replicates = 1;
  /// Exponent delta in the theory thresholds.
  double threshold_delta = 0.1;
  FaqOptions faq;
  std::uint64_t rng_seed = 0;
  int workers = 1;
  std::string output_dir = "results";

  /// trajectory: seed count whose replicate curves are plotted, per model name.
  std::map<std::string, Index> designated_s;
  /// trajectory: iterations shown in the plots; the CSV extends further if needed.
  int plot_iterations = 20;
  /// expectation_check
  int samples = 10000;
  int pairs = 20;
  /// restart_probe
  int restarts = 20;
  /// two_step_check: "mixture" (alpha I + (1 - alpha) J/n) or "blocks" (block_diag_barycenter).
  std::string start = "mixture";

  const ModelSpec& model() const { return models.front(); }
};

namespace detail {

inline FaqOptions parse_faq_options(const Json& doc) {
  reject_unknown_keys(doc, {"max_iter", "obj_tol", "d_tol"}, "faq options");
  FaqOptions opts;
  opts.max_iter = get_or(doc, "max_iter", opts.max_iter);
  opts.obj_tol = get_or(doc, "obj_tol", opts.obj_tol);
  opts.d_tol = get_or(doc, "d_tol", opts.d_tol);
  opts.validate();
  return opts;
}

template <typename T>
void require_grid(const std::vector<T>& grid, const char* name) {
  require(!grid.empty(), std::string(name) + " must be non-empty");
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.replicates >= 1, "replicates must be at least 1");
  require(c.workers >= 1, "workers must be at least 1");
  require(!c.models.empty(), "experiment needs a model");
  switch (c.kind) {
    case ExperimentKind::trajectory:
      detail::require_grid(c.s_grid, "s_grid");
      for (const auto& m : c.models)
        for (Index s : c.s_grid) require(s >= 1 && s <= m.n, "s_grid values must lie in [1, n]");
      require(c.plot_iterations >= 1, "plot_iterations must be positive");
      break;
    case ExperimentKind::phase_transition:
      detail::require_grid(c.s_grid, "s_grid");
      detail::require_grid(c.n_grid, "n_grid");
      require(c.model().kind == ModelSpec::Kind::hom, "phase_transition samples HOM pairs");
      for (Index n : c.n_grid)
        for (Index s : c.s_grid) require(s >= 1 && s <= n, "s_grid values must lie in [1, n]");
      break;
    case ExperimentKind::disagreement: {
      detail::require_grid(c.delta_grid, "delta_grid");
      const auto& m = c.model();
      require(m.kind == ModelSpec::Kind::sbm, "disagreement needs an SBM model");
      const auto k = static_cast<Index>(m.blocks.size());
      require(k >= 2, "disagreement needs at least two blocks");
      for (Index b : m.blocks) require(b == m.n / k && m.n % k == 0, "K must divide n (equal blocks)");
      for (Index d : c.delta_grid) {
        require(d >= 0 && d <= m.n - m.n / k, "delta must lie in [0, n - n/K]");
        require(d % (k * (k - 1)) == 0, "K(K-1) must divide every delta");
      }
      break;
    }
    case ExperimentKind::expectation_check:
      require(c.samples >= 2, "samples must be at least 2");
      require(c.pairs >= 1, "pairs must be at least 1");
      for (const auto& m : c.models) require(m.n <= 30, "expectation_check is meant for n <= 30");
      break;
    case ExperimentKind::two_step_check:
      detail::require_grid(c.trace_grid, "trace_grid");
      require(c.model().kind != ModelSpec::Kind::rdpg, "two_step_check needs fixed parameters");
      require(c.start == "mixture" || c.start == "blocks", "start must be 'mixture' or 'blocks'");
      for (double t : c.trace_grid) {
        require(t >= 1.0 && t <= static_cast<double>(c.model().n), "trace values must lie in [1, n]");
        if (c.start == "blocks")
          require(t == std::floor(t), "block starts need integer traces");
      }
      break;
    case ExperimentKind::restart_probe:
      require(c.restarts >= 1, "restarts must be at least 1");
      break;
  }
}

inline ExperimentConfig parse_experiment_config(const Json& doc) {
  using detail::get_or;
  detail::reject_unknown_keys(
      doc,
      {"experiment", "description", "expected_runtime", "model", "models", "s_grid", "n_grid",
       "delta_grid", "trace_grid", "replicates", "threshold_delta", "faq", "rng_seed", "workers",
       "output_dir", "designated_s", "plot_iterations", "samples", "pairs", "restarts", "start"},
      "experiment config");
  ExperimentConfig c;
  c.kind = parse_experiment_kind(doc.at("experiment").get<std::string>());
  c.description = get_or<std::string>(doc, "description", "");
  c.expected_runtime = get_or<std::string>(doc, "expected_runtime", "");
  c.s_grid = get_or(doc, "s_grid", c.s_grid);
  c.n_grid = get_or(doc, "n_grid", c.n_grid);
  c.delta_grid = get_or(doc, "delta_grid", c.delta_grid);
  c.trace_grid = get_or(doc, "trace_grid", c.trace_grid);
  c.replicates = get_or(doc, "replicates", c.replicates);
  c.threshold_delta = get_or(doc, "threshold_delta", c.threshold_delta);
  if (doc.contains("faq")) c.faq = detail::parse_faq_options(doc.at("faq"));
  c.rng_seed = get_or<std::uint64_t>(doc, "rng_seed", 0);
  c.workers = get_or(doc, "workers", c.workers);
  c.output_dir = get_or(doc, "output_dir", c.output_dir);
  c.plot_iterations = get_or(doc, "plot_iterations", c.plot_iterations);
  c.samples = get_or(doc, "samples", c.samples);
  c.pairs = get_or(doc, "pairs", c.pairs);
  c.restarts = get_or(doc, "restarts", c.restarts);
  c.start = get_or<std::string>(doc, "start", c.start);

  if (doc.contains("model") == doc.contains("models"))
    throw std::invalid_argument("experiment config needs exactly one of 'model' or 'models'");
  std::vector<Json> model_docs;
  if (doc.contains("model")) {
    model_docs.push_back(doc.at("model"));
  } else {
    for (const auto& m : doc.at("models")) model_docs.push_back(m);
  }
  for (auto m : model_docs) {
    // The phase transition takes n from its grid.
    if (m.is_object() && !m.contains("n") && !c.n_grid.empty()) m["n"] = c.n_grid.front();
    c.models.push_back(parse_model_spec(m));
  }

  if (doc.contains("designated_s")) {
    const auto& ds = doc.at("designated_s");
    if (ds.is_number_integer()) {
      for (const auto& m : c.models) c.designated_s[m.name()] = ds.get<Index>();
    } else {
      for (const auto& item : ds.items()) c.designated_s[item.key()] = item.value().get<Index>();
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_json_file(path));
}

/// Worker count after applying the GM_WORKERS override.
inline int effective_workers(const ExperimentConfig& c) {
  if (const char* env = std::getenv("GM_WORKERS")) {
    char* end = nullptr;
    const long w = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && w >= 1) return static_cast<int>(w);
    throw std::invalid_argument(std::string("GM_WORKERS must be a positive integer, got '") + env + "'");
  }
  return c.workers;
}

/// Runs fn(0..count-1) on `workers` threads; results are returned in index
/// order. The first exception (by task index) is rethrown.
template <typename Result, typename Fn>
std::vector<Result> run_tasks(std::size_t count, int workers, Fn&& fn) {
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, count); ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// ---------------------------------------------------------------------------
// Output

struct OutputFile {
  std::string name;
  std::string content;
};

struct ExperimentOutput {
  std::vector<OutputFile> files;

  const std::string& file(const std::string& name) const {
    for (const auto& f : files)
      if (f.name == name) return f.content;
    throw std::out_of_range("no output file named " + name);
  }
  void add(std::string name, std::string content) {
    files.push_back({std::move(name), std::move(content)});
  }
};

inline void write_outputs(const ExperimentOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : out.files) {
    std::ofstream file(dir / f.name, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + (dir / f.name).string());
    file << f.content;
  }
}

namespace detail {

// Builds CSV text; doubles use %.17g so values round-trip exactly.
class Csv {
 public:
  explicit Csv(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) text_ += ',';
      text_ += h;
      first = false;
    }
    text_ += '\n';
  }

  template <typename... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((append(values, first), first = false), ...);
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  void sep(bool first) {
    if (!first) text_ += ',';
  }
  void append(double v, bool first) {
    sep(first);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    text_ += buf;
  }
  void append(bool v, bool first) {
    sep(first);
    text_ += v ? '1' : '0';
  }
  void append(const std::string& v, bool first) {
    sep(first);
    text_ += v;
  }
  void append(const char* v, bool first) { append(std::string(v), first); }
  template <typename T>
    requires std::is_integral_v<T>
  void append(T v, bool first) {
    sep(first);
    text_ += std::to_string(v);
  }

  std::string text_;
};

inline std::uint64_t replicate_seed(const ExperimentConfig& c, std::uint64_t replicate) {
  return c.rng_seed + replicate;
}

inline double mean(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return v.empty() ? 0.0 : total / static_cast<double>(v.size());
}

inline std::string index_str(Index v) { return std::to_string(v); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryRun {
  std::string model;
  Index n = 0;
  Index s = 0;
  int replicate = 0;
  std::uint64_t rng_seed = 0;
  Trajectory trajectory;
  double final_accuracy = 0.0;  // accuracy of the projected permutation
  int iterations = 0;
  bool perfect() const { return final_accuracy == 1.0; }
};

struct TrajectorySummary {
  std::string model;
  Index s = 0;
  int replicates = 0;
  int perfect = 0;
  double mean_final_accuracy = 0.0;
  /// Largest final accuracy among imperfect runs (0 if all perfect).
  double max_failed_accuracy = 0.0;
  double mean_iterations = 0.0;
};

struct TrajectoryStudy {
  std::vector<TrajectoryRun> runs;  // model, replicate, s order
  std::vector<TrajectorySummary> summaries;
  ExperimentOutput output;

  const TrajectorySummary& summary(const std::string& model, Index s) const {
    for (const auto& x : summaries)
      if (x.model == model && x.s == s) return x;
    throw std::out_of_range("no trajectory summary for " + model + " s=" + std::to_string(s));
  }
};

inline TrajectoryStudy run_trajectory(const ExperimentConfig& c) {
  validate(c);
  detail::require(c.kind == ExperimentKind::trajectory, "config is not a trajectory experiment");
  const std::size_t n_models = c.models.size();
  const auto reps = static_cast<std::size_t>(c.replicates);

  // One task per (model, replicate); the pair is shared by every s.
  auto batches = run_tasks<std::vector<TrajectoryRun>>(
      n_models * reps, effective_workers(c), [&](std::size_t task) {
        const auto& model = c.models[task / reps];
        const int rep = static_cast<int>(task % reps);
        const std::uint64_t seed = detail::replicate_seed(c, static_cast<std::uint64_t>(rep));
        Rng rng = make_rng(seed);
        const auto params = model.params(rng);
        const auto pair = sample_corr_er(params, rng);
        std::vector<TrajectoryRun> runs;
        for (Index s : c.s_grid) {
          auto result = faq(pair.a, pair.b, block_diag_barycenter(model.n, s), c.faq);
          runs.push_back({model.name(), model.n, s, rep, seed, std::move(result.trajectory),
                          result.accuracy(), result.iterations});
        }
        return runs;
      });

  TrajectoryStudy study;
  for (auto& batch : batches)
    for (auto& run : batch) study.runs.push_back(std::move(run));

  // Rows run to a common horizon; stopped runs carry their last value forward.
  std::size_t horizon = static_cast<std::size_t>(c.plot_iterations);
  for (const auto& r : study.runs) horizon = std::max(horizon, r.trajectory.size() - 1);

  detail::Csv rows({"model", "s", "replicate", "iteration", "accuracy", "objective", "alpha",
                    "stopped", "rng_seed"});
  for (const auto& r : study.runs) {
    for (std::size_t it = 0; it <= horizon; ++it) {
      const bool stopped = it >= r.trajectory.size();
      const auto& rec = stopped ? r.trajectory.back() : r.trajectory[it];
      rows.row(r.model, r.s, r.replicate, it, rec.accuracy, rec.objective, stopped ? 0.0 : rec.alpha,
               stopped, r.rng_seed);
    }
  }
  study.output.add("trajectory.csv", rows.str());

  detail::Csv means({"model", "s", "iteration", "mean_accuracy", "mean_objective", "replicates"});
  detail::Csv summary({"model", "s", "replicates", "perfect", "mean_final_accuracy",
                       "max_failed_accuracy", "mean_iterations"});
  for (const auto& model : c.models) {
    svg::LinePlot mean_plot{model.name() + ": mean accuracy by iteration", "iteration",
                            "mean accuracy", {}, 0.0, 1.0,
                            "runs stopping early carry their last value forward"};
    for (Index s : c.s_grid) {
      std::vector<const TrajectoryRun*> group;
      for (const auto& r : study.runs)
        if (r.model == model.name() && r.s == s) group.push_back(&r);
      svg::Series series{"s=" + std::to_string(s), {}, {}, true};
      for (std::size_t it = 0; it <= horizon; ++it) {
        std::vector<double> acc;
        std::vector<double> obj;
        for (const auto* r : group) {
          const auto& rec = it < r->trajectory.size() ? r->trajectory[it] : r->trajectory.back();
          acc.push_back(rec.accuracy);
          obj.push_back(rec.objective);
        }
        means.row(model.name(), s, it, detail::mean(acc), detail::mean(obj), group.size());
        if (it <= static_cast<std::size_t>(c.plot_iterations)) {
          series.x.push_back(static_cast<double>(it));
          series.y.push_back(detail::mean(acc));
        }
      }
      mean_plot.series.push_back(std::move(series));

      TrajectorySummary sum{model.name(), s, static_cast<int>(group.size())};
      std::vector<double> finals;
      std::vector<double> iters;
      for (const auto* r : group) {
        finals.push_back(r->final_accuracy);
        iters.push_back(r->iterations);
        if (r->perfect())
          ++sum.perfect;
        else
          sum.max_failed_accuracy = std::max(sum.max_failed_accuracy, r->final_accuracy);
      }
      sum.mean_final_accuracy = detail::mean(finals);
      sum.mean_iterations = detail::mean(iters);
      summary.row(sum.model, sum.s, sum.replicates, sum.perfect, sum.mean_final_accuracy,
                  sum.max_failed_accuracy, sum.mean_iterations);
      study.summaries.push_back(sum);
    }
    study.output.add("trajectory_" + model.name() + ".svg", svg::render_line_plot(mean_plot));

    if (auto it = c.designated_s.find(model.name()); it != c.designated_s.end()) {
      const Index s = it->second;
      svg::LinePlot reps_plot{model.name() + ": replicates at s=" + std::to_string(s), "iteration",
                              "accuracy", {}, 0.0, 1.0,
                              "runs stopping early carry their last value forward"};
      for (const auto& r : study.runs) {
        if (r.model != model.name() || r.s != s) continue;
        svg::Series line{"", {}, {}, false};
        for (std::size_t k = 0; k <= static_cast<std::size_t>(c.plot_iterations); ++k) {
          line.x.push_back(static_cast<double>(k));
          line.y.push_back(k < r.trajectory.size() ? r.trajectory[k].accuracy
                                                   : r.trajectory.back().accuracy);
        }
        reps_plot.series.push_back(std::move(line));
      }
      if (!reps_plot.series.empty())
        study.output.add("trajectory_" + model.name() + "_s" + std::to_string(s) + ".svg",
                         svg::render_line_plot(reps_plot));
    }
  }
  study.output.add("trajectory_mean.csv", means.str());
  study.output.add("trajectory_summary.csv", summary.str());
  return study;
}

// ---------------------------------------------------------------------------
// Phase transition

struct PhaseRun {
  Index n = 0;
  Index s = 0;
  int replicate = 0;
  std::uint64_t rng_seed = 0;
  double iter1 = 0.0;
  double iter2 = 0.0;
  double final_accuracy = 0.0;
  int iterations = 0;
};

struct PhaseCell {
  Index n = 0;
  Index s = 0;
  double iter1 = 0.0;
  double iter2 = 0.0;
  double final_accuracy = 0.0;
  int replicates = 0;
};

struct PhaseStudy {
  std::vector<PhaseRun> runs;
  std::vector<PhaseCell> cells;  // n-major, then s
  ExperimentOutput output;

  const PhaseCell& cell(Index n, Index s) const {
    for (const auto& x : cells)
      if (x.n == n && x.s == s) return x;
    throw std::out_of_range("no phase cell for n=" + std::to_string(n) + " s=" + std::to_string(s));
  }
};

inline PhaseStudy run_phase_transition(const ExperimentConfig& c) {
  validate(c);
  detail::require(c.kind == ExperimentKind::phase_transition, "config is not a phase_transition experiment");
  const auto reps = static_cast<std::size_t>(c.replicates);
  FaqOptions opts = c.faq;
  opts.record_trajectory = true;

  auto batches = run_tasks<std::vector<PhaseRun>>(
      c.n_grid.size() * reps, effective_workers(c), [&](std::size_t task) {
        const Index n = c.n_grid[task / reps];
        const int rep = static_cast<int>(task % reps);
        const std::uint64_t seed = detail::replicate_seed(c, static_cast<std::uint64_t>(rep));
        Rng rng = make_rng(seed);
        const auto pair = sample_corr_er(c.model().with_size(n).params(rng), rng);
        std::vector<PhaseRun> runs;
        for (Index s : c.s_grid) {
          auto result = faq(pair.a, pair.b, block_diag_barycenter(n, s), opts);
          const auto& t = result.trajectory;
          // A run that stopped before iteration k keeps its last iterate.
          runs.push_back({n, s, rep, seed, t[std::min<std::size_t>(1, t.size() - 1)].accuracy,
                          t[std::min<std::size_t>(2, t.size() - 1)].accuracy, result.accuracy(),
                          result.iterations});
        }
        return runs;
      });

  PhaseStudy study;
  for (auto& batch : batches)
    for (auto& run : batch) study.runs.push_back(run);

  detail::Csv runs_csv({"model", "n", "s", "replicate", "iter1", "iter2", "final", "iterations",
                        "rng_seed"});
  for (const auto& r : study.runs)
    runs_csv.row(c.model().name(), r.n, r.s, r.replicate, r.iter1, r.iter2, r.final_accuracy,
                 r.iterations, r.rng_seed);

  for (Index n : c.n_grid) {
    for (Index s : c.s_grid) {
      std::vector<double> a1, a2, af;
      for (const auto& r : study.runs) {
        if (r.n != n || r.s != s) continue;
        a1.push_back(r.iter1);
        a2.push_back(r.iter2);
        af.push_back(r.final_accuracy);
      }
      study.cells.push_back({n, s, detail::mean(a1), detail::mean(a2), detail::mean(af),
                             static_cast<int>(af.size())});
    }
  }

  detail::Csv heat({"n", "s", "stage", "mean_accuracy", "replicates"});
  for (const auto& cell : study.cells) {
    heat.row(cell.n, cell.s, "iter1", cell.iter1, cell.replicates);
    heat.row(cell.n, cell.s, "iter2", cell.iter2, cell.replicates);
    heat.row(cell.n, cell.s, "final", cell.final_accuracy, cell.replicates);
  }
  study.output.add("heatmap.csv", heat.str());
  study.output.add("heatmap_runs.csv", runs_csv.str());

  for (const char* stage : {"iter1", "iter2", "final"}) {
    svg::Heatmap map;
    map.title = std::string("mean accuracy (") + stage + ")";
    map.x_label = "n";
    map.y_label = "seeds s";
    for (Index n : c.n_grid) map.x_values.push_back(static_cast<double>(n));
    for (Index s : c.s_grid) map.y_values.push_back(static_cast<double>(s));
    for (Index s : c.s_grid) {
      std::vector<double> row;
      for (Index n : c.n_grid) {
        const auto& cell = study.cell(n, s);
        const std::string st = stage;
        row.push_back(st == "iter1" ? cell.iter1 : st == "iter2" ? cell.iter2 : cell.final_accuracy);
      }
      map.values.push_back(std::move(row));
    }
    study.output.add(std::string("heatmap_") + stage + ".svg", svg::render_heatmap(map));
  }
  return study;
}

// ---------------------------------------------------------------------------
// Partition disagreement

struct DisagreementRun {
  Index delta = 0;
  int replicate = 0;
  std::uint64_t rng_seed = 0;
  double accuracy = 0.0;
  bool perfect = false;
  ErrorBreakdown errors;
  std::int64_t measured_disagreement = 0;
};

struct DisagreementSummary {
  Index delta = 0;
  int replicates = 0;
  int perfect = 0;
  double perfect_rate = 0.0;
  double mean_accuracy = 0.0;
  // Over imperfect runs only (NaN when every run is perfect).
  double mean_correct_imperfect = 0.0;  // vertices
  double mean_within_d0 = 0.0;
  double mean_between_d0 = 0.0;
  double mean_within_sbm = 0.0;
  double mean_between_sbm = 0.0;
  /// Fraction of imperfect runs with no between-SBM-block errors.
  double zero_between_sbm_fraction = 0.0;
};

struct DisagreementStudy {
  std::vector<DisagreementRun> runs;  // replicate-major, then delta
  std::vector<DisagreementSummary> summaries;  // delta grid order
  ExperimentOutput output;

  const DisagreementSummary& summary(Index delta) const {
    for (const auto& x : summaries)
      if (x.delta == delta) return x;
    throw std::out_of_range("no disagreement summary for delta=" + std::to_string(delta));
  }
};

inline DisagreementStudy run_disagreement(const ExperimentConfig& c) {
  validate(c);
  detail::require(c.kind == ExperimentKind::disagreement, "config is not a disagreement experiment");
  const auto& model = c.model();
  const Index n = model.n;
  const int k = static_cast<int>(model.blocks.size());
  const Partition beta = Partition::blocks(model.blocks);
  const auto params = sbm_params(model.blocks, model.within_p, model.between_p, model.r);

  // One task per replicate: one graph pair, then an eta for each delta in turn.
  auto batches = run_tasks<std::vector<DisagreementRun>>(
      static_cast<std::size_t>(c.replicates), effective_workers(c), [&](std::size_t rep) {
        const std::uint64_t seed = detail::replicate_seed(c, rep);
        Rng rng = make_rng(seed);
        const auto pair = sample_corr_er(params, rng);
        std::vector<DisagreementRun> runs;
        for (Index delta : c.delta_grid) {
          const Partition eta = sample_partition_with_confusion(n, k, delta, beta, rng);
          auto result = faq(pair.a, pair.b, soft_seed_partition(PartitionPair(eta, eta)), c.faq);
          DisagreementRun run;
          run.delta = delta;
          run.replicate = static_cast<int>(rep);
          run.rng_seed = seed;
          run.accuracy = result.accuracy();
          run.perfect = result.p_star.fixed_points() == n;
          run.errors = error_breakdown(result.p_star, eta, beta);
          run.measured_disagreement = disagreement(eta, beta);
          runs.push_back(run);
        }
        return runs;
      });

  DisagreementStudy study;
  for (auto& batch : batches)
    for (auto& run : batch) study.runs.push_back(run);

  detail::Csv rows({"model", "delta", "replicate", "accuracy", "perfect", "within_d0", "between_d0",
                    "within_sbm", "between_sbm", "rng_seed"});
  for (const auto& r : study.runs)
    rows.row(model.name(), r.delta, r.replicate, r.accuracy, r.perfect, r.errors.within_d0,
             r.errors.between_d0, r.errors.within_sbm, r.errors.between_sbm, r.rng_seed);
  study.output.add("disagreement.csv", rows.str());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  detail::Csv summary({"delta", "replicates", "perfect", "perfect_rate", "mean_accuracy",
                       "mean_correct_imperfect", "mean_within_d0", "mean_between_d0",
                       "mean_within_sbm", "mean_between_sbm", "zero_between_sbm_fraction"});
  svg::Series acc_series{"mean accuracy", {}, {}, true};
  svg::Series perfect_series{"perfect rate", {}, {}, true};
  for (Index delta : c.delta_grid) {
    DisagreementSummary s;
    s.delta = delta;
    std::vector<double> acc, correct, wd, bd, ws, bs, zero;
    for (const auto& r : study.runs) {
      if (r.delta != delta) continue;
      ++s.replicates;
      acc.push_back(r.accuracy);
      if (r.perfect) {
        ++s.perfect;
        continue;
      }
      correct.push_back(r.accuracy * static_cast<double>(n));
      wd.push_back(static_cast<double>(r.errors.within_d0));
      bd.push_back(static_cast<double>(r.errors.between_d0));
      ws.push_back(static_cast<double>(r.errors.within_sbm));
      bs.push_back(static_cast<double>(r.errors.between_sbm));
      zero.push_back(r.errors.between_sbm == 0 ? 1.0 : 0.0);
    }
    auto imperfect_mean = [&](const std::vector<double>& v) { return v.empty() ? nan : detail::mean(v); };
    s.perfect_rate = static_cast<double>(s.perfect) / static_cast<double>(s.replicates);
    s.mean_accuracy = detail::mean(acc);
    s.mean_correct_imperfect = imperfect_mean(correct);
    s.mean_within_d0 = imperfect_mean(wd);
    s.mean_between_d0 = imperfect_mean(bd);
    s.mean_within_sbm = imperfect_mean(ws);
    s.mean_between_sbm = imperfect_mean(bs);
    s.zero_between_sbm_fraction = imperfect_mean(zero);
    summary.row(s.delta, s.replicates, s.perfect, s.perfect_rate, s.mean_accuracy,
                s.mean_correct_imperfect, s.mean_within_d0, s.mean_between_d0, s.mean_within_sbm,
                s.mean_between_sbm, s.zero_between_sbm_fraction);
    study.summaries.push_back(s);
    acc_series.x.push_back(static_cast<double>(delta));
    acc_series.y.push_back(s.mean_accuracy);
    perfect_series.x.push_back(static_cast<double>(delta));
    perfect_series.y.push_back(s.perfect_rate);
  }
  study.output.add("disagreement_summary.csv", summary.str());
  svg::LinePlot plot{"accuracy vs partition disagreement", "disagreement delta", "rate",
                     {acc_series, perfect_series}, 0.0, 1.0, ""};
  study.output.add("disagreement.svg", svg::render_line_plot(plot));
  return study;
}

// ---------------------------------------------------------------------------
// Expectation identity

struct ExpectationRow {
  std::string model;
  int pair = 0;
  std::uint64_t rng_seed = 0;
  double expected = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double z = 0.0;
};

struct ExpectationStudy {
  std::vector<ExpectationRow> rows;
  ExperimentOutput output;

  double max_abs_z() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, std::abs(r.z));
    return m;
  }
};

inline ExpectationStudy run_expectation_check(const ExperimentConfig& c) {
  validate(c);
  detail::require(c.kind == ExperimentKind::expectation_check, "config is not an expectation_check experiment");
  const auto pairs = static_cast<std::size_t>(c.pairs);
  ExpectationStudy study;
  study.rows = run_tasks<ExpectationRow>(
      c.models.size() * pairs, effective_workers(c), [&](std::size_t task) {
        const auto& model = c.models[task / pairs];
        const int index = static_cast<int>(task % pairs);
        const std::uint64_t seed = detail::replicate_seed(c, static_cast<std::uint64_t>(index));
        Rng rng = make_rng(seed);
        const auto params = model.params(rng);
        const Permutation p = random_permutation(model.n, rng);
        const Permutation q = random_permutation(model.n, rng);
        const Matrix pm = p.matrix();
        const Matrix qt = q.matrix().transpose();
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int t = 0; t < c.samples; ++t) {
          const auto g = sample_corr_er(params, rng);
          const double v = (g.a.matrix() * pm * g.b.matrix() * qt).trace();
          sum += v;
          sum_sq += v * v;
        }
        const double count = static_cast<double>(c.samples);
        ExpectationRow row{model.name(), index, seed, expected_trace(params, p, q)};
        row.mc_mean = sum / count;
        const double var = std::max(0.0, (sum_sq - count * row.mc_mean * row.mc_mean) / (count - 1.0));
        row.mc_se = std::sqrt(var / count);
        const double diff = row.mc_mean - row.expected;
        if (row.mc_se > 0.0)
          row.z = diff / row.mc_se;
        else
          row.z = std::abs(diff) <= 1e-9 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        return row;
      });

  detail::Csv csv({"model", "pair", "expected", "mc_mean", "mc_se", "z", "samples", "rng_seed"});
  for (const auto& r : study.rows)
    csv.row(r.model, r.pair, r.expected, r.mc_mean, r.mc_se, r.z, c.samples, r.rng_seed);
  study.output.add("expectation.csv", csv.str());
  return study;
}

// ---------------------------------------------------------------------------
// Two-step convergence

struct TwoStepRun {
  double target_trace = 0.0;
  int replicate = 0;
  std::uint64_t rng_seed = 0;
  bool converged = false;
  int steps_used = 0;
  double start_trace = 0.0;
};

struct TwoStepRate {
  double target_trace = 0.0;
  int replicates = 0;
  int successes = 0;
  double rate = 0.0;
};

struct TwoStepStudy {
  std::vector<TwoStepRun> runs;
  std::vector<TwoStepRate> rates;  // trace grid order
  std::optional<TheoryThresholds> thresholds;
  ExperimentOutput output;

  const TwoStepRate& rate(double trace) const {
    for (const auto& x : rates)
      if (x.target_trace == trace) return x;
    throw std::out_of_range("no two-step rate for trace " + std::to_string(trace));
  }
};

/// alpha I + (1 - alpha) J/n with trace t, i.e. alpha = (t - 1)/(n - 1).
inline DoublyStochasticMatrix identity_mixture(Index n, double t) {
  detail::require(n >= 1 && t >= 1.0 && t <= static_cast<double>(n), "trace must lie in [1, n]");
  if (n == 1) return DoublyStochasticMatrix(Permutation::identity(1));
  const double alpha = (t - 1.0) / static_cast<double>(n - 1);
  const double weights[] = {alpha, 1.0 - alpha};
  const DoublyStochasticMatrix parts[] = {DoublyStochasticMatrix(Permutation::identity(n)),
                                          barycenter(n)};
  return convex_combination(weights, parts);
}

inline TwoStepStudy run_two_step(const ExperimentConfig& c) {
  validate(c);
  detail::require(c.kind == ExperimentKind::two_step_check, "config is not a two_step_check experiment");
  const auto& model = c.model();
  Rng unused = make_rng(c.rng_seed);
  const auto params = model.params(unused);

  TwoStepStudy study;
  try {
    study.thresholds = theory_thresholds(params, c.threshold_delta);
  } catch (const std::domain_error&) {
    study.thresholds.reset();
  }

  auto batches = run_tasks<std::vector<TwoStepRun>>(
      static_cast<std::size_t>(c.replicates), effective_workers(c), [&](std::size_t rep) {
        const std::uint64_t seed = detail::replicate_seed(c, rep);
        Rng rng = make_rng(seed);
        const auto pair = sample_corr_er(params, rng);
        std::vector<TwoStepRun> runs;
        for (double t : c.trace_grid) {
          const auto d0 = c.start == "blocks"
                              ? block_diag_barycenter(model.n, static_cast<Index>(t))
                              : identity_mixture(model.n, t);
          const auto report = two_step_check(pair.a, pair.b, d0, study.thresholds);
          runs.push_back({t, static_cast<int>(rep), seed, report.converged_to_identity,
                          report.steps_used, report.start_trace});
        }
        return runs;
      });
  for (auto& batch : batches)
    for (auto& run : batch) study.runs.push_back(run);

  detail::Csv rows({"model", "trace", "replicate", "converged", "steps_used", "start_trace", "rng_seed"});
  for (const auto& r : study.runs)
    rows.row(model.name(), r.target_trace, r.replicate, r.converged, r.steps_used, r.start_trace,
             r.rng_seed);
  study.output.add("two_step.csv", rows.str());

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const auto& th = study.thresholds;
  detail::Csv summary({"trace", "replicates", "successes", "rate", "ell", "m", "c", "epsilon",
                       "threshold_delta", "binding"});
  svg::Series series{"two-step success rate", {}, {}, true};
  for (double t : c.trace_grid) {
    TwoStepRate rate{t};
    for (const auto& r : study.runs) {
      if (r.target_trace != t) continue;
      ++rate.replicates;
      rate.successes += r.converged ? 1 : 0;
    }
    rate.rate = static_cast<double>(rate.successes) / static_cast<double>(rate.replicates);
    summary.row(t, rate.replicates, rate.successes, rate.rate, th ? th->ell : nan, th ? th->m : nan,
                th ? th->c : nan, th ? th->epsilon : nan, c.threshold_delta, th && th->binding());
    series.x.push_back(t);
    series.y.push_back(rate.rate);
    study.rates.push_back(rate);
  }
  study.output.add("two_step_summary.csv", summary.str());
  std::string note = "start: " + c.start;
  if (th) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "; theory ell=%.4g (%s at n=%lld)", th->ell,
                  th->binding() ? "binding" : "non-binding", static_cast<long long>(model.n));
    note += buf;
  }
  svg::LinePlot plot{"two-step identity recovery", "trace(D0)", "success rate", {series}, 0.0, 1.0,
                     note};
  study.output.add("two_step.svg", svg::render_line_plot(plot));
  return study;
}

// ---------------------------------------------------------------------------
// Random restarts

struct RestartReplicate {
  int replicate = 0;
  std::uint64_t rng_seed = 0;
  RestartProbe probe;
  bool identity_found = false;
  /// Every identity-recovering run attains the strictly largest objective.
  bool identity_strictly_best = false;
};

struct RestartStudy {
  std::vector<RestartReplicate> replicates;
  ExperimentOutput output;
};

inline RestartStudy run_restart_probe(const ExperimentConfig& c) {
  validate(c);
  detail::require(c.kind == ExperimentKind::restart_probe, "config is not a restart_probe experiment");
  const auto& model = c.model();
  RestartStudy study;
  study.replicates = run_tasks<RestartReplicate>(
      static_cast<std::size_t>(c.replicates), effective_workers(c), [&](std::size_t rep) {
        RestartReplicate out;
        out.replicate = static_cast<int>(rep);
        out.rng_seed = detail::replicate_seed(c, rep);
        Rng rng = make_rng(out.rng_seed);
        const auto pair = sample_corr_er(model.params(rng), rng);
        out.probe = random_restart_probe(pair.a, pair.b, c.restarts, c.faq, rng);
        const auto id = Permutation::identity(model.n);
        double id_obj = -std::numeric_limits<double>::infinity();
        double other_best = -std::numeric_limits<double>::infinity();
        for (const auto& run : out.probe.runs) {
          if (run.result.p_star == id) {
            out.identity_found = true;
            id_obj = run.objective;
          } else {
            other_best = std::max(other_best, run.objective);
          }
        }
        out.identity_strictly_best = out.identity_found && id_obj > other_best;
        return out;
      });

  detail::Csv rows({"model", "replicate", "rank", "start", "objective", "accuracy", "iterations",
                    "rng_seed"});
  detail::Csv summary({"model", "replicate", "best_objective", "gap_to_next", "best_accuracy",
                       "identity_found", "identity_strictly_best", "rng_seed"});
  for (const auto& r : study.replicates) {
    int rank = 0;
    for (const auto& run : r.probe.runs)
      rows.row(model.name(), r.replicate, rank++, run.start_index, run.objective,
               run.result.accuracy(), run.result.iterations, r.rng_seed);
    const auto& best = r.probe.runs.front();
    summary.row(model.name(), r.replicate, best.objective, r.probe.gap_to_next,
                best.result.accuracy(), r.identity_found, r.identity_strictly_best, r.rng_seed);
  }
  study.output.add("restart.csv", rows.str());
  study.output.add("restart_summary.csv", summary.str());
  return study;
}

/// Runs whichever study the config names and returns its files.
inline ExperimentOutput run_experiment(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::trajectory: return run_trajectory(c).output;
    case ExperimentKind::phase_transition: return run_phase_transition(c).output;
    case ExperimentKind::disagreement: return run_disagreement(c).output;
    case ExperimentKind::expectation_check: return run_expectation_check(c).output;
    case ExperimentKind::two_step_check: return run_two_step(c).output;
    case ExperimentKind::restart_probe: return run_restart_probe(c).output;
  }
  throw std::logic_error("unknown experiment kind");
}

}  // namespace gm
