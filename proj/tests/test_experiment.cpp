#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <map>
#include <sstream>

using namespace gm;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::out_of_range("no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  double num(std::size_t row, const std::string& name) const { return std::stod(rows[row][col(name)]); }
};

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first)
      t.header = std::move(cells);
    else
      t.rows.push_back(std::move(cells));
    first = false;
  }
  return t;
}

ExperimentConfig config(const std::string& json) { return parse_experiment_config(Json::parse(json)); }

const char* kTinyTrajectory = R"({
  "experiment": "trajectory",
  "models": [{"model": "hom", "n": 40, "p": 0.5, "r": 0.5},
             {"model": "sbm", "n": 40, "blocks": 4, "within_p": 0.5, "between_p": 0.1, "r": 0.5}],
  "s_grid": [1, 4, 20],
  "replicates": 4,
  "designated_s": 4,
  "plot_iterations": 6,
  "rng_seed": 11
})";

// Scrubs GM_WORKERS for the duration of a test.
struct WorkersEnv {
  WorkersEnv() { unsetenv("GM_WORKERS"); }
  ~WorkersEnv() { unsetenv("GM_WORKERS"); }
};

}  // namespace

TEST(Config, ParsesTrajectory) {
  const auto c = config(kTinyTrajectory);
  EXPECT_EQ(c.kind, ExperimentKind::trajectory);
  ASSERT_EQ(c.models.size(), 2u);
  EXPECT_EQ(c.models[1].blocks, (std::vector<Index>{10, 10, 10, 10}));
  EXPECT_EQ(c.designated_s.at("sbm"), 4);
  EXPECT_EQ(c.replicates, 4);
}

TEST(Config, RejectsBadDocuments) {
  EXPECT_THROW(config(R"({"experiment": "trajectory", "model": {"model": "hom", "n": 10}, "s_grid": [1], "replicatez": 3})"),
               std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "trajectory", "s_grid": [1]})"), std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "trajectory", "model": {"model": "hom", "n": 10},
                          "models": [{"model": "hom", "n": 10}], "s_grid": [1]})"),
               std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "bogus", "model": {"model": "hom", "n": 10}})"), std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "trajectory", "model": {"model": "hom", "n": 10}, "s_grid": []})"),
               std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "trajectory", "model": {"model": "hom", "n": 10}, "s_grid": [1], "replicates": 0})"),
               std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "disagreement", "model": {"model": "sbm", "n": 300, "blocks": 5},
                          "delta_grid": [30]})"),
               std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "trajectory", "model": {"model": "hom", "n": 10, "colour": 1}, "s_grid": [1]})"),
               std::invalid_argument);
  EXPECT_THROW(config(R"({"experiment": "trajectory", "model": {"model": "hom", "n": 10}, "s_grid": [1],
                          "faq": {"max_iters": 5}})"),
               std::invalid_argument);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"fig1_trajectories", "fig3_phase_transition", "fig3_phase_transition_full",
                           "fig4_disagreement", "expectation_check", "two_step", "restart_probe"}) {
    const std::string path = std::string(GM_CONFIG_DIR) + "/" + name + ".json";
    EXPECT_NO_THROW(load_experiment_config(path)) << path;
  }
}

TEST(Workers, TasksComeBackInOrder) {
  for (int workers : {1, 3, 8}) {
    const auto out = run_tasks<int>(50, workers, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  }
  EXPECT_THROW(run_tasks<int>(5, 2,
                              [](std::size_t i) -> int {
                                if (i == 3) throw std::runtime_error("boom");
                                return 0;
                              }),
               std::runtime_error);
}

TEST(Workers, EnvironmentOverride) {
  WorkersEnv guard;
  auto c = config(kTinyTrajectory);
  c.workers = 2;
  EXPECT_EQ(effective_workers(c), 2);
  setenv("GM_WORKERS", "5", 1);
  EXPECT_EQ(effective_workers(c), 5);
  setenv("GM_WORKERS", "zero", 1);
  EXPECT_THROW(effective_workers(c), std::invalid_argument);
}

TEST(Trajectory, RowsAndAggregates) {
  WorkersEnv guard;
  const auto c = config(kTinyTrajectory);
  const auto study = run_trajectory(c);
  const auto rows = parse_csv(study.output.file("trajectory.csv"));
  for (const char* column : {"model", "s", "replicate", "iteration", "accuracy", "objective", "alpha", "rng_seed"})
    EXPECT_NO_THROW(rows.col(column)) << column;

  std::map<std::tuple<std::string, int, int>, std::vector<double>> groups;
  for (std::size_t i = 0; i < rows.rows.size(); ++i) {
    const double acc = rows.num(i, "accuracy");
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
    const int s = static_cast<int>(rows.num(i, "s"));
    const int it = static_cast<int>(rows.num(i, "iteration"));
    if (it == 0) EXPECT_NEAR(acc, s / 40.0, 1e-12);  // block sums of 1/b round
    EXPECT_EQ(static_cast<std::uint64_t>(rows.num(i, "rng_seed")), 11u + static_cast<unsigned>(rows.num(i, "replicate")));
    groups[{rows.rows[i][rows.col("model")], s, it}].push_back(acc);
  }

  const auto means = parse_csv(study.output.file("trajectory_mean.csv"));
  ASSERT_EQ(means.rows.size(), groups.size());
  for (std::size_t i = 0; i < means.rows.size(); ++i) {
    const auto key = std::make_tuple(means.rows[i][means.col("model")], static_cast<int>(means.num(i, "s")),
                                     static_cast<int>(means.num(i, "iteration")));
    const auto& values = groups.at(key);
    double total = 0.0;
    for (double v : values) total += v;
    EXPECT_NEAR(means.num(i, "mean_accuracy"), total / static_cast<double>(values.size()), 1e-12);
  }

  EXPECT_EQ(study.summary("hom", 20).replicates, 4);
  EXPECT_NO_THROW(study.output.file("trajectory_hom.svg"));
  EXPECT_NO_THROW(study.output.file("trajectory_sbm_s4.svg"));
}

TEST(Determinism, SameSeedSameBytesAcrossWorkerCounts) {
  WorkersEnv guard;
  auto c = config(kTinyTrajectory);
  c.workers = 1;
  const auto one = run_experiment(c);
  c.workers = 3;
  const auto three = run_experiment(c);
  ASSERT_EQ(one.files.size(), three.files.size());
  for (std::size_t i = 0; i < one.files.size(); ++i) {
    EXPECT_EQ(one.files[i].name, three.files[i].name);
    EXPECT_EQ(one.files[i].content, three.files[i].content) << one.files[i].name;
  }
  c.rng_seed = 12;
  EXPECT_NE(run_experiment(c).file("trajectory.csv"), one.file("trajectory.csv"));
}

TEST(Phase, StagesAndMeans) {
  WorkersEnv guard;
  const auto c = config(R"({"experiment": "phase_transition", "model": {"model": "hom", "p": 0.5, "r": 0.5},
                            "n_grid": [30, 40], "s_grid": [1, 10, 30], "replicates": 3, "rng_seed": 5})");
  const auto study = run_phase_transition(c);
  ASSERT_EQ(study.cells.size(), 6u);
  double iter1 = 0.0, final_acc = 0.0;
  for (const auto& cell : study.cells) {
    iter1 += cell.iter1;
    final_acc += cell.final_accuracy;
    double total = 0.0;
    int count = 0;
    for (const auto& r : study.runs)
      if (r.n == cell.n && r.s == cell.s) {
        total += r.final_accuracy;
        ++count;
      }
    EXPECT_EQ(count, 3);
    EXPECT_NEAR(cell.final_accuracy, total / count, 1e-12);
  }
  EXPECT_LE(iter1, final_acc + 1e-12);
  const auto heat = parse_csv(study.output.file("heatmap.csv"));
  EXPECT_EQ(heat.rows.size(), 18u);
  for (const char* f : {"heatmap_iter1.svg", "heatmap_iter2.svg", "heatmap_final.svg"})
    EXPECT_NO_THROW(study.output.file(f));
}

TEST(Disagreement, RowsCarryBreakdowns) {
  WorkersEnv guard;
  const auto c = config(R"({"experiment": "disagreement",
                            "model": {"model": "sbm", "n": 60, "blocks": 3, "within_p": 0.5, "between_p": 0.1, "r": 0.5},
                            "delta_grid": [0, 12], "replicates": 3, "rng_seed": 2})");
  const auto study = run_disagreement(c);
  ASSERT_EQ(study.runs.size(), 6u);
  for (const auto& r : study.runs) {
    const auto n = static_cast<Index>(std::lround((1.0 - r.accuracy) * 60));
    EXPECT_EQ(r.errors.errors(), n);
    EXPECT_EQ(r.errors.within_sbm + r.errors.between_sbm, n);
    EXPECT_EQ(r.measured_disagreement, r.delta);
  }
  const auto rows = parse_csv(study.output.file("disagreement.csv"));
  for (const char* column : {"delta", "replicate", "accuracy", "perfect", "within_d0", "between_d0", "within_sbm", "between_sbm"})
    EXPECT_NO_THROW(rows.col(column)) << column;
  EXPECT_NO_THROW(study.output.file("disagreement_summary.csv"));
}

TEST(Expectation, IndependentGraphsAndSmallZ) {
  WorkersEnv guard;
  const auto c = config(R"({"experiment": "expectation_check",
                            "models": [{"model": "hom", "n": 8, "p": 0.4, "r": 0.0},
                                       {"model": "sbm", "n": 8, "blocks": [4, 4], "within_p": 0.6, "between_p": 0.2, "r": 0.5}],
                            "pairs": 4, "samples": 2000, "rng_seed": 3})");
  const auto study = run_expectation_check(c);
  ASSERT_EQ(study.rows.size(), 8u);
  EXPECT_LE(study.max_abs_z(), 4.5);
  // With r = 0 the covariance term vanishes.
  const auto params = hom_params(8, 0.4, 0.0);
  for (const auto& row : study.rows) {
    if (row.model != "hom") continue;
    Rng rng = make_rng(row.rng_seed);
    const auto p = random_permutation(8, rng);
    const auto q = random_permutation(8, rng);
    const Matrix l = params.lambda();
    EXPECT_NEAR(row.expected, (l * p.matrix() * l * q.matrix().transpose()).trace(), 1e-12);
  }
}

TEST(TwoStepStudy, FullTraceAlwaysSucceeds) {
  WorkersEnv guard;
  const auto c = config(R"({"experiment": "two_step_check", "model": {"model": "hom", "n": 60, "p": 0.5, "r": 0.5},
                            "trace_grid": [1, 60], "replicates": 3, "rng_seed": 4})");
  const auto study = run_two_step(c);
  EXPECT_EQ(study.rate(60).rate, 1.0);
  ASSERT_TRUE(study.thresholds.has_value());
  const auto summary = parse_csv(study.output.file("two_step_summary.csv"));
  EXPECT_EQ(summary.rows.size(), 2u);
  EXPECT_NEAR(identity_mixture(60, 17.5).trace(), 17.5, 1e-12);
  EXPECT_TRUE(validate_doubly_stochastic(identity_mixture(60, 17.5).matrix(), 1e-12));
}

TEST(RestartStudy, SummaryConsistent) {
  WorkersEnv guard;
  const auto c = config(R"({"experiment": "restart_probe", "model": {"model": "hom", "n": 30, "p": 0.5, "r": 0.9},
                            "restarts": 4, "replicates": 2, "rng_seed": 8})");
  const auto study = run_restart_probe(c);
  ASSERT_EQ(study.replicates.size(), 2u);
  for (const auto& r : study.replicates) {
    EXPECT_EQ(r.probe.runs.size(), 4u);
    if (r.identity_strictly_best) EXPECT_EQ(r.probe.runs.front().result.p_star, Permutation::identity(30));
  }
  EXPECT_EQ(parse_csv(study.output.file("restart.csv")).rows.size(), 8u);
}

TEST(Svg, LinePlots) {
  svg::LinePlot single{"one", "x", "y", {{"pt", {1.0}, {0.5}, true}}};
  const auto text = svg::render_line_plot(single);
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  EXPECT_NE(text.find("</svg>"), std::string::npos);
  EXPECT_NE(text.find("<circle"), std::string::npos);
  EXPECT_EQ(text, svg::render_line_plot(single));
  EXPECT_THROW(svg::render_line_plot(svg::LinePlot{"empty", "x", "y", {}}), std::invalid_argument);
  svg::LinePlot bad{"bad", "x", "y", {{"s", {1.0, 2.0}, {1.0}, true}}};
  EXPECT_THROW(svg::render_line_plot(bad), std::invalid_argument);
}

TEST(Svg, HeatmapCells) {
  svg::Heatmap map{"h", "s", "n", {1, 2}, {10, 20}, {{0.0, 0.5}, {1.0, 0.25}}};
  const auto text = svg::render_heatmap(map);
  std::size_t cells = 0;
  for (std::size_t pos = text.find("class=\"cell\""); pos != std::string::npos; pos = text.find("class=\"cell\"", pos + 1))
    ++cells;
  EXPECT_EQ(cells, 4u);
  EXPECT_EQ(text, svg::render_heatmap(map));
  map.values.pop_back();
  EXPECT_THROW(svg::render_heatmap(map), std::invalid_argument);
}

TEST(Outputs, WrittenToDisk) {
  ExperimentOutput out;
  out.add("a.csv", "x\n1\n");
  const auto dir = std::filesystem::temp_directory_path() / "gm_output_test";
  std::filesystem::remove_all(dir);
  write_outputs(out, dir);
  std::ifstream in(dir / "a.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "x\n1\n");
  std::filesystem::remove_all(dir);
  EXPECT_THROW(out.file("missing.csv"), std::out_of_range);
}
