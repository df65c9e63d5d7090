// gm: command-line front end.
//
//   gm match --graph-a A.edges --graph-b B.edges --init SPEC [--seeds-file F]
//            [--similarity S.csv] [--augment] [--hard-seeds K] --out result.json
//   gm experiment --config cfg.json [--out-dir DIR]
//   gm sample --config model.json --out-prefix P

#include "gm/gm.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

gm::AdjacencyMatrix load_graph(const std::string& path, gm::Index n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return gm::read_edge_list(in, n);
}

gm::Index max_vertex_count(const std::string& a, const std::string& b) {
  gm::Index n = 0;
  for (const auto& path : {a, b}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    n = std::max(n, gm::vertex_count(gm::parse_edge_list(in)));
  }
  return n;
}

std::uint64_t parse_seed(const std::string& spec, const std::string& prefix) {
  const std::string tail = spec.substr(prefix.size());
  std::size_t used = 0;
  const auto seed = std::stoull(tail, &used);
  if (used != tail.size()) throw std::invalid_argument("bad seed in init spec '" + spec + "'");
  return seed;
}

struct InitInputs {
  std::optional<gm::SeedSet> seeds;
  std::optional<gm::Matrix> similarity;
};

// barycenter | identity | blocks:S | seeds | sinkhorn | project |
// random-perm:SEED | random-sinkhorn:SEED
gm::DoublyStochasticMatrix make_start(const std::string& spec, gm::Index n, const InitInputs& in) {
  auto starts_with = [&](const char* p) { return spec.rfind(p, 0) == 0; };
  if (spec == "barycenter") return gm::barycenter(n);
  if (spec == "identity") return gm::DoublyStochasticMatrix(gm::Permutation::identity(n));
  if (starts_with("blocks:")) {
    return gm::block_diag_barycenter(n, static_cast<gm::Index>(parse_seed(spec, "blocks:")));
  }
  if (spec == "seeds") {
    if (!in.seeds) throw std::invalid_argument("init 'seeds' needs --seeds-file");
    return gm::soft_seed_one_to_one(n, *in.seeds);
  }
  if (spec == "sinkhorn" || spec == "project") {
    if (!in.similarity) throw std::invalid_argument("init '" + spec + "' needs --similarity");
    if (in.similarity->rows() != n || in.similarity->cols() != n)
      throw std::invalid_argument("similarity matrix must be n x n");
    if (spec == "sinkhorn") return gm::DoublyStochasticMatrix(gm::sinkhorn_knopp(*in.similarity).matrix);
    return gm::project_frobenius_to_ds(*in.similarity);
  }
  if (starts_with("random-perm:")) {
    auto rng = gm::make_rng(parse_seed(spec, "random-perm:"));
    return gm::random_doubly_stochastic(n, rng, gm::RandomDsMethod::permutation());
  }
  if (starts_with("random-sinkhorn:")) {
    auto rng = gm::make_rng(parse_seed(spec, "random-sinkhorn:"));
    return gm::random_doubly_stochastic(n, rng, gm::RandomDsMethod::sinkhorn_of_uniform());
  }
  throw std::invalid_argument("unknown init spec '" + spec + "'");
}

int run_match(const std::string& graph_a, const std::string& graph_b, const std::string& init,
              const std::string& seeds_file, const std::string& similarity_file, bool augment,
              gm::Index hard_seeds, gm::Index n_opt, const gm::FaqOptions& opts, const std::string& out) {
  const gm::Index n = n_opt > 0 ? n_opt : max_vertex_count(graph_a, graph_b);
  const auto a = load_graph(graph_a, n);
  const auto b = load_graph(graph_b, n);

  InitInputs inputs;
  if (!seeds_file.empty()) {
    std::ifstream in(seeds_file);
    if (!in) throw std::runtime_error("cannot open " + seeds_file);
    inputs.seeds = gm::read_seed_file(in);
  }
  if (!similarity_file.empty()) inputs.similarity = gm::read_csv_matrix(similarity_file);
  if (augment && !inputs.similarity) throw std::invalid_argument("--augment needs --similarity");
  if (augment && hard_seeds > 0)
    throw std::invalid_argument("--augment and --hard-seeds cannot be combined");

  gm::MatchResult result;
  if (hard_seeds > 0) {
    result = gm::faq_hard_seeded(a, b, hard_seeds, make_start(init, n - hard_seeds, inputs), opts);
  } else if (augment) {
    result = gm::faq_with_similarity(a, b, *inputs.similarity, make_start(init, n, inputs), opts);
  } else {
    result = gm::faq(a, b, make_start(init, n, inputs), opts);
  }

  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot write " + out);
  file << gm::to_json(result).dump(2) << '\n';
  std::cout << "n=" << n << " iterations=" << result.iterations
            << " objective=" << result.final_objective << " accuracy=" << result.accuracy() << '\n';
  return 0;
}

int run_experiment(const std::string& config_path, const std::string& out_dir) {
  const auto config = gm::load_experiment_config(config_path);
  const std::string dir = out_dir.empty() ? config.output_dir : out_dir;
  std::cout << "experiment " << gm::to_string(config.kind) << " (" << gm::effective_workers(config)
            << " workers)";
  if (!config.expected_runtime.empty()) std::cout << ", expected runtime " << config.expected_runtime;
  std::cout << std::endl;
  const auto start = std::chrono::steady_clock::now();
  const auto output = gm::run_experiment(config);
  gm::write_outputs(output, dir);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  for (const auto& f : output.files) std::cout << "  wrote " << dir << '/' << f.name << '\n';
  std::cout << "done in " << elapsed.count() << " s\n";
  return 0;
}

int run_sample(const std::string& config_path, const std::string& prefix) {
  const auto spec = gm::parse_model_spec(gm::load_json_file(config_path));
  auto rng = gm::make_rng(spec.rng_seed);
  const auto pair = gm::sample_corr_er(spec.params(rng), rng);
  for (const auto& [suffix, graph] : {std::pair{"_a.edges", &pair.a}, std::pair{"_b.edges", &pair.b}}) {
    const std::string path = prefix + suffix;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# " << spec.name() << " n=" << spec.n << " rng_seed=" << spec.rng_seed << '\n';
    gm::write_edge_list(out, *graph);
    std::cout << "wrote " << path << " (" << graph->edge_count() << " edges)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded graph matching with FAQ"};
  app.require_subcommand(1);

  auto* match = app.add_subcommand("match", "Match two graphs given as edge lists");
  std::string graph_a, graph_b, init = "barycenter", seeds_file, similarity_file, out;
  bool augment = false;
  gm::Index hard_seeds = 0;
  gm::Index n = 0;
  gm::FaqOptions opts;
  match->add_option("--graph-a", graph_a, "Edge list of the first graph")->required();
  match->add_option("--graph-b", graph_b, "Edge list of the second graph")->required();
  match->add_option("--init", init,
                    "Start: barycenter, identity, blocks:S, seeds, sinkhorn, project, "
                    "random-perm:SEED, random-sinkhorn:SEED")
      ->capture_default_str();
  match->add_option("--seeds-file", seeds_file, "Seed pairs 'i j' per line");
  match->add_option("--similarity", similarity_file, "n x n similarity matrix as CSV");
  match->add_flag("--augment", augment, "Add trace(S P) to the objective");
  match->add_option("--hard-seeds", hard_seeds, "Treat vertices 0..K-1 as fixed seeds");
  match->add_option("--n", n, "Vertex count (default: largest index in either file + 1)");
  match->add_option("--max-iter", opts.max_iter)->capture_default_str();
  match->add_option("--obj-tol", opts.obj_tol)->capture_default_str();
  match->add_option("--d-tol", opts.d_tol)->capture_default_str();
  match->add_option("--out", out, "Result JSON")->required();

  auto* experiment = app.add_subcommand("experiment", "Run a configured simulation study");
  std::string config_path, out_dir;
  experiment->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  experiment->add_option("--out-dir", out_dir, "Output directory (default: config output_dir)");

  auto* sample = app.add_subcommand("sample", "Sample a correlated graph pair");
  std::string model_path, prefix;
  sample->add_option("--config", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("--out-prefix", prefix, "Writes PREFIX_a.edges and PREFIX_b.edges")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*match)
      return run_match(graph_a, graph_b, init, seeds_file, similarity_file, augment, hard_seeds, n,
                       opts, out);
    if (*experiment) return run_experiment(config_path, out_dir);
    if (*sample) return run_sample(model_path, prefix);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
