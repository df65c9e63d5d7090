#pragma once

// JSON documents: model parameter files and serialized match results.

#include "gm/faq.hpp"
#include "gm/random_graphs.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace gm {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& doc, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!doc.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (const auto& item : doc.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
T get_or(const Json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Model parameter file: {"model": "hom"|"sbm"|"rdpg", "n", "p", "r",
/// "blocks", "within_p", "between_p", "rng_seed"}.
struct ModelSpec {
  enum class Kind { hom, sbm, rdpg };
  Kind kind = Kind::hom;
  Index n = 0;
  double p = 0.5;
  double r = 0.5;
  /// Block sizes for the SBM. A bare integer K in JSON means K equal blocks.
  std::vector<Index> blocks;
  double within_p = 0.5;
  double between_p = 0.1;
  std::uint64_t rng_seed = 0;

  std::string name() const {
    switch (kind) {
      case Kind::hom: return "hom";
      case Kind::sbm: return "sbm";
      case Kind::rdpg: return "rdpg";
    }
    return "?";
  }

  /// Copy with a different vertex count; equal SBM blocks are rescaled.
  ModelSpec with_size(Index new_n) const {
    ModelSpec out = *this;
    out.n = new_n;
    if (kind == Kind::sbm) {
      const Index k = static_cast<Index>(blocks.size());
      detail::require(new_n % k == 0, "block count must divide n");
      out.blocks.assign(static_cast<std::size_t>(k), new_n / k);
    }
    return out;
  }

  /// Builds the parameters. RDPG draws its latent positions from rng.
  CorrErParams params(Rng& rng) const {
    switch (kind) {
      case Kind::hom: return hom_params(n, p, r);
      case Kind::sbm: return sbm_params(blocks, within_p, between_p, r);
      case Kind::rdpg: return rdpg_params(sample_dirichlet_positions(n, rng), r);
    }
    throw std::logic_error("unknown model kind");
  }
};

inline ModelSpec parse_model_spec(const Json& doc) {
  detail::reject_unknown_keys(
      doc, {"model", "n", "p", "r", "blocks", "within_p", "between_p", "rng_seed"}, "model spec");
  ModelSpec spec;
  const auto model = doc.at("model").get<std::string>();
  if (model == "hom") {
    spec.kind = ModelSpec::Kind::hom;
  } else if (model == "sbm") {
    spec.kind = ModelSpec::Kind::sbm;
  } else if (model == "rdpg") {
    spec.kind = ModelSpec::Kind::rdpg;
  } else {
    throw std::invalid_argument("unknown model '" + model + "' (expected hom, sbm or rdpg)");
  }
  spec.n = detail::get_or<Index>(doc, "n", 0);
  spec.p = detail::get_or(doc, "p", spec.p);
  spec.r = detail::get_or(doc, "r", spec.r);
  spec.within_p = detail::get_or(doc, "within_p", spec.within_p);
  spec.between_p = detail::get_or(doc, "between_p", spec.between_p);
  spec.rng_seed = detail::get_or<std::uint64_t>(doc, "rng_seed", 0);
  if (doc.contains("blocks")) {
    const auto& blocks = doc.at("blocks");
    if (blocks.is_number_integer()) {
      const Index k = blocks.get<Index>();
      detail::require(k >= 1, "blocks must be positive");
      detail::require(spec.n > 0 && spec.n % k == 0, "blocks must divide n");
      spec.blocks.assign(static_cast<std::size_t>(k), spec.n / k);
    } else {
      spec.blocks = blocks.get<std::vector<Index>>();
    }
  }
  if (spec.kind == ModelSpec::Kind::sbm) {
    detail::require(!spec.blocks.empty(), "sbm model needs 'blocks'");
    Index total = 0;
    for (Index b : spec.blocks) {
      detail::require(b >= 1, "block sizes must be positive");
      total += b;
    }
    if (spec.n == 0) spec.n = total;
    detail::require(total == spec.n, "block sizes must sum to n");
  }
  detail::require(spec.n >= 1, "model spec needs a positive 'n'");
  return spec;
}

inline Json to_json(const ModelSpec& spec) {
  Json doc{{"model", spec.name()}, {"n", spec.n}, {"r", spec.r}, {"rng_seed", spec.rng_seed}};
  if (spec.kind == ModelSpec::Kind::hom) doc["p"] = spec.p;
  if (spec.kind == ModelSpec::Kind::sbm) {
    doc["blocks"] = spec.blocks;
    doc["within_p"] = spec.within_p;
    doc["between_p"] = spec.between_p;
  }
  return doc;
}

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

/// {"sigma", "accuracy", "objective", "iterations", "converged_at_permutation", "trajectory"}
inline Json to_json(const MatchResult& r) {
  Json traj = Json::array();
  for (const auto& rec : r.trajectory)
    traj.push_back({{"iter", rec.iter},
                    {"trace", rec.trace},
                    {"accuracy", rec.accuracy},
                    {"objective", rec.objective},
                    {"alpha", rec.alpha}});
  return Json{{"sigma", r.p_star.sigma()},
              {"accuracy", r.accuracy()},
              {"objective", r.final_objective},
              {"iterations", r.iterations},
              {"converged_at_permutation", r.converged_at_permutation},
              {"trajectory", std::move(traj)}};
}

}  // namespace gm
