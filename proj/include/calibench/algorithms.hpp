#pragma once

// Uniform entry point over the four discovery algorithms: one id, one flat
// parameter record (defaults pinned here and echoed into every manifest),
// one mixed-graph result. LiNGAM and the continuous optimizer receive
// standardized numeric input; the constraint-based algorithms see the data
// as-is and dispatch their CI test on column kinds.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibench/dataset.hpp"
#include "calibench/discovery/fci.hpp"
#include "calibench/discovery/lingam.hpp"
#include "calibench/discovery/notears.hpp"
#include "calibench/discovery/pc.hpp"
#include "calibench/graphs.hpp"

namespace calibench::algorithms {

enum class AlgorithmId { Pc, Fci, Lingam, Notears };

inline const char* algorithm_key(AlgorithmId a) {
  switch (a) {
    case AlgorithmId::Pc: return "pc";
    case AlgorithmId::Fci: return "fci";
    case AlgorithmId::Lingam: return "lingam";
    case AlgorithmId::Notears: return "notears";
  }
  throw std::logic_error("algorithm_key: bad id");
}

// Display name used in prompts.
inline const char* algorithm_name(AlgorithmId a) {
  switch (a) {
    case AlgorithmId::Pc: return "PC";
    case AlgorithmId::Fci: return "FCI";
    case AlgorithmId::Lingam: return "LiNGAM";
    case AlgorithmId::Notears: return "NOTEARS";
  }
  throw std::logic_error("algorithm_name: bad id");
}

inline AlgorithmId algorithm_from_key(const std::string& s) {
  if (s == "pc") return AlgorithmId::Pc;
  if (s == "fci") return AlgorithmId::Fci;
  if (s == "lingam") return AlgorithmId::Lingam;
  if (s == "notears") return AlgorithmId::Notears;
  throw std::invalid_argument("unknown algorithm id: " + s);
}

inline const std::vector<AlgorithmId>& all_algorithms() {
  static const std::vector<AlgorithmId> kAll{AlgorithmId::Pc, AlgorithmId::Fci,
                                             AlgorithmId::Lingam, AlgorithmId::Notears};
  return kAll;
}

struct AlgoParams {
  double alpha = 0.05;             // PC / FCI test level
  double lambda1 = 0.1;            // NOTEARS l1 weight
  double w_threshold = 0.3;        // NOTEARS edge threshold
  double h_tol = 1e-8;             // NOTEARS acyclicity tolerance
  double rho_max = 1e16;           // NOTEARS penalty cap
  double prune_threshold = 0.05;   // LiNGAM coefficient prune
  double fastica_tol = 1e-6;
  int fastica_max_iter = 200;

  nlohmann::json to_json() const {
    return {{"alpha", alpha},
            {"lambda1", lambda1},
            {"w_threshold", w_threshold},
            {"h_tol", h_tol},
            {"rho_max", rho_max},
            {"prune_threshold", prune_threshold},
            {"fastica_tol", fastica_tol},
            {"fastica_max_iter", fastica_max_iter}};
  }

  // Flat key-value section; unknown keys are rejected so config typos fail
  // loudly instead of silently running defaults.
  static AlgoParams from_json(const nlohmann::json& j) {
    AlgoParams p;
    for (const auto& [key, value] : j.items()) {
      if (key == "alpha") p.alpha = value.get<double>();
      else if (key == "lambda1") p.lambda1 = value.get<double>();
      else if (key == "w_threshold") p.w_threshold = value.get<double>();
      else if (key == "h_tol") p.h_tol = value.get<double>();
      else if (key == "rho_max") p.rho_max = value.get<double>();
      else if (key == "prune_threshold") p.prune_threshold = value.get<double>();
      else if (key == "fastica_tol") p.fastica_tol = value.get<double>();
      else if (key == "fastica_max_iter") p.fastica_max_iter = value.get<int>();
      else throw std::invalid_argument("unknown algorithm parameter: " + key);
    }
    return p;
  }
};

inline graphs::MixedGraph run_algorithm(AlgorithmId algo, const data::Dataset& ds,
                                        const AlgoParams& params, std::uint64_t seed) {
  switch (algo) {
    case AlgorithmId::Pc:
      return discovery::pc(ds, params.alpha).graph;
    case AlgorithmId::Fci:
      return discovery::fci(ds, params.alpha);
    case AlgorithmId::Lingam: {
      // lingam standardizes internally; integer-coded discrete data passes
      // through as numeric.
      return discovery::lingam(ds, seed, params.prune_threshold).support();
    }
    case AlgorithmId::Notears: {
      discovery::NotearsOptions opt;
      opt.lambda1 = params.lambda1;
      opt.w_threshold = params.w_threshold;
      opt.h_tol = params.h_tol;
      opt.rho_max = params.rho_max;
      return discovery::notears(data::standardize(ds), seed, opt).dag.support();
    }
  }
  throw std::logic_error("run_algorithm: bad id");
}

}  // namespace calibench::algorithms
