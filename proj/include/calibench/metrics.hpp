#pragma once

// Edge-recovery metrics and the bootstrap ground-truth distribution for one
// (dataset, algorithm) condition. Precision/recall/F1 compare edge sets
// (skeleton mode by default: unordered adjacencies; directed mode: strictly
// oriented predicted edges against true ordered pairs); SHD is always the
// direction-aware graph distance.

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibench/algorithms.hpp"
#include "calibench/dataset.hpp"
#include "calibench/graphs.hpp"
#include "calibench/rng.hpp"
#include "calibench/stats.hpp"

namespace calibench::metrics {

enum class MetricName { Precision, Recall, F1, Shd };

inline const char* metric_key(MetricName m) {
  switch (m) {
    case MetricName::Precision: return "Precision";
    case MetricName::Recall: return "Recall";
    case MetricName::F1: return "F1";
    case MetricName::Shd: return "SHD";
  }
  throw std::logic_error("metric_key: bad metric");
}

inline MetricName metric_from_key(const std::string& s) {
  if (s == "Precision") return MetricName::Precision;
  if (s == "Recall") return MetricName::Recall;
  if (s == "F1") return MetricName::F1;
  if (s == "SHD") return MetricName::Shd;
  throw std::invalid_argument("unknown metric: " + s);
}

inline const std::vector<MetricName>& all_metrics() {
  static const std::vector<MetricName> kAll{MetricName::Precision, MetricName::Recall,
                                            MetricName::F1, MetricName::Shd};
  return kAll;
}

enum class MetricMode { Skeleton, Directed };

struct MetricValues {
  double precision;
  double recall;
  double f1;
  double shd;

  double get(MetricName m) const {
    switch (m) {
      case MetricName::Precision: return precision;
      case MetricName::Recall: return recall;
      case MetricName::F1: return f1;
      case MetricName::Shd: return shd;
    }
    throw std::logic_error("MetricValues::get: bad metric");
  }
};

// Empty-set conventions: precision of an empty prediction is 0 against a
// nonempty truth and 1 when both are empty; recall mirrors that; F1 is 0
// whenever precision + recall is 0.
inline MetricValues edge_metrics(const graphs::MixedGraph& pred, const graphs::Dag& truth,
                                 MetricMode mode = MetricMode::Skeleton) {
  if (pred.node_count() != truth.node_count())
    throw std::invalid_argument("edge_metrics: node-count mismatch");

  std::size_t n_pred = 0, n_truth = 0, n_hit = 0;
  if (mode == MetricMode::Skeleton) {
    std::set<std::pair<int, int>> p = graphs::skeleton(pred);
    std::set<std::pair<int, int>> t;
    for (auto [i, j] : truth.edges()) t.insert({std::min(i, j), std::max(i, j)});
    n_pred = p.size();
    n_truth = t.size();
    for (const auto& e : p) n_hit += t.contains(e);
  } else {
    std::set<std::pair<int, int>> p;
    int d = pred.node_count();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j && pred.is_directed(i, j)) p.insert({i, j});
    n_pred = p.size();
    n_truth = truth.edges().size();
    for (const auto& e : p) n_hit += truth.edges().contains(e);
  }

  double precision = n_pred > 0 ? static_cast<double>(n_hit) / static_cast<double>(n_pred)
                                : (n_truth == 0 ? 1.0 : 0.0);
  double recall = n_truth > 0 ? static_cast<double>(n_hit) / static_cast<double>(n_truth)
                              : (n_pred == 0 ? 1.0 : 0.0);
  double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return {precision, recall, f1, static_cast<double>(graphs::shd(pred, truth))};
}

// Central percentile interval with linear interpolation between order
// statistics (level 0.95 -> 2.5th and 97.5th percentiles).
inline std::pair<double, double> percentile_ci(const std::vector<double>& values,
                                               double level = 0.95) {
  if (values.size() < 2) throw std::domain_error("percentile_ci: need at least 2 values");
  if (level <= 0.0 || level >= 1.0) throw std::domain_error("percentile_ci: level outside (0,1)");
  double tail = (1.0 - level) / 2.0;
  return {stats::percentile(values, tail), stats::percentile(values, 1.0 - tail)};
}

struct MetricSummary {
  std::vector<double> values;
  double mean;
  double ci_low;
  double ci_high;
};

struct GroundTruth {
  std::string dataset;
  std::string algorithm;
  int runs = 0;
  std::map<MetricName, MetricSummary> metrics;
  nlohmann::json manifest;
};

class ConditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bootstrap distribution of one algorithm on one dataset: `runs` resamples
// with per-run seeds derived from base_seed, each scored against the fixed
// truth. Individual run failures are recorded and excluded; more than 20%
// failures abort the condition.
inline GroundTruth ground_truth_condition(const data::Dataset& ds, const graphs::Dag& truth,
                                          algorithms::AlgorithmId algo,
                                          const algorithms::AlgoParams& params, int runs,
                                          std::uint64_t base_seed,
                                          MetricMode mode = MetricMode::Skeleton) {
  if (runs < 2) throw std::invalid_argument("ground_truth_condition: need runs >= 2");

  GroundTruth out;
  out.dataset = "";
  out.algorithm = algorithms::algorithm_key(algo);

  std::map<MetricName, std::vector<double>> samples;
  std::vector<std::uint64_t> run_seeds;
  std::vector<std::string> failures;
  for (int r = 0; r < runs; ++r) {
    std::uint64_t run_seed = rng::derive_seed(base_seed, "run", static_cast<std::uint64_t>(r));
    run_seeds.push_back(run_seed);
    try {
      data::Dataset resampled = data::bootstrap_resample(ds, run_seed);
      graphs::MixedGraph pred = algorithms::run_algorithm(algo, resampled, params, run_seed);
      MetricValues v = edge_metrics(pred, truth, mode);
      for (MetricName m : all_metrics()) samples[m].push_back(v.get(m));
    } catch (const ConditionError&) {
      throw;
    } catch (const std::exception& e) {
      failures.push_back("run " + std::to_string(r) + ": " + e.what());
    }
  }

  if (static_cast<double>(failures.size()) > 0.2 * static_cast<double>(runs)) {
    std::string diag = "condition failed: " + std::to_string(failures.size()) + "/" +
                       std::to_string(runs) + " runs failed";
    for (const auto& f : failures) diag += "; " + f;
    throw ConditionError(diag);
  }

  out.runs = runs - static_cast<int>(failures.size());
  for (MetricName m : all_metrics()) {
    MetricSummary s;
    s.values = samples[m];
    s.mean = stats::mean(s.values);
    auto [lo, hi] = percentile_ci(s.values);
    s.ci_low = lo;
    s.ci_high = hi;
    out.metrics[m] = std::move(s);
  }

  nlohmann::json seeds = nlohmann::json::array();
  for (auto s : run_seeds) seeds.push_back(s);
  out.manifest = {{"base_seed", base_seed},
                  {"run_seeds", seeds},
                  {"params", params.to_json()},
                  {"metric_mode", mode == MetricMode::Skeleton ? "skeleton" : "directed"},
                  {"failed_runs", failures}};
  return out;
}

inline nlohmann::json to_json(const GroundTruth& gt) {
  nlohmann::json metrics;
  for (const auto& [name, s] : gt.metrics) {
    metrics[metric_key(name)] = {{"values", s.values},
                                 {"mean", s.mean},
                                 {"ci_low", s.ci_low},
                                 {"ci_high", s.ci_high}};
  }
  return {{"dataset", gt.dataset},
          {"algorithm", gt.algorithm},
          {"runs", gt.runs},
          {"metrics", metrics},
          {"manifest", gt.manifest}};
}

inline GroundTruth ground_truth_from_json(const nlohmann::json& j) {
  GroundTruth gt;
  gt.dataset = j.at("dataset").get<std::string>();
  gt.algorithm = j.at("algorithm").get<std::string>();
  gt.runs = j.at("runs").get<int>();
  for (const auto& [key, value] : j.at("metrics").items()) {
    MetricSummary s;
    s.values = value.at("values").get<std::vector<double>>();
    s.mean = value.at("mean").get<double>();
    s.ci_low = value.at("ci_low").get<double>();
    s.ci_high = value.at("ci_high").get<double>();
    gt.metrics[metric_from_key(key)] = std::move(s);
  }
  if (j.contains("manifest")) gt.manifest = j.at("manifest");
  return gt;
}

}  // namespace calibench::metrics
