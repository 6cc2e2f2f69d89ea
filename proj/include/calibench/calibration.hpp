#pragma once

// Scoring of predicted ranges against bootstrap ground truth: per-cell
// coverage indicators and their marginals, the random and leave-one-out
// baselines, prompt-sensitivity (CV%), range-width and cross-model agreement
// probes, and the two significance tests the reports quote.
//
// Two definitions here are local conventions rather than received formulas
// and are documented as such: the pairwise range distance
// (|dlow| + |dhigh|)/2 with overlap-based agreement %, and the per-cell mean
// score 1 - min(1, miss distance / domain width).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibench/graphs.hpp"
#include "calibench/metrics.hpp"
#include "calibench/predictions.hpp"
#include "calibench/rng.hpp"
#include "calibench/stats.hpp"

namespace calibench::calibration {

// What the report layer needs to know about a dataset beyond its id.
struct DatasetInfo {
  std::string id;
  int n_nodes = 0;
  bool synthetic = false;  // false = established benchmark network
};

using DatasetRegistry = std::map<std::string, DatasetInfo>;

// One model's formulation-averaged ranges for one condition.
struct AggregatedPrediction {
  std::string model;
  std::string dataset;
  std::string algorithm;
  predictions::RangeSet ranges;
};

inline int coverage_indicator(double true_mean, const predictions::PredictedRange& r) {
  if (r.low > r.high) throw std::invalid_argument("coverage_indicator: inverted range");
  return (r.low <= true_mean && true_mean <= r.high) ? 1 : 0;
}

// 1 when covered, otherwise 1 minus the normalized distance from the mean to
// the nearest bound, floored at 0. Partial credit for near misses.
inline double cell_score(double true_mean, const predictions::PredictedRange& r,
                         double domain_width) {
  if (domain_width <= 0.0) throw std::invalid_argument("cell_score: domain width must be positive");
  if (coverage_indicator(true_mean, r)) return 1.0;
  double dist = std::max(r.low - true_mean, true_mean - r.high);
  return 1.0 - std::min(1.0, dist / domain_width);
}

struct CoverageCell {
  std::string model;
  std::string dataset;
  std::string algorithm;
  metrics::MetricName metric = metrics::MetricName::Precision;
  double true_mean = 0.0;
  predictions::PredictedRange range;
  int covered = 0;
  double score = 0.0;
};

class MissingCellsError : public std::runtime_error {
 public:
  MissingCellsError(const std::string& what, std::vector<std::string> gaps)
      : std::runtime_error(what), missing(std::move(gaps)) {}
  std::vector<std::string> missing;
};

struct CoverageReport {
  std::vector<CoverageCell> cells;
  double overall = 0.0;  // mean of all cell indicators
  std::map<std::string, double> by_model;
  std::map<std::string, double> by_dataset;
  std::map<std::string, double> by_algorithm;
  std::map<std::string, double> by_metric;  // keyed by metric name
  std::map<std::string, std::map<std::string, double>> by_algorithm_metric;
  std::map<std::string, double> mean_score_by_model;
  double benchmark_coverage = 0.0;
  double synthetic_coverage = 0.0;
  std::map<std::string, double> synthetic_boost_by_algorithm;  // synthetic - benchmark
  std::map<int, double> coverage_by_node_count;                // synthetic sizes only
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : stats::mean(v);
}

struct Tally {
  double sum = 0.0;
  int n = 0;
  void add(double x) {
    sum += x;
    ++n;
  }
  double mean() const { return n == 0 ? 0.0 : sum / n; }
};

}  // namespace detail

// Builds every (model, condition, metric) cell and all marginals. The grid
// must be complete: conditions come from the ground truths, models from the
// predictions, and every combination needs a prediction and a registry entry.
inline CoverageReport coverage_report(const std::vector<AggregatedPrediction>& preds,
                                      const std::vector<metrics::GroundTruth>& truths,
                                      const DatasetRegistry& registry) {
  std::set<std::string> models;
  std::map<std::string, const predictions::RangeSet*> by_key;
  for (const auto& p : preds) {
    models.insert(p.model);
    by_key[p.model + "|" + p.dataset + "|" + p.algorithm] = &p.ranges;
  }

  CoverageReport rep;
  std::vector<std::string> gaps;
  detail::Tally overall, bench, synth;
  std::map<std::string, detail::Tally> t_model, t_dataset, t_algo, t_metric, t_score;
  std::map<std::string, std::map<std::string, detail::Tally>> t_algo_metric;
  std::map<std::string, detail::Tally> t_boost_bench, t_boost_synth;
  std::map<int, detail::Tally> t_size;

  for (const auto& gt : truths) {
    auto reg_it = registry.find(gt.dataset);
    if (reg_it == registry.end()) {
      gaps.push_back("dataset " + gt.dataset + " missing from registry");
      continue;
    }
    const DatasetInfo& info = reg_it->second;
    double shd_width = static_cast<double>(graphs::max_shd(info.n_nodes));

    for (const auto& model : models) {
      auto it = by_key.find(model + "|" + gt.dataset + "|" + gt.algorithm);
      if (it == by_key.end()) {
        gaps.push_back("model=" + model + " dataset=" + gt.dataset +
                       " algorithm=" + gt.algorithm);
        continue;
      }
      int idx = 0;
      for (auto m : metrics::all_metrics()) {
        const auto& range = (*it->second)[idx++];
        double mu = gt.metrics.at(m).mean;
        double width = (m == metrics::MetricName::Shd) ? shd_width : 1.0;
        CoverageCell cell{model,
                          gt.dataset,
                          gt.algorithm,
                          m,
                          mu,
                          range,
                          coverage_indicator(mu, range),
                          cell_score(mu, range, width)};
        double c = cell.covered;
        overall.add(c);
        t_model[model].add(c);
        t_dataset[gt.dataset].add(c);
        t_algo[gt.algorithm].add(c);
        t_metric[metrics::metric_key(m)].add(c);
        t_algo_metric[gt.algorithm][metrics::metric_key(m)].add(c);
        t_score[model].add(cell.score);
        (info.synthetic ? synth : bench).add(c);
        (info.synthetic ? t_boost_synth : t_boost_bench)[gt.algorithm].add(c);
        if (info.synthetic) t_size[info.n_nodes].add(c);
        rep.cells.push_back(std::move(cell));
      }
    }
  }
  if (!gaps.empty()) {
    std::string msg = "coverage_report: " + std::to_string(gaps.size()) + " missing cell group(s):";
    for (const auto& g : gaps) msg += "\n  " + g;
    throw MissingCellsError(msg, std::move(gaps));
  }
  if (rep.cells.empty()) throw std::invalid_argument("coverage_report: no cells");

  rep.overall = overall.mean();
  for (auto& [k, t] : t_model) rep.by_model[k] = t.mean();
  for (auto& [k, t] : t_dataset) rep.by_dataset[k] = t.mean();
  for (auto& [k, t] : t_algo) rep.by_algorithm[k] = t.mean();
  for (auto& [k, t] : t_metric) rep.by_metric[k] = t.mean();
  for (auto& [a, inner] : t_algo_metric)
    for (auto& [m, t] : inner) rep.by_algorithm_metric[a][m] = t.mean();
  for (auto& [k, t] : t_score) rep.mean_score_by_model[k] = t.mean();
  rep.benchmark_coverage = bench.mean();
  rep.synthetic_coverage = synth.mean();
  for (auto& [a, ts] : t_boost_synth)
    if (auto it = t_boost_bench.find(a); it != t_boost_bench.end())
      rep.synthetic_boost_by_algorithm[a] = ts.mean() - it->second.mean();
  for (auto& [size, t] : t_size) rep.coverage_by_node_count[size] = t.mean();
  return rep;
}

// Two i.i.d. uniforms on the metric's domain, sorted. The chance such a range
// covers a target at normalized position u is 2u(1-u).
inline predictions::PredictedRange random_baseline_range(metrics::MetricName m, double a, double b,
                                                         std::uint64_t seed) {
  if (!(a < b)) throw std::invalid_argument("random_baseline_range: need a < b");
  rng::Stream rs(seed, "random-baseline");
  double u = rs.uniform(a, b);
  double v = rs.uniform(a, b);
  return {m, std::min(u, v), std::max(u, v)};
}

// Center = leave-one-out mean over the other datasets for the same
// algorithm; half-width = 3x their mean bootstrap CI half-width; clamped to
// the metric domain.
inline predictions::PredictedRange heuristic_baseline_range(
    metrics::MetricName m, const std::string& algorithm, const std::string& dataset,
    const std::vector<metrics::GroundTruth>& corpus,
    predictions::MetricDomain domain = {0.0, std::numeric_limits<double>::infinity()}) {
  std::vector<double> means, half_widths;
  std::set<std::string> corpus_datasets;
  for (const auto& gt : corpus) {
    if (gt.algorithm != algorithm) continue;
    corpus_datasets.insert(gt.dataset);
    if (gt.dataset == dataset) continue;
    const auto& s = gt.metrics.at(m);
    means.push_back(s.mean);
    half_widths.push_back((s.ci_high - s.ci_low) / 2.0);
  }
  if (corpus_datasets.size() < 2 || means.empty())
    throw std::invalid_argument("heuristic_baseline_range: corpus needs at least two datasets");
  double center = stats::mean(means);
  double hw = 3.0 * stats::mean(half_widths);
  if (m != metrics::MetricName::Shd) domain = {0.0, 1.0};
  return {m, std::max(domain.low, center - hw), std::min(domain.high, center + hw)};
}

struct CvResult {
  bool defined = false;
  double value = 0.0;  // percent
};

// Population sigma over mean, times 100. Zero mean is reported as undefined
// rather than thrown: it happens on real model output.
inline CvResult cv_percent(double x1, double x2, double x3) {
  double xbar = (x1 + x2 + x3) / 3.0;
  if (xbar == 0.0) return {false, 0.0};
  double var = ((x1 - xbar) * (x1 - xbar) + (x2 - xbar) * (x2 - xbar) + (x3 - xbar) * (x3 - xbar)) / 3.0;
  return {true, std::sqrt(var) / xbar * 100.0};
}

struct WidthStats {
  std::map<std::string, double> benchmark_width;  // per model, mean over cells
  std::map<std::string, double> synthetic_width;
  std::map<std::string, double> ratio;        // benchmark / synthetic
  std::map<int, double> width_by_node_count;  // synthetic, pooled over models
};

// Mean predicted range widths split by dataset provenance. All four metrics
// pool into one mean per model, matching the report tables.
inline WidthStats range_width_stats(const std::vector<AggregatedPrediction>& preds,
                                    const DatasetRegistry& registry) {
  std::map<std::string, detail::Tally> bench, synth;
  std::map<int, detail::Tally> by_size;
  for (const auto& p : preds) {
    auto it = registry.find(p.dataset);
    if (it == registry.end())
      throw std::invalid_argument("range_width_stats: unknown dataset " + p.dataset);
    for (const auto& r : p.ranges) {
      double w = r.high - r.low;
      (it->second.synthetic ? synth : bench)[p.model].add(w);
      if (it->second.synthetic) by_size[it->second.n_nodes].add(w);
    }
  }
  WidthStats out;
  for (auto& [model, t] : bench) out.benchmark_width[model] = t.mean();
  for (auto& [model, t] : synth) out.synthetic_width[model] = t.mean();
  for (auto& [model, bw] : out.benchmark_width) {
    auto it = out.synthetic_width.find(model);
    if (it == out.synthetic_width.end() || bench.at(model).n == 0)
      throw std::domain_error("range_width_stats: model " + model + " missing a partition");
    if (it->second == 0.0)
      throw std::domain_error("range_width_stats: zero synthetic width for model " + model);
    out.ratio[model] = bw / it->second;
  }
  for (auto& [model, t] : synth)
    if (!out.benchmark_width.count(model))
      throw std::domain_error("range_width_stats: model " + model + " missing a partition");
  if (out.benchmark_width.empty() || out.synthetic_width.empty())
    throw std::domain_error("range_width_stats: empty benchmark or synthetic partition");
  for (auto& [size, t] : by_size) out.width_by_node_count[size] = t.mean();
  return out;
}

struct Agreement {
  double mean_distance = 0.0;
  double agreement_pct = 0.0;  // share of pairs whose intervals intersect
};

// Distance between two ranges is (|dlow| + |dhigh|)/2; agreement is interval
// overlap. Local convention, symmetric and scale-covariant.
inline Agreement cross_model_agreement(const std::vector<predictions::PredictedRange>& ranges) {
  std::size_t k = ranges.size();
  if (k < 2) throw std::invalid_argument("cross_model_agreement: need at least two models");
  double dist = 0.0;
  int overlap = 0, pairs = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      dist += (std::abs(ranges[i].low - ranges[j].low) +
               std::abs(ranges[i].high - ranges[j].high)) /
              2.0;
      if (ranges[i].low <= ranges[j].high && ranges[j].low <= ranges[i].high) ++overlap;
      ++pairs;
    }
  }
  return {dist / pairs, 100.0 * overlap / pairs};
}

struct AgreementStats {
  std::map<std::string, Agreement> by_dataset;  // averaged over algorithm x metric groups
  double benchmark_mean_distance = 0.0;
  double synthetic_mean_distance = 0.0;
  std::map<int, double> distance_by_node_count;  // synthetic sizes
};

// Groups predictions by (dataset, algorithm, metric), computes pairwise
// stats across models within each group, then averages groups per dataset
// and per provenance split.
inline AgreementStats agreement_stats(const std::vector<AggregatedPrediction>& preds,
                                      const DatasetRegistry& registry) {
  std::map<std::string, std::vector<predictions::PredictedRange>> groups;
  std::map<std::string, std::string> group_dataset;
  for (const auto& p : preds) {
    int idx = 0;
    for (auto m : metrics::all_metrics()) {
      std::string key = p.dataset + "|" + p.algorithm + "|" + metrics::metric_key(m);
      groups[key].push_back(p.ranges[idx++]);
      group_dataset[key] = p.dataset;
    }
  }
  std::map<std::string, detail::Tally> d_dist, d_agree;
  detail::Tally bench_dist, synth_dist;
  std::map<int, detail::Tally> size_dist;
  for (auto& [key, ranges] : groups) {
    Agreement a = cross_model_agreement(ranges);
    const std::string& ds = group_dataset[key];
    auto it = registry.find(ds);
    if (it == registry.end()) throw std::invalid_argument("agreement_stats: unknown dataset " + ds);
    d_dist[ds].add(a.mean_distance);
    d_agree[ds].add(a.agreement_pct);
    (it->second.synthetic ? synth_dist : bench_dist).add(a.mean_distance);
    if (it->second.synthetic) size_dist[it->second.n_nodes].add(a.mean_distance);
  }
  AgreementStats out;
  for (auto& [ds, t] : d_dist) out.by_dataset[ds] = {t.mean(), d_agree[ds].mean()};
  out.benchmark_mean_distance = bench_dist.mean();
  out.synthetic_mean_distance = synth_dist.mean();
  for (auto& [size, t] : size_dist) out.distance_by_node_count[size] = t.mean();
  return out;
}

// Per-model width behavior plus cross-model agreement plus the per-algorithm
// synthetic/benchmark coverage gap, bundled for the report layer.
struct ProbeStats {
  WidthStats widths;
  AgreementStats agreement;
  std::map<std::string, double> synthetic_boost_by_algorithm;
};

inline ProbeStats probe_stats(const std::vector<AggregatedPrediction>& preds,
                              const CoverageReport& report, const DatasetRegistry& registry) {
  return {range_width_stats(preds, registry), agreement_stats(preds, registry),
          report.synthetic_boost_by_algorithm};
}

struct BinomialTest {
  double z = 0.0;
  double p = 1.0;
};

// One-sample z test of an observed success rate against a null rate. The
// standard error uses the observed rate (clamped away from 0 and 1 so k = 0
// and k = n stay finite); an exact null match returns z = 0 regardless.
inline BinomialTest binomial_test(int k, int n, double p0) {
  if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("binomial_test: bad counts");
  if (!(p0 > 0.0 && p0 < 1.0)) throw std::invalid_argument("binomial_test: degenerate null rate");
  double phat = static_cast<double>(k) / n;
  if (phat == p0) return {0.0, 1.0};
  double pse = std::clamp(phat, 0.5 / n, 1.0 - 0.5 / n);
  double se = std::sqrt(pse * (1.0 - pse) / n);
  double z = (phat - p0) / se;
  return {z, stats::normal_two_sided_p(z)};
}

struct AlgoComparison {
  std::string a;
  std::string b;
  double mean_diff = 0.0;  // mean(a) - mean(b)
  double t = 0.0;
  double df = 0.0;
  double p_corrected = 1.0;  // two-sided p times the number of pairs, capped at 1
  double cohen_d = 0.0;      // pooled-SD effect size
  bool significant = false;
  bool degenerate = false;  // both groups had zero variance
};

// Welch t tests over all unordered algorithm pairs with Bonferroni
// correction across the pairs. Values are per-dataset metric means.
inline std::vector<AlgoComparison> pairwise_welch_bonferroni(
    const std::map<std::string, std::vector<double>>& groups) {
  if (groups.size() < 2)
    throw std::invalid_argument("pairwise_welch_bonferroni: need at least two algorithms");
  for (const auto& [name, v] : groups)
    if (v.size() < 2)
      throw std::invalid_argument("pairwise_welch_bonferroni: group " + name +
                                  " needs at least two datasets");
  std::vector<std::string> names;
  for (const auto& [name, v] : groups) names.push_back(name);
  double n_pairs = static_cast<double>(names.size() * (names.size() - 1)) / 2.0;

  std::vector<AlgoComparison> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      const auto& xa = groups.at(names[i]);
      const auto& xb = groups.at(names[j]);
      double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
      double ma = stats::mean(xa), mb = stats::mean(xb);
      double va = stats::sample_variance(xa), vb = stats::sample_variance(xb);

      AlgoComparison cmp;
      cmp.a = names[i];
      cmp.b = names[j];
      cmp.mean_diff = ma - mb;
      if (va == 0.0 && vb == 0.0) {
        cmp.degenerate = true;
        if (ma == mb) {
          cmp.t = 0.0;
          cmp.df = na + nb - 2.0;
          cmp.p_corrected = 1.0;
          cmp.cohen_d = 0.0;
        } else {
          cmp.t = std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
          cmp.df = na + nb - 2.0;
          cmp.p_corrected = 0.0;
          cmp.cohen_d = std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
          cmp.significant = true;
        }
        out.push_back(cmp);
        continue;
      }
      double sea = va / na, seb = vb / nb;
      cmp.t = (ma - mb) / std::sqrt(sea + seb);
      cmp.df = (sea + seb) * (sea + seb) /
               (sea * sea / (na - 1.0) + seb * seb / (nb - 1.0));
      double p = stats::student_t_two_sided_p(cmp.t, cmp.df);
      cmp.p_corrected = std::min(1.0, p * n_pairs);
      double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
      cmp.cohen_d = pooled == 0.0
                        ? std::copysign(std::numeric_limits<double>::infinity(), ma - mb)
                        : (ma - mb) / pooled;
      cmp.significant = cmp.p_corrected < 0.05;
      out.push_back(cmp);
    }
  }
  return out;
}

inline nlohmann::json to_json(const CoverageReport& rep) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : rep.cells)
    cells.push_back({{"model", c.model},
                     {"dataset", c.dataset},
                     {"algorithm", c.algorithm},
                     {"metric", metrics::metric_key(c.metric)},
                     {"true_mean", c.true_mean},
                     {"low", c.range.low},
                     {"high", c.range.high},
                     {"covered", c.covered},
                     {"score", c.score}});
  nlohmann::json size_curve = nlohmann::json::object();
  for (auto& [k, v] : rep.coverage_by_node_count) size_curve[std::to_string(k)] = v;
  return {{"cells", cells},
          {"overall", rep.overall},
          {"by_model", rep.by_model},
          {"by_dataset", rep.by_dataset},
          {"by_algorithm", rep.by_algorithm},
          {"by_metric", rep.by_metric},
          {"by_algorithm_metric", rep.by_algorithm_metric},
          {"mean_score_by_model", rep.mean_score_by_model},
          {"benchmark_coverage", rep.benchmark_coverage},
          {"synthetic_coverage", rep.synthetic_coverage},
          {"synthetic_boost_by_algorithm", rep.synthetic_boost_by_algorithm},
          {"coverage_by_node_count", size_curve}};
}

inline nlohmann::json to_json(const ProbeStats& ps) {
  nlohmann::json agree = nlohmann::json::object();
  for (auto& [ds, a] : ps.agreement.by_dataset)
    agree[ds] = {{"mean_distance", a.mean_distance}, {"agreement_pct", a.agreement_pct}};
  nlohmann::json widths_curve = nlohmann::json::object(), dist_curve = nlohmann::json::object();
  for (auto& [k, v] : ps.widths.width_by_node_count) widths_curve[std::to_string(k)] = v;
  for (auto& [k, v] : ps.agreement.distance_by_node_count) dist_curve[std::to_string(k)] = v;
  return {{"benchmark_width", ps.widths.benchmark_width},
          {"synthetic_width", ps.widths.synthetic_width},
          {"width_ratio", ps.widths.ratio},
          {"width_by_node_count", widths_curve},
          {"agreement_by_dataset", agree},
          {"benchmark_mean_distance", ps.agreement.benchmark_mean_distance},
          {"synthetic_mean_distance", ps.agreement.synthetic_mean_distance},
          {"distance_by_node_count", dist_curve},
          {"synthetic_boost_by_algorithm", ps.synthetic_boost_by_algorithm}};
}

}  // namespace calibench::calibration
