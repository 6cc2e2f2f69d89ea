// Score a handful of hand-written interval predictions against known metric
// means, then compare with the random-interval baseline on the same cells.

#include <iostream>

#include "calibench/calibration.hpp"
#include "calibench/graphs.hpp"
#include "calibench/metrics.hpp"

using namespace calibench;
using metrics::MetricName;

namespace {

metrics::GroundTruth make_truth(const std::string& dataset, double p, double r, double f1,
                                double shd) {
  metrics::GroundTruth t;
  t.dataset = dataset;
  t.algorithm = "pc";
  t.runs = 10;
  auto put = [&](MetricName m, double mean) {
    t.metrics[m] = {{}, mean, mean - 0.05, mean + 0.05};
  };
  put(MetricName::Precision, p);
  put(MetricName::Recall, r);
  put(MetricName::F1, f1);
  put(MetricName::Shd, shd);
  return t;
}

}  // namespace

int main() {
  calibration::DatasetRegistry registry{{"lattice", {"lattice", 6, true}},
                                        {"hub", {"hub", 8, true}}};
  std::vector<metrics::GroundTruth> truths{make_truth("lattice", 0.72, 0.60, 0.65, 4.2),
                                           make_truth("hub", 0.55, 0.48, 0.51, 7.9)};

  std::vector<calibration::AggregatedPrediction> predictions{
      {"desk_model", "lattice", "pc",
       {{{MetricName::Precision, 0.60, 0.80},
         {MetricName::Recall, 0.70, 0.90},
         {MetricName::F1, 0.55, 0.75},
         {MetricName::Shd, 2.0, 6.0}}}},
      {"desk_model", "hub", "pc",
       {{{MetricName::Precision, 0.40, 0.60},
         {MetricName::Recall, 0.40, 0.55},
         {MetricName::F1, 0.45, 0.65},
         {MetricName::Shd, 10.0, 16.0}}}},
  };

  auto report = calibration::coverage_report(predictions, truths, registry);
  std::cout << "cells covered: " << report.overall * report.cells.size() << " of "
            << report.cells.size() << " (rate " << report.overall << ")\n";
  for (const auto& cell : report.cells)
    std::cout << "  " << cell.dataset << ' ' << metrics::metric_key(cell.metric) << ": mean "
              << cell.true_mean << " vs [" << cell.range.low << ", " << cell.range.high
              << "] -> " << (cell.covered ? "hit" : "miss") << '\n';

  int random_hits = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t)
    for (const auto& cell : report.cells) {
      double width = cell.metric == MetricName::Shd
                         ? double(graphs::max_shd(registry.at(cell.dataset).n_nodes))
                         : 1.0;
      auto r = calibration::random_baseline_range(cell.metric, 0.0, width, 1000u * t + 17);
      random_hits += calibration::coverage_indicator(cell.true_mean, r);
    }
  std::cout << "random baseline rate: " << random_hits / double(trials * report.cells.size())
            << '\n';
  return 0;
}
