#include <catch2/catch_amalgamated.hpp>

#include "calibench/metrics.hpp"
#include "calibench/sampling.hpp"

using namespace calibench;
using graphs::Dag;
using graphs::MixedGraph;

TEST_CASE("edge metrics on hand-counted graphs", "[metrics]") {
  // Truth: 0->1, 1->2, 2->3. Prediction: 0-1 (hit), 1->2 (hit), 0->3 (miss).
  Dag truth(4, {{0, 1}, {1, 2}, {2, 3}});
  MixedGraph pred(4);
  pred.add_undirected(0, 1);
  pred.add_directed(1, 2);
  pred.add_directed(0, 3);

  auto sk = metrics::edge_metrics(pred, truth, metrics::MetricMode::Skeleton);
  CHECK(sk.precision == Catch::Approx(2.0 / 3.0));
  CHECK(sk.recall == Catch::Approx(2.0 / 3.0));
  CHECK(sk.f1 == Catch::Approx(2.0 / 3.0));
  CHECK(sk.shd == 2.0);  // extra 0-3 + missing 2-3

  // Directed mode only credits strictly oriented correct edges.
  auto dir = metrics::edge_metrics(pred, truth, metrics::MetricMode::Directed);
  CHECK(dir.precision == Catch::Approx(0.5));  // 1->2 of {1->2, 0->3}
  CHECK(dir.recall == Catch::Approx(1.0 / 3.0));
  CHECK(dir.f1 == Catch::Approx(0.4));
}

TEST_CASE("edge metrics empty-set conventions", "[metrics]") {
  Dag empty(3, {});
  MixedGraph nothing(3);
  auto both_empty = metrics::edge_metrics(nothing, empty);
  CHECK(both_empty.precision == 1.0);
  CHECK(both_empty.recall == 1.0);
  CHECK(both_empty.shd == 0.0);

  Dag chain(3, {{0, 1}});
  auto pred_empty = metrics::edge_metrics(nothing, chain);
  CHECK(pred_empty.precision == 0.0);
  CHECK(pred_empty.recall == 0.0);
  CHECK(pred_empty.f1 == 0.0);

  MixedGraph extra(3);
  extra.add_directed(0, 1);
  auto truth_empty = metrics::edge_metrics(extra, empty);
  CHECK(truth_empty.precision == 0.0);
  CHECK(truth_empty.recall == 0.0);
}

TEST_CASE("percentile ci brackets the sample", "[metrics]") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(double(i));
  auto [lo, hi] = metrics::percentile_ci(v, 0.95);
  CHECK(lo == Catch::Approx(stats::percentile(v, 0.025)));
  CHECK(hi == Catch::Approx(stats::percentile(v, 0.975)));
  CHECK(lo > 1.0);
  CHECK(hi < 100.0);
  CHECK_THROWS_AS(metrics::percentile_ci({1.0}), std::domain_error);
  CHECK_THROWS_AS(metrics::percentile_ci(v, 1.0), std::domain_error);
}

TEST_CASE("bootstrap condition summarizes runs deterministically", "[metrics]") {
  graphs::Dag chain(3, {{0, 1}, {1, 2}});
  auto ds = data::sample_linear_gaussian(chain, 800, 0.5, 2.0, 1.0, 71);
  algorithms::AlgoParams params;

  auto gt = metrics::ground_truth_condition(ds, chain, algorithms::AlgorithmId::Pc, params, 12,
                                            9001, metrics::MetricMode::Skeleton);
  CHECK(gt.algorithm == "pc");
  CHECK(gt.runs == 12);
  for (auto m : metrics::all_metrics()) {
    const auto& s = gt.metrics.at(m);
    REQUIRE(s.values.size() == 12);
    CHECK(s.ci_low <= s.mean);
    CHECK(s.mean <= s.ci_high);
  }
  // Strong chain at n=800: skeleton recovery is near-perfect on average.
  CHECK(gt.metrics.at(metrics::MetricName::F1).mean > 0.8);
  CHECK(gt.metrics.at(metrics::MetricName::Shd).mean < 1.5);

  auto again = metrics::ground_truth_condition(ds, chain, algorithms::AlgorithmId::Pc, params, 12,
                                               9001, metrics::MetricMode::Skeleton);
  CHECK(again.metrics.at(metrics::MetricName::F1).values ==
        gt.metrics.at(metrics::MetricName::F1).values);

  CHECK_THROWS_AS(metrics::ground_truth_condition(ds, chain, algorithms::AlgorithmId::Pc, params,
                                                  1, 9001),
                  std::invalid_argument);
}

TEST_CASE("ground truth json round-trip", "[metrics]") {
  graphs::Dag chain(3, {{0, 1}, {1, 2}});
  auto ds = data::sample_linear_gaussian(chain, 300, 0.5, 2.0, 1.0, 72);
  algorithms::AlgoParams params;
  auto gt = metrics::ground_truth_condition(ds, chain, algorithms::AlgorithmId::Lingam, params, 5,
                                            42);
  gt.dataset = "chain3";
  auto back = metrics::ground_truth_from_json(metrics::to_json(gt));
  CHECK(back.dataset == "chain3");
  CHECK(back.algorithm == "lingam");
  CHECK(back.runs == gt.runs);
  for (auto m : metrics::all_metrics()) {
    CHECK(back.metrics.at(m).mean == gt.metrics.at(m).mean);
    CHECK(back.metrics.at(m).values == gt.metrics.at(m).values);
    CHECK(back.metrics.at(m).ci_low == gt.metrics.at(m).ci_low);
  }
  CHECK(back.manifest.at("base_seed") == 42);
}
