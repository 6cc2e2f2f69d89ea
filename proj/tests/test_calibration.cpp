// Coverage scoring and its companions checked against hand-worked examples:
// a 2-model x 2-dataset grid whose every marginal is computed by hand, the
// closed-form coverage probability of the random baseline, and textbook
// arithmetic for the binomial and Welch tests.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "calibench/calibration.hpp"
#include "calibench/metrics.hpp"
#include "calibench/predictions.hpp"
#include "calibench/stats.hpp"

using namespace calibench;
using calibration::AggregatedPrediction;
using metrics::MetricName;

namespace {

metrics::GroundTruth make_truth(const std::string& ds, const std::string& algo, double p, double r,
                                double f1, double shd) {
  metrics::GroundTruth gt;
  gt.dataset = ds;
  gt.algorithm = algo;
  gt.runs = 10;
  auto put = [&](MetricName m, double mu) {
    metrics::MetricSummary s;
    s.mean = mu;
    s.ci_low = mu - 0.05;
    s.ci_high = mu + 0.05;
    gt.metrics[m] = s;
  };
  put(MetricName::Precision, p);
  put(MetricName::Recall, r);
  put(MetricName::F1, f1);
  put(MetricName::Shd, shd);
  return gt;
}

predictions::RangeSet make_ranges(double pl, double ph, double rl, double rh, double fl, double fh,
                                  double sl, double sh) {
  return {predictions::PredictedRange{MetricName::Precision, pl, ph},
          predictions::PredictedRange{MetricName::Recall, rl, rh},
          predictions::PredictedRange{MetricName::F1, fl, fh},
          predictions::PredictedRange{MetricName::Shd, sl, sh}};
}

// Fixture used across the coverage, width, and agreement tests. Dataset
// "bench" is an 8-node benchmark network, "synth6" a 6-node synthetic graph;
// every per-cell indicator below is worked out by hand in the assertions.
struct Grid {
  calibration::DatasetRegistry registry{{"bench", {"bench", 8, false}},
                                        {"synth6", {"synth6", 6, true}}};
  std::vector<metrics::GroundTruth> truths{make_truth("bench", "pc", 0.5, 0.5, 0.5, 10.0),
                                           make_truth("synth6", "pc", 0.8, 0.6, 0.7, 3.0)};
  std::vector<AggregatedPrediction> preds{
      {"modelA", "bench", "pc", make_ranges(0.4, 0.6, 0.6, 0.7, 0.5, 0.5, 0.0, 5.0)},
      {"modelA", "synth6", "pc", make_ranges(0.7, 0.9, 0.0, 1.0, 0.71, 0.9, 2.0, 4.0)},
      {"modelB", "bench", "pc", make_ranges(0.0, 0.2, 0.45, 0.55, 0.9, 1.0, 10.0, 10.0)},
      {"modelB", "synth6", "pc", make_ranges(0.0, 0.1, 0.55, 0.65, 0.0, 1.0, 4.0, 6.0)}};
};

}  // namespace

TEST_CASE("coverage indicator is closed containment", "[calibration]") {
  using calibration::coverage_indicator;
  CHECK(coverage_indicator(0.5, {MetricName::F1, 0.4, 0.6}) == 1);
  CHECK(coverage_indicator(0.4, {MetricName::F1, 0.4, 0.6}) == 1);  // boundary counts
  CHECK(coverage_indicator(0.6, {MetricName::F1, 0.4, 0.6}) == 1);
  CHECK(coverage_indicator(0.5, {MetricName::F1, 0.5, 0.5}) == 1);  // degenerate range
  CHECK(coverage_indicator(0.61, {MetricName::F1, 0.4, 0.6}) == 0);
  CHECK_THROWS_AS(coverage_indicator(0.5, {MetricName::F1, 0.6, 0.4}), std::invalid_argument);
}

TEST_CASE("cell score decays linearly with normalized miss distance", "[calibration]") {
  using calibration::cell_score;
  CHECK(cell_score(0.5, {MetricName::F1, 0.4, 0.6}, 1.0) == 1.0);
  CHECK(cell_score(0.5, {MetricName::F1, 0.6, 0.7}, 1.0) == Catch::Approx(0.9));
  CHECK(cell_score(10.0, {MetricName::Shd, 0.0, 5.0}, 28.0) == Catch::Approx(1.0 - 5.0 / 28.0));
  CHECK(cell_score(0.9, {MetricName::F1, 0.0, 0.1}, 0.5) == 0.0);  // beyond one domain width
  CHECK_THROWS_AS(cell_score(0.5, {MetricName::F1, 0.4, 0.6}, 0.0), std::invalid_argument);
}

TEST_CASE("coverage report reproduces hand-computed marginals", "[calibration]") {
  Grid g;
  auto rep = calibration::coverage_report(g.preds, g.truths, g.registry);

  // Per-cell indicators, worked by hand:
  //   modelA bench : P 1, R 0, F1 1, SHD 0   modelA synth6: P 1, R 1, F1 0, SHD 1
  //   modelB bench : P 0, R 1, F1 0, SHD 1   modelB synth6: P 0, R 1, F1 1, SHD 0
  REQUIRE(rep.cells.size() == 16);
  CHECK(rep.overall == Catch::Approx(9.0 / 16.0));
  CHECK(rep.by_model.at("modelA") == Catch::Approx(5.0 / 8.0));
  CHECK(rep.by_model.at("modelB") == Catch::Approx(4.0 / 8.0));
  CHECK(rep.by_dataset.at("bench") == Catch::Approx(4.0 / 8.0));
  CHECK(rep.by_dataset.at("synth6") == Catch::Approx(5.0 / 8.0));
  CHECK(rep.by_algorithm.at("pc") == Catch::Approx(9.0 / 16.0));
  CHECK(rep.by_metric.at("Precision") == Catch::Approx(2.0 / 4.0));
  CHECK(rep.by_metric.at("Recall") == Catch::Approx(3.0 / 4.0));
  CHECK(rep.by_metric.at("F1") == Catch::Approx(2.0 / 4.0));
  CHECK(rep.by_metric.at("SHD") == Catch::Approx(2.0 / 4.0));
  CHECK(rep.by_algorithm_metric.at("pc").at("Recall") == Catch::Approx(3.0 / 4.0));
  CHECK(rep.benchmark_coverage == Catch::Approx(4.0 / 8.0));
  CHECK(rep.synthetic_coverage == Catch::Approx(5.0 / 8.0));
  CHECK(rep.synthetic_boost_by_algorithm.at("pc") == Catch::Approx(1.0 / 8.0));
  REQUIRE(rep.coverage_by_node_count.size() == 1);
  CHECK(rep.coverage_by_node_count.at(6) == Catch::Approx(5.0 / 8.0));

  // modelA miss scores: R off by 0.1 of a unit domain, SHD off by 5 of 28.
  double expected = (1.0 + 0.9 + 1.0 + (1.0 - 5.0 / 28.0) + 1.0 + 1.0 + 0.99 + 1.0) / 8.0;
  CHECK(rep.mean_score_by_model.at("modelA") == Catch::Approx(expected));
}

TEST_CASE("coverage report names every missing cell", "[calibration]") {
  Grid g;
  g.preds.pop_back();  // drop modelB / synth6
  try {
    calibration::coverage_report(g.preds, g.truths, g.registry);
    FAIL("expected MissingCellsError");
  } catch (const calibration::MissingCellsError& e) {
    REQUIRE(e.missing.size() == 1);
    CHECK(e.missing[0] == "model=modelB dataset=synth6 algorithm=pc");
  }

  Grid g2;
  g2.registry.erase("synth6");
  CHECK_THROWS_AS(calibration::coverage_report(g2.preds, g2.truths, g2.registry),
                  calibration::MissingCellsError);
}

TEST_CASE("random baseline coverage matches its closed form", "[calibration]") {
  // A sorted pair of uniforms on [a,b] covers a target at normalized
  // position u with probability 2u(1-u).
  const double mu = 0.3;
  const int trials = 20000;
  int covered = 0;
  for (int i = 0; i < trials; ++i) {
    auto r = calibration::random_baseline_range(MetricName::Precision, 0.0, 1.0, 7000 + i);
    REQUIRE(r.low <= r.high);
    covered += calibration::coverage_indicator(mu, r);
  }
  double rate = static_cast<double>(covered) / trials;
  CHECK(rate == Catch::Approx(2.0 * mu * (1.0 - mu)).margin(0.015));

  auto a = calibration::random_baseline_range(MetricName::Shd, 0.0, 15.0, 42);
  auto b = calibration::random_baseline_range(MetricName::Shd, 0.0, 15.0, 42);
  CHECK(a.low == b.low);  // seeded determinism
  CHECK(a.high == b.high);
  CHECK_THROWS_AS(calibration::random_baseline_range(MetricName::Shd, 1.0, 1.0, 1),
                  std::invalid_argument);
}

TEST_CASE("heuristic baseline is a leave-one-out mean with widened CI", "[calibration]") {
  std::vector<metrics::GroundTruth> corpus;
  auto with_ci = [](const std::string& ds, double mean, double half_width) {
    auto gt = make_truth(ds, "pc", mean, mean, mean, 10.0);
    for (auto& [m, s] : gt.metrics) {
      s.ci_low = s.mean - half_width;
      s.ci_high = s.mean + half_width;
    }
    return gt;
  };
  corpus.push_back(with_ci("d2", 0.6, 0.05));
  corpus.push_back(with_ci("d3", 0.8, 0.10));

  // Center (0.6+0.8)/2 = 0.7, half-width 3 * mean(0.05, 0.10) = 0.225.
  auto r = calibration::heuristic_baseline_range(MetricName::Precision, "pc", "d1", corpus);
  CHECK(r.low == Catch::Approx(0.475));
  CHECK(r.high == Catch::Approx(0.925));

  // Non-SHD metrics clamp to [0,1] even when a wider domain is passed in:
  // center 0.925, half-width 3 * 0.2 = 0.6 would reach 1.525 otherwise.
  std::vector<metrics::GroundTruth> high_corpus{with_ci("d2", 0.9, 0.2),
                                                with_ci("d3", 0.95, 0.2)};
  auto clamped = calibration::heuristic_baseline_range(MetricName::Recall, "pc", "d1",
                                                       high_corpus, {0.0, 5.0});
  CHECK(clamped.high == 1.0);
  CHECK(clamped.low == Catch::Approx(0.325));

  // SHD honors the caller's domain: means are both 10, CI half-width 0.05/0.10.
  auto shd = calibration::heuristic_baseline_range(MetricName::Shd, "pc", "d1", corpus,
                                                   {0.0, 28.0});
  CHECK(shd.low == Catch::Approx(10.0 - 0.225));
  CHECK(shd.high == Catch::Approx(10.0 + 0.225));

  std::vector<metrics::GroundTruth> tiny{with_ci("d2", 0.6, 0.05)};
  CHECK_THROWS_AS(calibration::heuristic_baseline_range(MetricName::F1, "pc", "d2", tiny),
                  std::invalid_argument);
}

TEST_CASE("cv percent matches hand arithmetic and scaling invariance", "[calibration]") {
  auto exact = calibration::cv_percent(10.0, 10.0, 10.0);
  CHECK(exact.defined);
  CHECK(exact.value == 0.0);

  // mean 2, population sd sqrt(2/3): cv = 40.8248...%
  auto spread = calibration::cv_percent(1.0, 2.0, 3.0);
  CHECK(spread.defined);
  CHECK(spread.value == Catch::Approx(100.0 * std::sqrt(2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(spread.value == Catch::Approx(40.8248).margin(1e-3));

  auto zero_mean = calibration::cv_percent(-1.0, 0.0, 1.0);
  CHECK_FALSE(zero_mean.defined);

  for (double k : {0.5, 3.0, 117.0}) {
    auto scaled = calibration::cv_percent(k * 1.0, k * 2.0, k * 3.0);
    CHECK(scaled.value == Catch::Approx(spread.value).epsilon(1e-12));
  }
}

TEST_CASE("binomial test reproduces the reported z statistics", "[calibration]") {
  // 21/208 observed vs null 0.365: z = (0.10096 - 0.365)/se with se from the
  // observed rate. Hand value -12.64.
  auto t1 = calibration::binomial_test(21, 208, 0.365);
  CHECK(t1.z == Catch::Approx(-12.64).margin(0.01));
  CHECK(t1.p < 1e-3);

  auto t2 = calibration::binomial_test(12, 208, 0.365);
  CHECK(t2.z == Catch::Approx(-19.0).margin(0.05));

  // Exact null match short-circuits to z=0 even where the SE would be tiny.
  auto match = calibration::binomial_test(104, 208, 0.5);
  CHECK(match.z == 0.0);
  CHECK(match.p == 1.0);

  // k=0 stays finite thanks to the 0.5/n clamp.
  auto zero = calibration::binomial_test(0, 50, 0.3);
  CHECK(std::isfinite(zero.z));
  CHECK(zero.z < 0.0);

  CHECK_THROWS_AS(calibration::binomial_test(5, 10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(calibration::binomial_test(5, 10, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(calibration::binomial_test(11, 10, 0.5), std::invalid_argument);
}

TEST_CASE("pairwise welch applies bonferroni across all pairs", "[calibration]") {
  std::map<std::string, std::vector<double>> groups{
      {"a", {1.0, 2.0, 3.0}}, {"b", {2.0, 3.0, 4.0}}, {"c", {10.0, 11.0, 12.0}}};
  auto cmps = calibration::pairwise_welch_bonferroni(groups);
  REQUIRE(cmps.size() == 3);

  // a vs b: equal variances 1, n=3 each: t = -1/sqrt(2/3), Welch df = 4.
  const auto& ab = cmps[0];
  CHECK(ab.a == "a");
  CHECK(ab.b == "b");
  CHECK(ab.mean_diff == Catch::Approx(-1.0));
  CHECK(ab.t == Catch::Approx(-1.0 / std::sqrt(2.0 / 3.0)));
  CHECK(ab.df == Catch::Approx(4.0));
  CHECK(ab.p_corrected ==
        Catch::Approx(std::min(1.0, 3.0 * stats::student_t_two_sided_p(ab.t, ab.df))));
  CHECK(ab.cohen_d == Catch::Approx(-1.0));  // pooled sd 1
  CHECK_FALSE(ab.significant);

  // a vs c differ by 9 pooled sds: decisive even after the correction.
  const auto& ac = cmps[1];
  CHECK(ac.mean_diff == Catch::Approx(-9.0));
  CHECK(ac.significant);
}

TEST_CASE("welch comparisons flag zero-variance degeneracy", "[calibration]") {
  std::map<std::string, std::vector<double>> tied{{"x", {5.0, 5.0}}, {"y", {5.0, 5.0}}};
  auto t = calibration::pairwise_welch_bonferroni(tied);
  REQUIRE(t.size() == 1);
  CHECK(t[0].degenerate);
  CHECK(t[0].t == 0.0);
  CHECK(t[0].p_corrected == 1.0);
  CHECK_FALSE(t[0].significant);

  std::map<std::string, std::vector<double>> split{{"x", {5.0, 5.0}}, {"z", {7.0, 7.0}}};
  auto s = calibration::pairwise_welch_bonferroni(split);
  REQUIRE(s.size() == 1);
  CHECK(s[0].degenerate);
  CHECK(std::isinf(s[0].t));
  CHECK(s[0].p_corrected == 0.0);
  CHECK(s[0].significant);

  std::map<std::string, std::vector<double>> one{{"x", {5.0, 5.0}}};
  CHECK_THROWS_AS(calibration::pairwise_welch_bonferroni(one), std::invalid_argument);
  std::map<std::string, std::vector<double>> short_group{{"x", {5.0}}, {"y", {6.0, 7.0}}};
  CHECK_THROWS_AS(calibration::pairwise_welch_bonferroni(short_group), std::invalid_argument);
}

TEST_CASE("range width stats split by dataset provenance", "[calibration]") {
  Grid g;
  auto ws = calibration::range_width_stats(g.preds, g.registry);

  // modelA bench widths 0.2, 0.1, 0.0, 5.0; synth widths 0.2, 1.0, 0.19, 2.0.
  CHECK(ws.benchmark_width.at("modelA") == Catch::Approx(5.3 / 4.0));
  CHECK(ws.synthetic_width.at("modelA") == Catch::Approx(3.39 / 4.0));
  CHECK(ws.ratio.at("modelA") == Catch::Approx((5.3 / 4.0) / (3.39 / 4.0)));
  CHECK(ws.benchmark_width.at("modelB") == Catch::Approx(0.1));
  CHECK(ws.synthetic_width.at("modelB") == Catch::Approx(0.8));
  REQUIRE(ws.width_by_node_count.size() == 1);
  CHECK(ws.width_by_node_count.at(6) == Catch::Approx((3.39 + 3.2) / 8.0));

  // A model present on only one side of the split is an error, as is a model
  // whose synthetic ranges are all degenerate.
  std::vector<AggregatedPrediction> bench_only{g.preds[0], g.preds[2]};
  CHECK_THROWS_AS(calibration::range_width_stats(bench_only, g.registry), std::domain_error);

  auto degenerate = g.preds;
  degenerate[1].ranges = make_ranges(0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 3.0, 3.0);
  std::vector<AggregatedPrediction> only_a{degenerate[0], degenerate[1]};
  CHECK_THROWS_AS(calibration::range_width_stats(only_a, g.registry), std::domain_error);
}

TEST_CASE("cross model agreement distance and overlap", "[calibration]") {
  using predictions::PredictedRange;
  std::vector<PredictedRange> disjoint{{MetricName::F1, 0.0, 1.0}, {MetricName::F1, 2.0, 3.0}};
  auto d = calibration::cross_model_agreement(disjoint);
  CHECK(d.mean_distance == Catch::Approx(2.0));
  CHECK(d.agreement_pct == 0.0);

  std::vector<PredictedRange> overlapping{{MetricName::F1, 0.0, 2.0}, {MetricName::F1, 1.0, 3.0}};
  auto o = calibration::cross_model_agreement(overlapping);
  CHECK(o.mean_distance == Catch::Approx(1.0));
  CHECK(o.agreement_pct == 100.0);

  // Three models: pairwise means over (a,b), (a,c), (b,c).
  std::vector<PredictedRange> trio{{MetricName::F1, 0.0, 1.0},
                                   {MetricName::F1, 0.0, 1.0},
                                   {MetricName::F1, 2.0, 3.0}};
  auto t = calibration::cross_model_agreement(trio);
  CHECK(t.mean_distance == Catch::Approx((0.0 + 2.0 + 2.0) / 3.0));
  CHECK(t.agreement_pct == Catch::Approx(100.0 / 3.0));

  std::vector<PredictedRange> lone{{MetricName::F1, 0.0, 1.0}};
  CHECK_THROWS_AS(calibration::cross_model_agreement(lone), std::invalid_argument);
}

TEST_CASE("agreement stats average groups per dataset and provenance", "[calibration]") {
  Grid g;
  auto as = calibration::agreement_stats(g.preds, g.registry);

  // bench pairwise distances per metric: 0.4, 0.15, 0.45, 7.5 (no overlaps);
  // synth6: 0.75, 0.45, 0.405, 2.0 with 3 of 4 pairs overlapping.
  CHECK(as.by_dataset.at("bench").mean_distance == Catch::Approx(8.5 / 4.0));
  CHECK(as.by_dataset.at("bench").agreement_pct == Catch::Approx(0.0));
  CHECK(as.by_dataset.at("synth6").mean_distance == Catch::Approx(3.605 / 4.0));
  CHECK(as.by_dataset.at("synth6").agreement_pct == Catch::Approx(75.0));
  CHECK(as.benchmark_mean_distance == Catch::Approx(8.5 / 4.0));
  CHECK(as.synthetic_mean_distance == Catch::Approx(3.605 / 4.0));
  CHECK(as.distance_by_node_count.at(6) == Catch::Approx(3.605 / 4.0));
}

TEST_CASE("probe stats bundle widths, agreement, and coverage boost", "[calibration]") {
  Grid g;
  auto rep = calibration::coverage_report(g.preds, g.truths, g.registry);
  auto ps = calibration::probe_stats(g.preds, rep, g.registry);
  CHECK(ps.widths.ratio.count("modelA") == 1);
  CHECK(ps.agreement.by_dataset.count("synth6") == 1);
  CHECK(ps.synthetic_boost_by_algorithm.at("pc") == Catch::Approx(1.0 / 8.0));

  auto j = calibration::to_json(rep);
  CHECK(j.at("overall") == Catch::Approx(9.0 / 16.0));
  auto pj = calibration::to_json(ps);
  CHECK(pj.contains("benchmark_width"));
  CHECK(pj.contains("agreement_by_dataset"));
}
