#pragma once

// Campaign orchestration: materialize datasets, compute bootstrap ground
// truth, render prompts, query models (live / record / replay), score
// predictions, and emit the report bundle. Every command checks the manifest
// hash first, so outputs from different configs can never mix in one
// directory; within a matching directory, finished per-condition files are
// skipped, which makes interrupted runs resumable.
//
// Determinism contract: with replay-mode querying, everything written under
// the output directory is byte-identical across reruns except manifest.json,
// the only file that carries timestamps.

#include <atomic>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibench/algorithms.hpp"
#include "calibench/bif.hpp"
#include "calibench/calibration.hpp"
#include "calibench/config.hpp"
#include "calibench/dataset.hpp"
#include "calibench/gateway.hpp"
#include "calibench/graphs.hpp"
#include "calibench/metrics.hpp"
#include "calibench/predictions.hpp"
#include "calibench/rng.hpp"
#include "calibench/sampling.hpp"
#include "calibench/svgplot.hpp"
#include "calibench/version.hpp"

namespace calibench::campaign {

namespace fs = std::filesystem;

class CampaignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TransportFactory = std::function<std::unique_ptr<gateway::Transport>()>;

struct CampaignOptions {
  std::optional<std::string> out_dir;          // overrides config out_dir
  std::optional<std::uint64_t> seed;           // overrides config seed
  std::optional<gateway::QueryMode> mode;      // overrides config query mode
  int jobs = 1;                                // worker threads for conditions
  bool baselines_only = false;                 // evaluate without model predictions
  TransportFactory transport_factory;          // live/record transport; tests inject mocks
  std::function<void(const std::string&)> log; // progress sink; default stderr
};

namespace detail {

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CampaignError("cannot write " + p.string());
  out << content;
}

inline nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw CampaignError("cannot read " + p.string());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace detail

class Campaign {
 public:
  Campaign(config::CampaignConfig cfg, CampaignOptions opt = {})
      : cfg_(std::move(cfg)), opt_(std::move(opt)) {
    if (opt_.seed) cfg_.seed = *opt_.seed;
    if (opt_.mode) cfg_.query.mode = *opt_.mode;
    if (opt_.out_dir) cfg_.out_dir = *opt_.out_dir;
    if (opt_.jobs < 1) opt_.jobs = 1;
    if (!opt_.log) opt_.log = [](const std::string& line) { std::fputs((line + "\n").c_str(), stderr); };
    root_ = cfg_.resolve(cfg_.out_dir);
    hash_ = config::config_hash(cfg_);
  }

  const config::CampaignConfig& cfg() const { return cfg_; }
  const fs::path& root() const { return root_; }

  // ---- commands ----

  void generate() {
    prepare("generate");
    fs::create_directories(datasets_dir());
    for (const auto& spec : cfg_.datasets) {
      fs::path csv = datasets_dir() / (spec.id + ".csv");
      fs::path truth = truth_path(spec.id);
      if (fs::exists(csv) && fs::exists(truth)) {
        opt_.log("generate: " + spec.id + " already present, skipping");
        continue;
      }
      auto [ds, dag] = materialize(spec);
      data::write_dataset(ds, csv);
      detail::write_text(truth, graphs::to_json(dag.to_mixed()).dump(2) + "\n");
      opt_.log("generate: wrote " + spec.id + " (" + std::to_string(ds.rows()) + " rows, " +
               std::to_string(ds.cols()) + " cols)");
    }
    finish("generate");
  }

  void ground_truth() {
    prepare("ground-truth");
    require_datasets();
    fs::create_directories(ground_truth_dir());

    struct Job {
      std::string dataset;
      algorithms::AlgorithmId algo;
      std::uint64_t seed;
      fs::path out;
    };
    std::vector<Job> jobs;
    nlohmann::json seeds = nlohmann::json::object();
    for (const auto& spec : cfg_.datasets) {
      for (auto algo : cfg_.algos) {
        std::string key = spec.id + "/" + algorithms::algorithm_key(algo);
        std::uint64_t seed = rng::derive_seed(cfg_.seed, "condition-" + key);
        seeds[key] = seed;
        fs::path out = condition_path(spec.id, algo);
        if (fs::exists(out)) {
          opt_.log("ground-truth: " + key + " already present, skipping");
          continue;
        }
        jobs.push_back({spec.id, algo, seed, out});
      }
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        const Job& job = jobs[i];
        try {
          auto ds = data::read_dataset((datasets_dir() / (job.dataset + ".csv")).string());
          auto dag = graphs::dag_from_json(detail::read_json(truth_path(job.dataset)));
          auto gt = metrics::ground_truth_condition(ds, dag, job.algo, cfg_.params, cfg_.runs,
                                                    job.seed, cfg_.metric_mode);
          gt.dataset = job.dataset;
          detail::write_text(job.out, metrics::to_json(gt).dump(2) + "\n");
          opt_.log("ground-truth: " + job.dataset + "/" +
                   algorithms::algorithm_key(job.algo) + " done");
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    run_pool(worker, opt_.jobs, jobs.size());
    if (first_error) std::rethrow_exception(first_error);

    update_manifest([&](nlohmann::json& m) { m["condition_seeds"] = seeds; });
    finish("ground-truth");
  }

  void prompts() {
    prepare("prompts");
    require_datasets();
    fs::create_directories(prompts_dir());
    std::string lines;
    for (const auto& cell : prompt_cells()) {
      nlohmann::json j = {{"dataset", cell.dataset},
                          {"algorithm", cell.algorithm},
                          {"formulation", predictions::formulation_key(cell.formulation)},
                          {"prompt", cell.prompt}};
      lines += j.dump() + "\n";
    }
    detail::write_text(prompts_dir() / "prompts.jsonl", lines);
    opt_.log("prompts: rendered " + std::to_string(prompt_cells().size()) + " cells");
    finish("prompts");
  }

  void query() {
    prepare("query");
    require_datasets();
    if (cfg_.models.empty()) throw CampaignError("query: config lists no models");
    fs::create_directories(predictions_dir());

    gateway::ReplayStore store;
    bool use_store = cfg_.query.mode != gateway::QueryMode::Live;
    if (cfg_.query.replay_store.empty() && use_store)
      throw CampaignError("query: record/replay mode needs query.replay_store");
    fs::path store_path = use_store ? cfg_.resolve(cfg_.query.replay_store) : fs::path();
    if (cfg_.query.mode == gateway::QueryMode::Replay) {
      store.load_file(store_path);
    } else if (cfg_.query.mode == gateway::QueryMode::Record) {
      if (fs::exists(store_path)) store.load_file(store_path);
      fs::create_directories(store_path.parent_path());
      store.open_append(store_path);
    }

    std::unique_ptr<gateway::Transport> transport;
    if (cfg_.query.mode != gateway::QueryMode::Replay) {
      if (!opt_.transport_factory)
        throw CampaignError("query: live/record mode needs a transport factory");
      transport = opt_.transport_factory();
    }

    auto existing = load_records();
    std::set<std::string> done;
    for (const auto& r : existing) done.insert(record_key(r));

    struct Cell {
      const gateway::EndpointConfig* model;
      const PromptCell* prompt;
    };
    const auto& pcells = prompt_cells();
    std::vector<Cell> todo;
    for (const auto& m : cfg_.models)
      for (const auto& pc : pcells)
        if (!done.count(m.id + "|" + pc.dataset + "|" + pc.algorithm + "|" +
                        predictions::formulation_key(pc.formulation)))
          todo.push_back({&m, &pc});

    std::int64_t ts =
        cfg_.query.mode == gateway::QueryMode::Replay ? 0 : static_cast<std::int64_t>(std::time(nullptr));

    std::ofstream journal(predictions_dir() / "records.jsonl", std::ios::app);
    std::vector<predictions::PredictionRecord> fresh;
    std::vector<nlohmann::json> quarantined;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;

    auto worker = [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= todo.size()) return;
        const Cell& cell = todo[i];
        try {
          gateway::ModelGateway gw(cfg_.query.mode, *cell.model, transport.get(),
                                   use_store ? &store : nullptr);
          std::string answer = gw.query(cell.prompt->prompt);
          auto parsed = predictions::parse_response(answer);
          std::lock_guard lock(mu);
          if (parsed.ok) {
            predictions::PredictionRecord rec{cell.model->id,
                                              cell.prompt->dataset,
                                              cell.prompt->algorithm,
                                              cell.prompt->formulation,
                                              parsed.ranges,
                                              answer,
                                              ts};
            journal << predictions::to_json(rec).dump() << '\n';
            journal.flush();
            fresh.push_back(std::move(rec));
          } else {
            quarantined.push_back(
                {{"model", cell.model->id},
                 {"dataset", cell.prompt->dataset},
                 {"algorithm", cell.prompt->algorithm},
                 {"formulation", predictions::formulation_key(cell.prompt->formulation)},
                 {"error", parsed.error},
                 {"response", answer}});
          }
        } catch (...) {
          std::lock_guard lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    int workers = opt_.jobs > 1 ? opt_.jobs : cfg_.query.concurrency;
    run_pool(worker, workers, todo.size());
    if (first_error) std::rethrow_exception(first_error);

    // Canonical rewrite: the journal above is only a crash log; the file of
    // record is sorted by cell so thread scheduling cannot reorder bytes.
    for (auto& r : fresh) existing.push_back(std::move(r));
    write_records_sorted(existing);
    append_quarantine(quarantined);
    opt_.log("query: " + std::to_string(fresh.size()) + " new answers, " +
             std::to_string(quarantined.size()) + " quarantined");
    finish("query");
  }

  // Ingest externally produced responses: JSONL rows of
  // {model, dataset, algorithm, formulation, response}.
  void ingest(const fs::path& responses) {
    prepare("ingest");
    require_datasets();
    fs::create_directories(predictions_dir());
    std::ifstream in(responses);
    if (!in) throw CampaignError("ingest: cannot read " + responses.string());

    std::set<std::string> model_ids, dataset_ids;
    for (const auto& m : cfg_.models) model_ids.insert(m.id);
    for (const auto& d : cfg_.datasets) dataset_ids.insert(d.id);
    std::set<std::string> algo_keys;
    for (auto a : cfg_.algos) algo_keys.insert(algorithms::algorithm_key(a));

    auto existing = load_records();
    std::set<std::string> seen;
    for (const auto& r : existing) seen.insert(record_key(r));

    std::vector<nlohmann::json> quarantined;
    std::string line;
    int line_no = 0, accepted = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      std::string model = j.at("model").get<std::string>();
      std::string dataset = j.at("dataset").get<std::string>();
      std::string algo = j.at("algorithm").get<std::string>();
      std::string fkey = j.at("formulation").get<std::string>();
      std::string response = j.at("response").get<std::string>();
      if (!model_ids.count(model))
        throw CampaignError("ingest line " + std::to_string(line_no) + ": unknown model " + model);
      if (!dataset_ids.count(dataset))
        throw CampaignError("ingest line " + std::to_string(line_no) + ": unknown dataset " +
                            dataset);
      if (!algo_keys.count(algo))
        throw CampaignError("ingest line " + std::to_string(line_no) + ": unknown algorithm " +
                            algo);
      auto f = predictions::formulation_from_key(fkey);
      std::string key = model + "|" + dataset + "|" + algo + "|" + fkey;
      if (!seen.insert(key).second)
        throw CampaignError("ingest line " + std::to_string(line_no) + ": duplicate cell " + key);

      auto parsed = predictions::parse_response(response);
      if (parsed.ok) {
        existing.push_back({model, dataset, algo, f, parsed.ranges, response, 0});
        ++accepted;
      } else {
        quarantined.push_back({{"model", model},
                               {"dataset", dataset},
                               {"algorithm", algo},
                               {"formulation", fkey},
                               {"error", parsed.error},
                               {"response", response}});
      }
    }
    write_records_sorted(existing);
    append_quarantine(quarantined);
    opt_.log("ingest: accepted " + std::to_string(accepted) + ", quarantined " +
             std::to_string(quarantined.size()));
    finish("ingest");
  }

  void evaluate() {
    prepare("evaluate");
    fs::create_directories(evaluate_dir());

    auto truths = load_ground_truths();
    auto registry = build_registry();
    nlohmann::json consolidated = {{"config_hash", hash_}, {"tool_version", kToolVersion}};

    // Baselines and the algorithm comparison need only ground truth.
    consolidated["baselines"] = baselines_json(truths, registry);
    consolidated["pairwise_welch"] = welch_json(truths);

    if (!opt_.baselines_only) {
      auto records = load_records();
      if (records.empty())
        throw calibration::MissingCellsError(
            "evaluate: no prediction records found; run query/ingest first or pass "
            "--baselines-only",
            {});
      auto [aggregated, cv] = aggregate(records);
      auto report = calibration::coverage_report(aggregated, truths, registry);
      consolidated["coverage"] = calibration::to_json(report);
      consolidated["probes"] = probes_json(aggregated, report, registry);
      consolidated["cv"] = cv;
      consolidated["significance"] = significance_json(report, consolidated["baselines"]);
    }

    detail::write_text(evaluate_dir() / "consolidated.json", consolidated.dump(2) + "\n");
    write_csv_projections(consolidated);
    opt_.log("evaluate: wrote consolidated.json and CSV tables");
    finish("evaluate");
  }

  void report() {
    prepare("report");
    fs::path cj = evaluate_dir() / "consolidated.json";
    if (!fs::exists(cj)) throw CampaignError("report: run evaluate first (" + cj.string() + ")");
    auto consolidated = detail::read_json(cj);
    fs::create_directories(report_dir());
    write_plots(consolidated);
    finish("report");
  }

  void all(const fs::path& ingest_file = {}) {
    generate();
    ground_truth();
    prompts();
    if (!ingest_file.empty())
      ingest(ingest_file);
    else if (!cfg_.models.empty())
      query();
    evaluate();
    report();
  }

  // ---- layout ----

  fs::path datasets_dir() const { return root_ / "datasets"; }
  fs::path ground_truth_dir() const { return root_ / "ground_truth"; }
  fs::path prompts_dir() const { return root_ / "prompts"; }
  fs::path predictions_dir() const { return root_ / "predictions"; }
  fs::path evaluate_dir() const { return root_ / "evaluate"; }
  fs::path report_dir() const { return root_ / "report"; }
  fs::path manifest_path() const { return root_ / "manifest.json"; }
  fs::path truth_path(const std::string& id) const {
    return datasets_dir() / (id + ".truth.json");
  }
  fs::path condition_path(const std::string& id, algorithms::AlgorithmId a) const {
    return ground_truth_dir() / (id + "__" + algorithms::algorithm_key(a) + ".json");
  }

 private:
  struct PromptCell {
    std::string dataset;
    std::string algorithm;  // key
    predictions::Formulation formulation;
    std::string prompt;
  };

  // ---- manifest ----

  void prepare(const std::string& command) {
    fs::create_directories(root_);
    if (fs::exists(manifest_path())) {
      auto m = detail::read_json(manifest_path());
      std::string stored = m.value("config_hash", std::string());
      if (stored != hash_)
        throw CampaignError("output directory " + root_.string() +
                            " was produced by a different config (manifest hash " + stored +
                            ", current " + hash_ + "); use a fresh --out directory");
    } else {
      nlohmann::json m = {{"config_hash", hash_},
                          {"tool_version", kToolVersion},
                          {"created_at", static_cast<std::int64_t>(std::time(nullptr))},
                          {"condition_seeds", nlohmann::json::object()},
                          {"commands", nlohmann::json::object()}};
      detail::write_text(manifest_path(), m.dump(2) + "\n");
    }
    (void)command;
  }

  void finish(const std::string& command) {
    update_manifest([&](nlohmann::json& m) {
      m["commands"][command] = {
          {"completed_at", static_cast<std::int64_t>(std::time(nullptr))}};
    });
  }

  void update_manifest(const std::function<void(nlohmann::json&)>& fn) {
    auto m = detail::read_json(manifest_path());
    fn(m);
    detail::write_text(manifest_path(), m.dump(2) + "\n");
  }

  // ---- shared helpers ----

  static void run_pool(const std::function<void()>& worker, int n_threads, std::size_t n_jobs) {
    if (n_jobs == 0) return;
    int n = std::max(1, std::min<int>(n_threads, static_cast<int>(n_jobs)));
    if (n == 1) {
      worker();
      return;
    }
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  void require_datasets() const {
    for (const auto& spec : cfg_.datasets) {
      if (!fs::exists(datasets_dir() / (spec.id + ".csv")) || !fs::exists(truth_path(spec.id)))
        throw CampaignError("dataset " + spec.id + " not materialized; run generate first");
    }
  }

  std::pair<data::Dataset, graphs::Dag> materialize(const config::DatasetSpec& spec) const {
    int n = cfg_.samples_for(spec);
    std::uint64_t seed = rng::derive_seed(cfg_.seed, "dataset-" + spec.id);
    if (spec.synthetic()) {
      auto dag = graphs::generate_er_dag(spec.nodes, spec.edge_prob,
                                         rng::derive_seed(cfg_.seed, "dataset-dag-" + spec.id));
      auto ds = spec.data == "nongaussian"
                    ? data::sample_linear_nongaussian(dag, n, 1.0, seed)
                    : data::sample_linear_gaussian(dag, n, 0.5, 2.0, 1.0, seed);
      return {std::move(ds), std::move(dag)};
    }
    auto net = data::parse_bif_file(cfg_.resolve(spec.path).string());
    auto ds = data::ancestral_sample(net, n, seed);
    return {std::move(ds), net.dag};
  }

  calibration::DatasetRegistry build_registry() const {
    calibration::DatasetRegistry reg;
    for (const auto& spec : cfg_.datasets) {
      int nodes = spec.nodes;
      if (!spec.synthetic()) {
        auto j = detail::read_json(truth_path(spec.id));
        nodes = j.at("d").get<int>();
      }
      reg[spec.id] = {spec.id, nodes, spec.synthetic()};
    }
    return reg;
  }

  const std::vector<PromptCell>& prompt_cells() {
    if (!prompt_cells_.empty()) return prompt_cells_;
    auto registry = build_registry();
    for (const auto& spec : cfg_.datasets) {
      predictions::ConditionMeta meta;
      meta.dataset_name = spec.id;
      meta.n_nodes = registry.at(spec.id).n_nodes;
      meta.n_samples = cfg_.samples_for(spec);
      meta.data_type = spec.synthetic() ? "continuous" : "discrete";
      meta.complexity = spec.complexity;
      for (auto algo : cfg_.algos) {
        meta.algorithm_name = algorithms::algorithm_name(algo);
        for (auto f : cfg_.formulations) {
          prompt_cells_.push_back({spec.id, algorithms::algorithm_key(algo), f,
                                   predictions::render_prompt(f, meta)});
        }
      }
    }
    return prompt_cells_;
  }

  static std::string record_key(const predictions::PredictionRecord& r) {
    return r.model + "|" + r.dataset + "|" + r.algorithm + "|" +
           predictions::formulation_key(r.formulation);
  }

  std::vector<predictions::PredictionRecord> load_records() const {
    fs::path p = predictions_dir() / "records.jsonl";
    if (!fs::exists(p)) return {};
    auto recs = predictions::read_prediction_records(p.string());
    // The journal may hold duplicates from an interrupted canonical rewrite;
    // last write wins.
    std::map<std::string, predictions::PredictionRecord> uniq;
    for (auto& r : recs) uniq[record_key(r)] = std::move(r);
    std::vector<predictions::PredictionRecord> out;
    for (auto& [k, r] : uniq) out.push_back(std::move(r));
    return out;
  }

  void write_records_sorted(std::vector<predictions::PredictionRecord> recs) const {
    std::map<std::string, predictions::PredictionRecord> uniq;
    for (auto& r : recs) uniq[record_key(r)] = std::move(r);
    std::vector<predictions::PredictionRecord> sorted;
    for (auto& [k, r] : uniq) sorted.push_back(std::move(r));
    predictions::write_prediction_records((predictions_dir() / "records.jsonl").string(), sorted);
  }

  void append_quarantine(const std::vector<nlohmann::json>& rows) const {
    if (rows.empty()) return;
    std::vector<std::string> lines;
    for (const auto& r : rows) lines.push_back(r.dump());
    std::sort(lines.begin(), lines.end());
    std::ofstream out(predictions_dir() / "quarantine.jsonl", std::ios::app);
    for (const auto& l : lines) out << l << '\n';
  }

  std::vector<metrics::GroundTruth> load_ground_truths() const {
    std::vector<metrics::GroundTruth> out;
    std::vector<std::string> missing;
    for (const auto& spec : cfg_.datasets) {
      for (auto algo : cfg_.algos) {
        fs::path p = condition_path(spec.id, algo);
        if (!fs::exists(p)) {
          missing.push_back(spec.id + "/" + algorithms::algorithm_key(algo));
          continue;
        }
        out.push_back(metrics::ground_truth_from_json(detail::read_json(p)));
      }
    }
    if (!missing.empty()) {
      std::string msg = "evaluate: missing ground truth for " +
                        std::to_string(missing.size()) + " condition(s):";
      for (const auto& m : missing) msg += "\n  " + m;
      throw calibration::MissingCellsError(msg, missing);
    }
    return out;
  }

  // Groups records into (model, condition) triples, averages formulations,
  // and computes the per-model CV% summary over midpoints and widths.
  std::pair<std::vector<calibration::AggregatedPrediction>, nlohmann::json> aggregate(
      const std::vector<predictions::PredictionRecord>& records) const {
    std::map<std::string, std::vector<predictions::PredictionRecord>> cells;
    for (const auto& r : records)
      cells[r.model + "|" + r.dataset + "|" + r.algorithm].push_back(r);

    std::vector<calibration::AggregatedPrediction> aggregated;
    std::vector<std::string> gaps;
    struct CvTally {
      double mid_sum = 0, width_sum = 0;
      int n = 0, undefined = 0;
    };
    std::map<std::string, CvTally> cv_by_model;

    for (auto& [key, recs] : cells) {
      auto bar = key.find('|');
      auto bar2 = key.find('|', bar + 1);
      calibration::AggregatedPrediction ap;
      ap.model = key.substr(0, bar);
      ap.dataset = key.substr(bar + 1, bar2 - bar - 1);
      ap.algorithm = key.substr(bar2 + 1);
      try {
        ap.ranges = predictions::aggregate_formulations(recs);
      } catch (const predictions::AggregationError& e) {
        gaps.push_back(key + ": " + e.what());
        continue;
      }
      // CV% needs the per-formulation values in a fixed order.
      std::map<predictions::Formulation, const predictions::RangeSet*> by_f;
      for (const auto& r : recs) by_f[r.formulation] = &r.ranges;
      auto& tally = cv_by_model[ap.model];
      for (int i = 0; i < 4; ++i) {
        double mids[3], widths[3];
        int fi = 0;
        for (auto f : predictions::all_formulations()) {
          const auto& rng_i = (*by_f.at(f))[i];
          mids[fi] = (rng_i.low + rng_i.high) / 2.0;
          widths[fi] = rng_i.high - rng_i.low;
          ++fi;
        }
        auto cm = calibration::cv_percent(mids[0], mids[1], mids[2]);
        auto cw = calibration::cv_percent(widths[0], widths[1], widths[2]);
        if (cm.defined && cw.defined) {
          tally.mid_sum += cm.value;
          tally.width_sum += cw.value;
          ++tally.n;
        } else {
          ++tally.undefined;
        }
      }
      aggregated.push_back(std::move(ap));
    }
    if (!gaps.empty()) {
      std::string msg =
          "evaluate: " + std::to_string(gaps.size()) + " incomplete prediction cell(s):";
      for (const auto& g : gaps) msg += "\n  " + g;
      throw calibration::MissingCellsError(msg, gaps);
    }

    nlohmann::json cv = nlohmann::json::object();
    for (auto& [model, t] : cv_by_model)
      cv[model] = {{"midpoint_cv_mean", t.n ? t.mid_sum / t.n : 0.0},
                   {"width_cv_mean", t.n ? t.width_sum / t.n : 0.0},
                   {"cells", t.n},
                   {"undefined_cells", t.undefined}};
    return {std::move(aggregated), std::move(cv)};
  }

  nlohmann::json baselines_json(const std::vector<metrics::GroundTruth>& truths,
                                const calibration::DatasetRegistry& registry) const {
    int rand_cov = 0, rand_n = 0;
    int heur_cov = 0, heur_n = 0;
    std::string heur_error;
    for (const auto& gt : truths) {
      const auto& info = registry.at(gt.dataset);
      double shd_max = static_cast<double>(graphs::max_shd(info.n_nodes));
      int idx = 0;
      for (auto m : metrics::all_metrics()) {
        (void)idx;
        double mu = gt.metrics.at(m).mean;
        double hi = m == metrics::MetricName::Shd ? shd_max : 1.0;
        std::uint64_t seed = rng::derive_seed(
            cfg_.seed, "random-baseline-" + gt.dataset + ":" + gt.algorithm + ":" +
                           metrics::metric_key(m));
        auto rr = calibration::random_baseline_range(m, 0.0, hi, seed);
        rand_cov += calibration::coverage_indicator(mu, rr);
        ++rand_n;
        try {
          auto hr = calibration::heuristic_baseline_range(m, gt.algorithm, gt.dataset, truths,
                                                          {0.0, hi});
          heur_cov += calibration::coverage_indicator(mu, hr);
          ++heur_n;
        } catch (const std::invalid_argument& e) {
          heur_error = e.what();
        }
      }
    }
    nlohmann::json out = {{"random", {{"covered", rand_cov},
                                      {"cells", rand_n},
                                      {"coverage", rand_n ? double(rand_cov) / rand_n : 0.0}}}};
    if (heur_n > 0)
      out["heuristic"] = {{"covered", heur_cov},
                          {"cells", heur_n},
                          {"coverage", double(heur_cov) / heur_n}};
    else
      out["heuristic"] = {{"unavailable", heur_error}};
    return out;
  }

  nlohmann::json welch_json(const std::vector<metrics::GroundTruth>& truths) const {
    nlohmann::json out = nlohmann::json::object();
    for (auto m : metrics::all_metrics()) {
      std::map<std::string, std::vector<double>> groups;
      for (const auto& gt : truths) groups[gt.algorithm].push_back(gt.metrics.at(m).mean);
      bool ok = groups.size() >= 2;
      for (auto& [k, v] : groups) ok = ok && v.size() >= 2;
      if (!ok) continue;  // not enough datasets per algorithm for this table
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& c : calibration::pairwise_welch_bonferroni(groups))
        rows.push_back({{"a", c.a},
                        {"b", c.b},
                        {"mean_diff", c.mean_diff},
                        {"t", c.t},
                        {"df", c.df},
                        {"p_corrected", c.p_corrected},
                        {"cohen_d", c.cohen_d},
                        {"significant", c.significant},
                        {"degenerate", c.degenerate}});
      out[metrics::metric_key(m)] = rows;
    }
    return out;
  }

  // Width and agreement probes each need structure a small campaign may lack
  // (both dataset partitions; at least two models). Compute them
  // independently and record why a missing half is missing.
  nlohmann::json probes_json(const std::vector<calibration::AggregatedPrediction>& aggregated,
                             const calibration::CoverageReport& report,
                             const calibration::DatasetRegistry& registry) const {
    calibration::ProbeStats ps;
    ps.synthetic_boost_by_algorithm = report.synthetic_boost_by_algorithm;
    std::string width_err, agree_err;
    bool have_widths = false, have_agreement = false;
    try {
      ps.widths = calibration::range_width_stats(aggregated, registry);
      have_widths = true;
    } catch (const std::exception& e) {
      width_err = e.what();
    }
    try {
      ps.agreement = calibration::agreement_stats(aggregated, registry);
      have_agreement = true;
    } catch (const std::exception& e) {
      agree_err = e.what();
    }
    auto j = calibration::to_json(ps);
    if (!have_widths) {
      for (const char* k : {"benchmark_width", "synthetic_width", "width_ratio",
                            "width_by_node_count"})
        j.erase(k);
      j["width_unavailable"] = width_err;
    }
    if (!have_agreement) {
      for (const char* k : {"agreement_by_dataset", "benchmark_mean_distance",
                            "synthetic_mean_distance", "distance_by_node_count"})
        j.erase(k);
      j["agreement_unavailable"] = agree_err;
    }
    return j;
  }

  nlohmann::json significance_json(const calibration::CoverageReport& report,
                                   const nlohmann::json& baselines) const {
    double p0 = baselines.at("random").at("coverage").get<double>();
    nlohmann::json out = nlohmann::json::object();
    std::map<std::string, std::pair<int, int>> counts;
    for (const auto& c : report.cells) {
      counts[c.model].first += c.covered;
      counts[c.model].second += 1;
    }
    for (auto& [model, kn] : counts) {
      nlohmann::json row = {{"covered", kn.first}, {"cells", kn.second}, {"null_rate", p0}};
      if (p0 > 0.0 && p0 < 1.0) {
        auto bt = calibration::binomial_test(kn.first, kn.second, p0);
        row["z"] = bt.z;
        row["p"] = bt.p;
      } else {
        row["unavailable"] = "degenerate null rate";
      }
      out[model] = row;
    }
    return out;
  }

  // ---- projections ----

  void write_csv(const std::string& name, const std::string& content) const {
    detail::write_text(evaluate_dir() / name, content);
  }

  // Every CSV below reads only from the consolidated JSON document.
  void write_csv_projections(const nlohmann::json& c) const {
    using detail::csv_num;
    {
      std::string s = "baseline,covered,cells,coverage\n";
      const auto& b = c.at("baselines");
      s += "random," + std::to_string(b.at("random").at("covered").get<int>()) + "," +
           std::to_string(b.at("random").at("cells").get<int>()) + "," +
           csv_num(b.at("random").at("coverage").get<double>()) + "\n";
      if (b.at("heuristic").contains("coverage"))
        s += "heuristic," + std::to_string(b.at("heuristic").at("covered").get<int>()) + "," +
             std::to_string(b.at("heuristic").at("cells").get<int>()) + "," +
             csv_num(b.at("heuristic").at("coverage").get<double>()) + "\n";
      write_csv("baselines.csv", s);
    }
    {
      std::string s = "metric,a,b,mean_diff,t,df,p_corrected,cohen_d,significant\n";
      for (auto& [metric, rows] : c.at("pairwise_welch").items())
        for (const auto& r : rows)
          s += metric + "," + r.at("a").get<std::string>() + "," + r.at("b").get<std::string>() +
               "," + csv_num(r.at("mean_diff").get<double>()) + "," +
               csv_num(r.at("t").get<double>()) + "," + csv_num(r.at("df").get<double>()) + "," +
               csv_num(r.at("p_corrected").get<double>()) + "," +
               csv_num(r.at("cohen_d").get<double>()) + "," +
               (r.at("significant").get<bool>() ? "1" : "0") + "\n";
      write_csv("pairwise_comparisons.csv", s);
    }
    if (!c.contains("coverage")) return;  // baselines-only run
    const auto& cov = c.at("coverage");
    {
      std::string s = "model,coverage,mean_score,z,p\n";
      for (auto& [model, v] : cov.at("by_model").items()) {
        s += model + "," + csv_num(v.get<double>()) + "," +
             csv_num(cov.at("mean_score_by_model").at(model).get<double>());
        const auto& sig = c.at("significance").at(model);
        if (sig.contains("z"))
          s += "," + csv_num(sig.at("z").get<double>()) + "," + csv_num(sig.at("p").get<double>());
        else
          s += ",,";
        s += "\n";
      }
      write_csv("coverage_by_model.csv", s);
    }
    {
      std::string s = "dataset,coverage\n";
      for (auto& [k, v] : cov.at("by_dataset").items())
        s += k + "," + csv_num(v.get<double>()) + "\n";
      write_csv("coverage_by_dataset.csv", s);
    }
    {
      std::string s = "algorithm,metric,coverage\n";
      for (auto& [a, inner] : cov.at("by_algorithm_metric").items())
        for (auto& [m, v] : inner.items()) s += a + "," + m + "," + csv_num(v.get<double>()) + "\n";
      write_csv("coverage_algorithm_metric.csv", s);
    }
    {
      std::string s = "partition,coverage\nbenchmark," +
                      csv_num(cov.at("benchmark_coverage").get<double>()) + "\nsynthetic," +
                      csv_num(cov.at("synthetic_coverage").get<double>()) + "\n";
      for (auto& [k, v] : cov.at("coverage_by_node_count").items())
        s += "synthetic_nodes_" + k + "," + csv_num(v.get<double>()) + "\n";
      write_csv("coverage_split.csv", s);
    }
    {
      std::string s = "algorithm,synthetic_boost\n";
      for (auto& [k, v] : cov.at("synthetic_boost_by_algorithm").items())
        s += k + "," + csv_num(v.get<double>()) + "\n";
      write_csv("synthetic_boost.csv", s);
    }
    const auto& probes = c.at("probes");
    if (probes.contains("benchmark_width")) {
      std::string s = "model,benchmark_width,synthetic_width,ratio\n";
      for (auto& [model, v] : probes.at("benchmark_width").items())
        s += model + "," + csv_num(v.get<double>()) + "," +
             csv_num(probes.at("synthetic_width").at(model).get<double>()) + "," +
             csv_num(probes.at("width_ratio").at(model).get<double>()) + "\n";
      write_csv("range_width_by_model.csv", s);
    }
    if (probes.contains("agreement_by_dataset")) {
      std::string s = "dataset,mean_distance,agreement_pct\n";
      for (auto& [ds, v] : probes.at("agreement_by_dataset").items())
        s += ds + "," + csv_num(v.at("mean_distance").get<double>()) + "," +
             csv_num(v.at("agreement_pct").get<double>()) + "\n";
      write_csv("agreement_by_dataset.csv", s);
    }
    {
      std::string s = "model,midpoint_cv_mean,width_cv_mean,cells,undefined_cells\n";
      for (auto& [model, v] : c.at("cv").items())
        s += model + "," + csv_num(v.at("midpoint_cv_mean").get<double>()) + "," +
             csv_num(v.at("width_cv_mean").get<double>()) + "," +
             std::to_string(v.at("cells").get<int>()) + "," +
             std::to_string(v.at("undefined_cells").get<int>()) + "\n";
      write_csv("cv_by_model.csv", s);
    }
  }

  void write_plots(const nlohmann::json& c) const {
    if (!c.contains("coverage")) {
      // Baselines-only: nothing model-shaped to draw.
      const auto& b = c.at("baselines");
      std::vector<std::string> labels{"random"};
      std::vector<double> vals{b.at("random").at("coverage").get<double>() * 100.0};
      if (b.at("heuristic").contains("coverage")) {
        labels.push_back("heuristic");
        vals.push_back(b.at("heuristic").at("coverage").get<double>() * 100.0);
      }
      svgplot::write_file((report_dir() / "coverage_by_model.svg").string(),
                          svgplot::bar_chart("Baseline coverage", labels,
                                             {{"coverage %", vals}}, "coverage %"));
      return;
    }
    const auto& cov = c.at("coverage");
    {
      std::vector<std::string> labels;
      std::vector<double> vals;
      for (auto& [model, v] : cov.at("by_model").items()) {
        labels.push_back(model);
        vals.push_back(v.get<double>() * 100.0);
      }
      svgplot::write_file((report_dir() / "coverage_by_model.svg").string(),
                          svgplot::bar_chart("Calibrated coverage by model", labels,
                                             {{"coverage %", vals}}, "coverage %"));
    }
    {
      std::vector<std::string> labels{"benchmark", "synthetic"};
      std::vector<double> vals{cov.at("benchmark_coverage").get<double>() * 100.0,
                               cov.at("synthetic_coverage").get<double>() * 100.0};
      svgplot::write_file((report_dir() / "benchmark_vs_synthetic.svg").string(),
                          svgplot::bar_chart("Benchmark vs synthetic coverage", labels,
                                             {{"coverage %", vals}}, "coverage %"));
    }
    if (!cov.at("coverage_by_node_count").empty()) {
      std::vector<double> xs, ys;
      for (auto& [k, v] : cov.at("coverage_by_node_count").items()) {
        xs.push_back(std::stod(k));
        ys.push_back(v.get<double>() * 100.0);
      }
      svgplot::write_file((report_dir() / "coverage_by_size.svg").string(),
                          svgplot::line_chart("Coverage across synthetic network sizes", xs,
                                              {{"coverage %", ys}}, "nodes", "coverage %"));
    }
    if (c.contains("probes")) {
      const auto& probes = c.at("probes");
      if (probes.contains("benchmark_width")) {
        std::vector<std::string> labels;
        std::vector<double> bench, synth;
        for (auto& [model, v] : probes.at("benchmark_width").items()) {
          labels.push_back(model);
          bench.push_back(v.get<double>());
          synth.push_back(probes.at("synthetic_width").at(model).get<double>());
        }
        svgplot::write_file((report_dir() / "width_by_model.svg").string(),
                            svgplot::bar_chart("Predicted range width by model", labels,
                                               {{"benchmark", bench}, {"synthetic", synth}},
                                               "mean width"));
      }
      if (probes.contains("distance_by_node_count") &&
          !probes.at("distance_by_node_count").empty()) {
        std::vector<double> xs, ys;
        for (auto& [k, v] : probes.at("distance_by_node_count").items()) {
          xs.push_back(std::stod(k));
          ys.push_back(v.get<double>());
        }
        svgplot::write_file((report_dir() / "agreement_by_size.svg").string(),
                            svgplot::line_chart("Cross-model distance by synthetic size", xs,
                                                {{"mean pairwise distance", ys}}, "nodes",
                                                "distance"));
      }
    }
  }

  config::CampaignConfig cfg_;
  CampaignOptions opt_;
  fs::path root_;
  std::string hash_;
  std::vector<PromptCell> prompt_cells_;
};

}  // namespace calibench::campaign
