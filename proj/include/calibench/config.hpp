#pragma once

// Declarative campaign configuration: which datasets, algorithms, models,
// and formulations to run, at what scale, in which query mode. Validation is
// all-or-nothing and happens before any computation; the canonical form (all
// defaults materialized, keys sorted) is what gets hashed, so two configs
// that mean the same thing share a hash.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibench/algorithms.hpp"
#include "calibench/gateway.hpp"
#include "calibench/hash.hpp"
#include "calibench/metrics.hpp"
#include "calibench/predictions.hpp"
#include "calibench/version.hpp"

namespace calibench::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSpec {
  std::string id;
  std::string kind;  // "bif" or "synthetic"
  // bif
  std::string path;
  // synthetic
  int nodes = 0;
  double edge_prob = 0.0;
  std::string data = "gaussian";  // noise family: "gaussian" or "nongaussian"
  // common
  int n_samples = 0;  // 0 = inherit the campaign default
  std::string complexity = "sparse";

  bool synthetic() const { return kind == "synthetic"; }
};

struct QuerySettings {
  gateway::QueryMode mode = gateway::QueryMode::Replay;
  std::string replay_store;  // JSONL path; required for replay, written by record
  int concurrency = 1;
  int max_retries = 3;
  double backoff_base_s = 0.5;
};

struct CampaignConfig {
  std::uint64_t seed = 0;
  int runs = 10;
  int n_samples = 1000;
  std::string out_dir = "out";
  metrics::MetricMode metric_mode = metrics::MetricMode::Skeleton;
  std::vector<DatasetSpec> datasets;
  std::vector<algorithms::AlgorithmId> algos;
  algorithms::AlgoParams params;
  std::vector<gateway::EndpointConfig> models;
  std::vector<predictions::Formulation> formulations;
  QuerySettings query;
  std::filesystem::path base_dir;  // directory of the config file; resolves relative paths

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base_dir / fp;
  }

  int samples_for(const DatasetSpec& spec) const {
    return spec.n_samples > 0 ? spec.n_samples : n_samples;
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
}

inline metrics::MetricMode metric_mode_from_key(const std::string& key) {
  if (key == "skeleton") return metrics::MetricMode::Skeleton;
  if (key == "directed") return metrics::MetricMode::Directed;
  throw ConfigError("unknown metric_mode: " + key);
}

inline const char* metric_mode_key(metrics::MetricMode m) {
  return m == metrics::MetricMode::Skeleton ? "skeleton" : "directed";
}

}  // namespace detail

// The normalized document: every default written out, every enum as its
// key string. nlohmann keeps object keys sorted, so dump() is canonical.
inline nlohmann::json canonical_json(const CampaignConfig& cfg) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const auto& d : cfg.datasets) {
    nlohmann::json jd = {{"id", d.id},
                         {"kind", d.kind},
                         {"n_samples", d.n_samples},
                         {"complexity", d.complexity}};
    if (d.kind == "bif") {
      jd["path"] = d.path;
    } else {
      jd["nodes"] = d.nodes;
      jd["edge_prob"] = d.edge_prob;
      jd["data"] = d.data;
    }
    datasets.push_back(jd);
  }
  nlohmann::json algos = nlohmann::json::array();
  for (auto a : cfg.algos) algos.push_back(algorithms::algorithm_key(a));
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : cfg.models) {
    nlohmann::json jm = {{"id", m.id},         {"base_url", m.base_url},
                         {"path", m.path},     {"model", m.model},
                         {"auth_env", m.auth_env}};
    if (m.temperature) jm["temperature"] = *m.temperature;
    models.push_back(jm);
  }
  nlohmann::json forms = nlohmann::json::array();
  for (auto f : cfg.formulations) forms.push_back(predictions::formulation_key(f));
  // out_dir is deliberately absent: it moves the results, it does not change
  // them, and reruns into fresh directories must hash (and byte-compare)
  // identically.
  return {{"seed", cfg.seed},
          {"runs", cfg.runs},
          {"n_samples", cfg.n_samples},
          {"metric_mode", detail::metric_mode_key(cfg.metric_mode)},
          {"datasets", datasets},
          {"algorithms", algos},
          {"params", cfg.params.to_json()},
          {"models", models},
          {"formulations", forms},
          {"query",
           {{"mode", gateway::query_mode_key(cfg.query.mode)},
            {"replay_store", cfg.query.replay_store},
            {"concurrency", cfg.query.concurrency},
            {"max_retries", cfg.query.max_retries},
            {"backoff_base_s", cfg.query.backoff_base_s}}}};
}

inline std::string config_hash(const CampaignConfig& cfg) {
  return hash::sha256_hex(canonical_json(cfg).dump());
}

inline CampaignConfig parse_config(const nlohmann::json& j, std::filesystem::path base_dir) {
  detail::require_keys(j,
                       {"seed", "runs", "n_samples", "out_dir", "metric_mode", "datasets",
                        "algorithms", "params", "models", "formulations", "query"},
                       "config");
  CampaignConfig cfg;
  cfg.base_dir = std::move(base_dir);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.runs = j.value("runs", 10);
  cfg.n_samples = j.value("n_samples", 1000);
  cfg.out_dir = j.value("out_dir", std::string("out"));
  cfg.metric_mode = detail::metric_mode_from_key(j.value("metric_mode", std::string("skeleton")));
  if (cfg.runs < 2) throw ConfigError("runs must be at least 2");
  if (cfg.n_samples < 2) throw ConfigError("n_samples must be at least 2");

  if (!j.contains("datasets") || j.at("datasets").empty())
    throw ConfigError("config needs at least one dataset");
  std::set<std::string> ids;
  for (const auto& jd : j.at("datasets")) {
    detail::require_keys(
        jd, {"id", "kind", "path", "nodes", "edge_prob", "data", "n_samples", "complexity"},
        "dataset entry");
    DatasetSpec d;
    d.id = jd.at("id").get<std::string>();
    d.kind = jd.at("kind").get<std::string>();
    d.n_samples = jd.value("n_samples", 0);
    d.complexity = jd.value("complexity", std::string("sparse"));
    if (d.id.empty()) throw ConfigError("dataset id must be nonempty");
    if (!ids.insert(d.id).second) throw ConfigError("duplicate dataset id: " + d.id);
    if (d.kind == "bif") {
      d.path = jd.at("path").get<std::string>();
      if (!std::filesystem::exists(cfg.resolve(d.path)))
        throw ConfigError("dataset " + d.id + ": file not found: " +
                          cfg.resolve(d.path).string());
    } else if (d.kind == "synthetic") {
      d.nodes = jd.at("nodes").get<int>();
      d.edge_prob = jd.at("edge_prob").get<double>();
      d.data = jd.value("data", std::string("gaussian"));
      if (d.nodes < 2) throw ConfigError("dataset " + d.id + ": nodes must be at least 2");
      if (d.edge_prob < 0.0 || d.edge_prob > 1.0)
        throw ConfigError("dataset " + d.id + ": edge_prob must be in [0, 1]");
      if (d.data != "gaussian" && d.data != "nongaussian")
        throw ConfigError("dataset " + d.id + ": unknown data family: " + d.data);
    } else {
      throw ConfigError("dataset " + d.id + ": unknown kind: " + d.kind);
    }
    cfg.datasets.push_back(std::move(d));
  }

  if (!j.contains("algorithms") || j.at("algorithms").empty())
    throw ConfigError("config needs at least one algorithm");
  std::set<std::string> algo_keys;
  for (const auto& ja : j.at("algorithms")) {
    std::string key = ja.get<std::string>();
    if (!algo_keys.insert(key).second) throw ConfigError("duplicate algorithm: " + key);
    cfg.algos.push_back(algorithms::algorithm_from_key(key));  // throws on unknown
  }
  if (j.contains("params")) cfg.params = algorithms::AlgoParams::from_json(j.at("params"));

  std::set<std::string> model_ids;
  for (const auto& jm : j.value("models", nlohmann::json::array())) {
    detail::require_keys(jm, {"id", "base_url", "path", "model", "auth_env", "temperature"},
                         "model entry");
    gateway::EndpointConfig m;
    m.id = jm.at("id").get<std::string>();
    m.model = jm.at("model").get<std::string>();
    m.base_url = jm.value("base_url", std::string());
    m.path = jm.value("path", std::string("/v1/chat/completions"));
    m.auth_env = jm.value("auth_env", std::string());
    if (jm.contains("temperature")) m.temperature = jm.at("temperature").get<double>();
    if (m.id.empty() || m.model.empty())
      throw ConfigError("model entries need nonempty id and model");
    if (!model_ids.insert(m.id).second) throw ConfigError("duplicate model id: " + m.id);
    cfg.models.push_back(std::move(m));
  }

  if (j.contains("formulations")) {
    std::set<std::string> fkeys;
    for (const auto& jf : j.at("formulations")) {
      std::string key = jf.get<std::string>();
      if (!fkeys.insert(key).second) throw ConfigError("duplicate formulation: " + key);
      cfg.formulations.push_back(predictions::formulation_from_key(key));
    }
  } else {
    for (auto f : predictions::all_formulations()) cfg.formulations.push_back(f);
  }

  if (j.contains("query")) {
    const auto& jq = j.at("query");
    detail::require_keys(jq, {"mode", "replay_store", "concurrency", "max_retries", "backoff_base_s"},
                         "query block");
    cfg.query.mode = gateway::query_mode_from_key(jq.value("mode", std::string("replay")));
    cfg.query.replay_store = jq.value("replay_store", std::string());
    cfg.query.concurrency = jq.value("concurrency", 1);
    cfg.query.max_retries = jq.value("max_retries", 3);
    cfg.query.backoff_base_s = jq.value("backoff_base_s", 0.5);
    if (cfg.query.concurrency < 1) throw ConfigError("query.concurrency must be at least 1");
  }
  if (cfg.query.mode == gateway::QueryMode::Replay && !cfg.models.empty()) {
    if (cfg.query.replay_store.empty())
      throw ConfigError("replay mode needs query.replay_store");
    if (!std::filesystem::exists(cfg.resolve(cfg.query.replay_store)))
      throw ConfigError("replay store not found: " + cfg.resolve(cfg.query.replay_store).string());
  }
  if (cfg.query.mode != gateway::QueryMode::Replay)
    for (const auto& m : cfg.models)
      if (m.base_url.empty())
        throw ConfigError("model " + m.id + " needs base_url for live/record mode");

  // Retry settings live on the endpoints at run time.
  for (auto& m : cfg.models) {
    m.max_retries = cfg.query.max_retries;
    m.backoff_base_s = cfg.query.backoff_base_s;
  }
  return cfg;
}

inline CampaignConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + file.string() + ": " + e.what());
  }
  auto dir = std::filesystem::absolute(file).parent_path();
  return parse_config(j, dir);
}

}  // namespace calibench::config
