// Campaign-level behavior: config validation and hashing, the replay-mode
// pipeline end to end in a temp directory, resume semantics, the manifest
// guard against mixing configs in one output tree, and ingest validation.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibench/campaign.hpp"
#include "calibench/config.hpp"
#include "calibench/gateway.hpp"

namespace fs = std::filesystem;
using namespace calibench;
using nlohmann::json;

namespace {

json base_config() {
  return json{{"seed", 77},
              {"runs", 3},
              {"n_samples", 150},
              {"metric_mode", "skeleton"},
              {"datasets", json::array({json{{"id", "syn4"},
                                             {"kind", "synthetic"},
                                             {"nodes", 4},
                                             {"edge_prob", 0.4},
                                             {"data", "gaussian"}}})},
              {"algorithms", json::array({"pc"})}};
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "calibench_campaign_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

campaign::CampaignOptions quiet_options(const fs::path& out) {
  campaign::CampaignOptions opt;
  opt.out_dir = out.string();
  opt.log = [](const std::string&) {};
  return opt;
}

// A compliant answer whose bounds encode the model so replay rows differ
// between models while every response still parses.
std::string canned_answer(const std::string& model) {
  double low = model == "alpha" ? 0.10 : 0.20;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "Precision: [%.2f, 0.95]\nRecall: [%.2f, 0.95]\nF1: [%.2f, 0.95]\nSHD: [0, 6]\n",
                low, low, low);
  return buf;
}

// Renders every prompt via a model-free config, then stores one canned
// answer per (model, prompt) under the gateway's content key.
void build_replay_store(const fs::path& dir, const fs::path& store_path,
                        const std::vector<std::pair<std::string, std::string>>& models) {
  auto cfg = config::parse_config(base_config(), dir);
  campaign::Campaign probe(cfg, quiet_options(dir / "probe_out"));
  probe.generate();
  probe.prompts();

  std::ofstream out(store_path);
  std::ifstream in(dir / "probe_out" / "prompts" / "prompts.jsonl");
  REQUIRE(in);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    const std::string prompt = row.at("prompt").get<std::string>();
    for (const auto& [id, wire] : models) {
      out << json{{"key", gateway::content_key(wire, prompt)},
                  {"model", wire},
                  {"prompt_sha", hash::sha256_hex(prompt)},
                  {"response", canned_answer(id)}}
                 .dump()
          << '\n';
    }
  }
  fs::remove_all(dir / "probe_out");
}

json config_with_models(const std::string& store_path) {
  json j = base_config();
  j["models"] = json::array({json{{"id", "alpha"}, {"model", "alpha-wire"}},
                             json{{"id", "beta"}, {"model", "beta-wire"}}});
  j["query"] = json{{"mode", "replay"}, {"replay_store", store_path}};
  return j;
}

}  // namespace

TEST_CASE("config hash ignores key order but tracks content", "[campaign]") {
  fs::path dir = fresh_dir("hash");
  auto a = config::parse_config(base_config(), dir);

  // Same content serialized with scrambled key order parses to the same hash.
  std::string text = base_config().dump();
  json reordered = json::parse(
      R"({"algorithms":["pc"],"datasets":[{"data":"gaussian","edge_prob":0.4,"id":"syn4","kind":"synthetic","nodes":4}],"metric_mode":"skeleton","n_samples":150,"runs":3,"seed":77})");
  auto b = config::parse_config(reordered, dir);
  CHECK(config::config_hash(a) == config::config_hash(b));

  json changed = base_config();
  changed["seed"] = 78;
  auto c = config::parse_config(changed, dir);
  CHECK(config::config_hash(a) != config::config_hash(c));
}

TEST_CASE("config validation rejects malformed inputs", "[campaign]") {
  fs::path dir = fresh_dir("validation");
  auto expect_error = [&](json j, const std::string& fragment) {
    try {
      config::parse_config(j, dir);
      FAIL("expected ConfigError for: " + fragment);
    } catch (const config::ConfigError& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring(fragment));
    }
  };

  json unknown_top = base_config();
  unknown_top["typo_key"] = 1;
  expect_error(unknown_top, "unknown key \"typo_key\"");

  json unknown_ds = base_config();
  unknown_ds["datasets"][0]["color"] = "red";
  expect_error(unknown_ds, "unknown key \"color\"");

  json dup = base_config();
  dup["datasets"].push_back(dup["datasets"][0]);
  expect_error(dup, "duplicate dataset id");

  json few_runs = base_config();
  few_runs["runs"] = 1;
  expect_error(few_runs, "runs must be at least 2");

  json bad_bif = base_config();
  bad_bif["datasets"][0] = json{{"id", "net"}, {"kind", "bif"}, {"path", "missing.bif"}};
  expect_error(bad_bif, "file not found");

  json bad_family = base_config();
  bad_family["datasets"][0]["data"] = "cauchy";
  expect_error(bad_family, "unknown data family");

  json bad_algo = base_config();
  bad_algo["algorithms"] = json::array({"ges"});
  CHECK_THROWS(config::parse_config(bad_algo, dir));

  json bad_query = base_config();
  bad_query["query"] = json{{"retries", 3}};
  expect_error(bad_query, "unknown key \"retries\"");
}

TEST_CASE("replay mode with models requires an existing store", "[campaign]") {
  fs::path dir = fresh_dir("replay_req");
  json with_models = config_with_models("");
  with_models["query"].erase("replay_store");
  try {
    config::parse_config(with_models, dir);
    FAIL("expected ConfigError");
  } catch (const config::ConfigError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("replay mode needs"));
  }

  json missing_store = config_with_models("absent.jsonl");
  CHECK_THROWS_AS(config::parse_config(missing_store, dir), config::ConfigError);

  // Without models, replay mode needs no store at all.
  CHECK_NOTHROW(config::parse_config(base_config(), dir));

  // Live and record modes need endpoints instead.
  json live = config_with_models("");
  live["query"] = json{{"mode", "live"}};
  try {
    config::parse_config(live, dir);
    FAIL("expected ConfigError");
  } catch (const config::ConfigError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("needs base_url"));
  }

  // Relative paths resolve against the config's directory.
  auto cfg = config::parse_config(base_config(), dir);
  CHECK(cfg.resolve("store.jsonl") == dir / "store.jsonl");
  CHECK(cfg.resolve(dir / "abs.jsonl") == dir / "abs.jsonl");

  // Per-dataset sample counts override the global default.
  config::DatasetSpec spec;
  spec.n_samples = 0;
  CHECK(cfg.samples_for(spec) == 150);
  spec.n_samples = 999;
  CHECK(cfg.samples_for(spec) == 999);
}

TEST_CASE("replay campaign runs end to end and resumes deterministically", "[campaign]") {
  fs::path dir = fresh_dir("pipeline");
  fs::path store = dir / "store.jsonl";
  build_replay_store(dir, store, {{"alpha", "alpha-wire"}, {"beta", "beta-wire"}});

  auto cfg = config::parse_config(config_with_models(store.string()), dir);
  fs::path out = dir / "out";
  campaign::Campaign c(cfg, quiet_options(out));
  c.all();

  // One record per model x dataset x algorithm x formulation.
  std::ifstream rec(out / "predictions" / "records.jsonl");
  REQUIRE(rec);
  int n_records = 0;
  std::string line;
  while (std::getline(rec, line))
    if (!line.empty()) ++n_records;
  CHECK(n_records == 2 * 1 * 1 * 3);

  json consolidated = json::parse(slurp(out / "evaluate" / "consolidated.json"));
  CHECK(consolidated.at("config_hash") == config::config_hash(cfg));
  CHECK(consolidated.contains("baselines"));
  CHECK(consolidated.contains("pairwise_welch"));
  REQUIRE(consolidated.contains("coverage"));
  const auto& cov = consolidated.at("coverage");
  double overall = cov.at("overall").get<double>();
  CHECK(overall >= 0.0);
  CHECK(overall <= 1.0);

  // Complete grid: the overall rate is the mean of the per-model rates.
  double model_mean = 0.0;
  for (const auto& [k, v] : cov.at("by_model").items()) model_mean += v.get<double>();
  model_mean /= cov.at("by_model").size();
  CHECK(overall == Catch::Approx(model_mean));

  // Resume: a deleted ground-truth file is regenerated byte for byte.
  fs::path truth_file = out / "ground_truth" / "syn4__pc.json";
  REQUIRE(fs::exists(truth_file));
  std::string before = slurp(truth_file);
  fs::remove(truth_file);
  campaign::Campaign c2(cfg, quiet_options(out));
  c2.ground_truth();
  CHECK(slurp(truth_file) == before);

  // Manifest guard: a different config may not reuse the output tree.
  json other = config_with_models(store.string());
  other["seed"] = 78;
  auto cfg_other = config::parse_config(other, dir);
  campaign::Campaign c3(cfg_other, quiet_options(out));
  CHECK_THROWS_AS(c3.generate(), campaign::CampaignError);
}

TEST_CASE("ingest validates rows and quarantines unparseable answers", "[campaign]") {
  fs::path dir = fresh_dir("ingest");
  json with_model = base_config();
  with_model["models"] = json::array({json{{"id", "alpha"}, {"model", "alpha-wire"}}});
  // Replay mode with models would demand a store; ingest does not query, so
  // record mode with a base_url keeps validation happy.
  with_model["query"] = json{{"mode", "record"}};
  with_model["models"][0]["base_url"] = "http://unused.test";
  auto cfg_m = config::parse_config(with_model, dir);

  fs::path out = dir / "out";
  campaign::Campaign c(cfg_m, quiet_options(out));
  c.generate();
  c.ground_truth();

  auto row = [](const std::string& model, const std::string& f, const std::string& resp) {
    return json{{"model", model},
                {"dataset", "syn4"},
                {"algorithm", "pc"},
                {"formulation", f},
                {"response", resp}}
        .dump();
  };

  fs::path bad_model = dir / "bad_model.jsonl";
  std::ofstream(bad_model) << row("gamma", "f1", canned_answer("alpha")) << '\n';
  try {
    campaign::Campaign(cfg_m, quiet_options(out)).ingest(bad_model);
    FAIL("expected CampaignError");
  } catch (const campaign::CampaignError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("unknown model gamma"));
  }

  fs::path mixed = dir / "mixed.jsonl";
  {
    std::ofstream f(mixed);
    f << row("alpha", "f1", canned_answer("alpha")) << '\n';
    f << row("alpha", "f2", "I cannot estimate these ranges.") << '\n';
    f << row("alpha", "f3", canned_answer("alpha")) << '\n';
  }
  campaign::Campaign(cfg_m, quiet_options(out)).ingest(mixed);
  CHECK(slurp(out / "predictions" / "quarantine.jsonl").find("missing metric line") !=
        std::string::npos);

  // Re-ingesting the same cell is an error, not a silent overwrite.
  fs::path dup = dir / "dup.jsonl";
  std::ofstream(dup) << row("alpha", "f1", canned_answer("alpha")) << '\n';
  try {
    campaign::Campaign(cfg_m, quiet_options(out)).ingest(dup);
    FAIL("expected CampaignError");
  } catch (const campaign::CampaignError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("duplicate cell"));
  }

  // The f2 gap makes aggregation impossible; evaluate says which cell.
  try {
    campaign::Campaign(cfg_m, quiet_options(out)).evaluate();
    FAIL("expected MissingCellsError");
  } catch (const calibration::MissingCellsError& e) {
    REQUIRE_FALSE(e.missing.empty());
    CHECK_THAT(e.missing[0], Catch::Matchers::ContainsSubstring("alpha|syn4|pc"));
  }

  // Baselines-only evaluation needs no predictions at all.
  campaign::CampaignOptions opt = quiet_options(out);
  opt.baselines_only = true;
  campaign::Campaign baseline_only(cfg_m, opt);
  baseline_only.evaluate();
  json consolidated = json::parse(slurp(out / "evaluate" / "consolidated.json"));
  CHECK(consolidated.contains("baselines"));
  CHECK_FALSE(consolidated.contains("coverage"));
}
