#pragma once

// Performance-range elicitation: renders the three prompt formulations,
// parses model answers back into per-metric ranges, and averages the three
// formulations into one range per metric. Parsing is deliberately forgiving
// about placement (reasoning text may precede the answer block; the last
// occurrence of each metric line wins) and strict about shape.

#include <array>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibench/metrics.hpp"

namespace calibench::predictions {

enum class Formulation { F1, F2, F3 };

inline const char* formulation_key(Formulation f) {
  switch (f) {
    case Formulation::F1: return "f1";
    case Formulation::F2: return "f2";
    case Formulation::F3: return "f3";
  }
  throw std::logic_error("formulation_key: bad enum");
}

inline Formulation formulation_from_key(const std::string& key) {
  if (key == "f1") return Formulation::F1;
  if (key == "f2") return Formulation::F2;
  if (key == "f3") return Formulation::F3;
  throw std::invalid_argument("unknown formulation: " + key);
}

inline std::array<Formulation, 3> all_formulations() {
  return {Formulation::F1, Formulation::F2, Formulation::F3};
}

// Everything a prompt template needs to know about one experimental condition.
struct ConditionMeta {
  std::string dataset_name;
  int n_nodes = 0;
  int n_samples = 0;
  std::string data_type;       // "discrete" or "continuous"
  std::string complexity;      // coarse tag such as "sparse" or "dense"
  std::string algorithm_name;  // display name, e.g. "PC"
};

// One predicted interval for one metric. Bounds are kept exactly as the
// model stated them; out-of-domain values are the caller's problem to flag.
struct PredictedRange {
  metrics::MetricName metric = metrics::MetricName::Precision;
  double low = 0.0;
  double high = 0.0;
};

using RangeSet = std::array<PredictedRange, 4>;

struct MetricDomain {
  double low;
  double high;
};

inline MetricDomain metric_domain(metrics::MetricName m,
                                  double max_shd = std::numeric_limits<double>::infinity()) {
  if (m == metrics::MetricName::Shd) return {0.0, max_shd};
  return {0.0, 1.0};
}

// Flags rather than clamps: a stated bound outside the metric's domain stays
// in the data, it just fails this check.
inline bool range_in_domain(const PredictedRange& r, const MetricDomain& dom) {
  return r.low >= dom.low && r.high <= dom.high;
}

namespace detail {

inline const char* answer_block() {
  return
      "Precision: [X.XX, X.XX]\n"
      "Recall: [X.XX, X.XX]\n"
      "F1: [X.XX, X.XX]\n"
      "SHD: [X, X]\n";
}

}  // namespace detail

// Fills one of the three templates. The three differ in framing, not in the
// required output shape, which keeps answers comparable across formulations.
inline std::string render_prompt(Formulation f, const ConditionMeta& meta) {
  if (meta.n_nodes <= 0 || meta.n_samples <= 0)
    throw std::invalid_argument("render_prompt: node and sample counts must be positive");

  std::string out;
  switch (f) {
    case Formulation::F1:
      out += "You are an expert in causal discovery algorithms.\n\n";
      out += "Dataset: " + meta.dataset_name + "\n";
      out += "Variables: " + std::to_string(meta.n_nodes) + "\n";
      out += "Samples: " + std::to_string(meta.n_samples) + "\n";
      out += "Data type: " + meta.data_type + "\n\n";
      out += "Algorithm: " + meta.algorithm_name + "\n\n";
      out += "Estimate performance ranges for all four metrics:\n\n";
      out += detail::answer_block();
      out += "\nCRITICAL: Output ONLY these four lines. No reasoning, no explanations, no preamble.\n";
      return out;
    case Formulation::F2:
      out += "You are an expert in causal discovery algorithms.\n\n";
      out += "Dataset: " + meta.dataset_name + "\n";
      out += "Variables: " + std::to_string(meta.n_nodes) + "\n";
      out += "Samples: " + std::to_string(meta.n_samples) + "\n";
      out += "Complexity: " + meta.complexity + "\n\n";
      out += "Algorithm: " + meta.algorithm_name + "\n\n";
      out += "Before predicting, reason through:\n\n";
      out += "Core assumptions of the algorithm?\n";
      out += "Does the dataset satisfy these assumptions?\n";
      out += "How does complexity affect reliability?\n";
      out += "What range is realistic?\n\n";
      out += "CRITICAL: After reasoning, output ONLY:\n\n";
      out += detail::answer_block();
      return out;
    case Formulation::F3:
      out += "You are a statistician evaluating causal discovery algorithms.\n\n";
      out += "A researcher repeatedly runs " + meta.algorithm_name + " on " + meta.dataset_name +
             " with different random seeds.\n\n";
      out += "Dataset characteristics:\n";
      out += "Variables: " + std::to_string(meta.n_nodes) + "\n";
      out += "Samples: " + std::to_string(meta.n_samples) + "\n";
      out += "Data type: " + meta.data_type + "\n\n";
      out += "What ranges capture 95% of typical outcomes?\n\n";
      out += "CRITICAL: Output ONLY:\n\n";
      out += detail::answer_block();
      return out;
  }
  throw std::logic_error("render_prompt: bad enum");
}

struct ParseOutcome {
  bool ok = false;
  RangeSet ranges{};
  std::string error;  // diagnostic when !ok
};

namespace detail {

// Last match wins so a reasoning preamble that mentions tentative ranges does
// not shadow the final answer block.
inline bool last_range_match(const std::string& text, const std::string& name, double& low,
                             double& high, bool& saw_line) {
  static const std::string num = R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";
  std::regex strict("\\b" + name + R"(\s*:\s*\[\s*()" + num + R"()\s*,\s*()" + num + R"()\s*\])");
  bool found = false;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), strict);
       it != std::sregex_iterator(); ++it) {
    low = std::stod((*it)[1].str());
    high = std::stod((*it)[2].str());
    found = true;
  }
  if (found) {
    saw_line = true;
    return true;
  }
  std::regex loose("\\b" + name + R"(\s*:\s*\[[^\]]*\])");
  saw_line = std::regex_search(text, loose);
  return false;
}

}  // namespace detail

// Extracts the four metric ranges from a raw model answer. Never throws for
// malformed input; the outcome carries a diagnostic naming the first problem
// in canonical metric order.
inline ParseOutcome parse_response(const std::string& text) {
  ParseOutcome out;
  int idx = 0;
  for (auto m : metrics::all_metrics()) {
    const std::string name = metrics::metric_key(m);
    double low = 0.0, high = 0.0;
    bool saw_line = false;
    if (!detail::last_range_match(text, name, low, high, saw_line)) {
      out.error = saw_line ? "non-numeric range for metric " + name
                           : "missing metric line: " + name;
      return out;
    }
    if (low > high) {
      out.error = "inverted bounds for metric " + name;
      return out;
    }
    out.ranges[idx++] = {m, low, high};
  }
  out.ok = true;
  return out;
}

// One parsed answer: which model said what about which condition.
struct PredictionRecord {
  std::string model;
  std::string dataset;
  std::string algorithm;
  Formulation formulation = Formulation::F1;
  RangeSet ranges{};
  std::string response;
  std::int64_t timestamp = 0;
};

class AggregationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Means of the three lows and three highs, metric by metric. Requires exactly
// the three formulations (order irrelevant) for a single (model, condition).
inline RangeSet aggregate_formulations(const std::vector<PredictionRecord>& records) {
  std::array<int, 3> seen{};
  for (const auto& r : records) ++seen[static_cast<int>(r.formulation)];
  std::string missing, dup;
  for (auto f : all_formulations()) {
    int c = seen[static_cast<int>(f)];
    if (c == 0) missing += std::string(missing.empty() ? "" : ", ") + formulation_key(f);
    if (c > 1) dup += std::string(dup.empty() ? "" : ", ") + formulation_key(f);
  }
  if (!missing.empty()) throw AggregationError("missing formulation(s): " + missing);
  if (!dup.empty()) throw AggregationError("duplicate formulation(s): " + dup);

  RangeSet out{};
  int idx = 0;
  for (auto m : metrics::all_metrics()) {
    double lo = 0.0, hi = 0.0;
    for (const auto& r : records) {
      lo += r.ranges[idx].low;
      hi += r.ranges[idx].high;
    }
    out[idx] = {m, lo / 3.0, hi / 3.0};
    ++idx;
  }
  return out;
}

inline nlohmann::json to_json(const PredictionRecord& rec) {
  nlohmann::json ranges = nlohmann::json::object();
  for (const auto& r : rec.ranges)
    ranges[metrics::metric_key(r.metric)] = {{"low", r.low}, {"high", r.high}};
  return {{"model", rec.model},
          {"dataset", rec.dataset},
          {"algorithm", rec.algorithm},
          {"formulation", formulation_key(rec.formulation)},
          {"ranges", ranges},
          {"response", rec.response},
          {"timestamp", rec.timestamp}};
}

inline PredictionRecord prediction_from_json(const nlohmann::json& j) {
  PredictionRecord rec;
  rec.model = j.at("model").get<std::string>();
  rec.dataset = j.at("dataset").get<std::string>();
  rec.algorithm = j.at("algorithm").get<std::string>();
  rec.formulation = formulation_from_key(j.at("formulation").get<std::string>());
  const auto& ranges = j.at("ranges");
  int idx = 0;
  for (auto m : metrics::all_metrics()) {
    const auto& r = ranges.at(metrics::metric_key(m));
    rec.ranges[idx++] = {m, r.at("low").get<double>(), r.at("high").get<double>()};
  }
  rec.response = j.at("response").get<std::string>();
  rec.timestamp = j.at("timestamp").get<std::int64_t>();
  return rec;
}

// JSON-lines persistence, one record per line.
inline void write_prediction_records(const std::string& path,
                                     const std::vector<PredictionRecord>& recs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : recs) out << to_json(r).dump() << '\n';
}

inline std::vector<PredictionRecord> read_prediction_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<PredictionRecord> recs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    recs.push_back(prediction_from_json(nlohmann::json::parse(line)));
  }
  return recs;
}

}  // namespace calibench::predictions
