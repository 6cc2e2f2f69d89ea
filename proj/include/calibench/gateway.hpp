#pragma once

// Chat-completion gateway with three modes: live talks to an endpoint,
// record does the same and captures every answer, replay serves captured
// answers and never constructs a transport call. The replay store is keyed
// by a content hash of (model, prompt) so editing a prompt template
// invalidates stale recordings instead of silently replaying them.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calibench/hash.hpp"

namespace calibench::gateway {

enum class QueryMode { Live, Record, Replay };

inline const char* query_mode_key(QueryMode m) {
  switch (m) {
    case QueryMode::Live: return "live";
    case QueryMode::Record: return "record";
    case QueryMode::Replay: return "replay";
  }
  throw std::logic_error("query_mode_key: bad enum");
}

inline QueryMode query_mode_from_key(const std::string& key) {
  if (key == "live") return QueryMode::Live;
  if (key == "record") return QueryMode::Record;
  if (key == "replay") return QueryMode::Replay;
  throw std::invalid_argument("unknown query mode: " + key);
}

struct EndpointConfig {
  std::string id;        // short handle used in output tables and filenames
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;     // wire-level model name sent in the request body
  std::string auth_env;  // name of the env var holding the bearer token; empty = no auth
  std::optional<double> temperature;  // omitted from the request when absent
  int max_retries = 3;
  double backoff_base_s = 0.5;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using Header = std::pair<std::string, std::string>;

// Injected so tests can count, fake, or forbid network activity.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path,
                            const std::vector<Header>& headers, const std::string& body) = 0;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayMissError : public std::runtime_error {
 public:
  explicit ReplayMissError(std::string k)
      : std::runtime_error("replay store has no entry for key " + k), key(std::move(k)) {}
  std::string key;
};

inline std::string content_key(const std::string& model, const std::string& prompt) {
  return hash::sha256_hex(model + "\n" + prompt);
}

// Keyed response cache persisted as JSON-lines of
// {key, model, prompt_sha, response}. Reads are concurrent; appends are
// serialized and flushed per record so a crash loses at most the in-flight
// row.
class ReplayStore {
 public:
  ReplayStore() = default;

  // Merges rows from a JSON-lines file into the store.
  void load_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read replay store " + file.string());
    std::string line;
    std::lock_guard lock(mu_);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      rows_[j.at("key").get<std::string>()] = j.at("response").get<std::string>();
    }
  }

  // Future put() calls also append to this file.
  void open_append(const std::filesystem::path& file) {
    std::lock_guard lock(mu_);
    append_path_ = file;
  }

  std::optional<std::string> lookup(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = rows_.find(key);
    if (it == rows_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& key, const std::string& model, const std::string& prompt_sha,
           const std::string& response) {
    std::lock_guard lock(mu_);
    rows_[key] = response;
    if (!append_path_.empty()) {
      std::ofstream out(append_path_, std::ios::app);
      if (!out) throw std::runtime_error("cannot append to replay store " + append_path_.string());
      out << nlohmann::json{{"key", key},
                            {"model", model},
                            {"prompt_sha", prompt_sha},
                            {"response", response}}
                 .dump()
          << '\n';
      out.flush();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return rows_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> rows_;
  std::filesystem::path append_path_;
};

// One model endpoint in one query mode. Thread-safe: state is the config
// plus the (already thread-safe) store.
class ModelGateway {
 public:
  using Sleeper = std::function<void(double seconds)>;

  ModelGateway(QueryMode mode, EndpointConfig endpoint, Transport* transport, ReplayStore* store,
               Sleeper sleeper = {})
      : mode_(mode),
        ep_(std::move(endpoint)),
        transport_(transport),
        store_(store),
        sleep_(sleeper ? std::move(sleeper) : Sleeper([](double s) {
          std::this_thread::sleep_for(std::chrono::duration<double>(s));
        })) {
    if (mode_ != QueryMode::Replay && transport_ == nullptr)
      throw std::invalid_argument("gateway: live/record modes need a transport");
    if (mode_ != QueryMode::Live && store_ == nullptr)
      throw std::invalid_argument("gateway: record/replay modes need a store");
  }

  QueryMode mode() const { return mode_; }
  const EndpointConfig& endpoint() const { return ep_; }

  std::string query(const std::string& prompt) {
    const std::string key = content_key(ep_.model, prompt);
    if (mode_ == QueryMode::Replay) {
      auto hit = store_->lookup(key);
      if (!hit) throw ReplayMissError(key);
      return *hit;
    }
    std::string text = post_with_retries(prompt);
    if (mode_ == QueryMode::Record) store_->put(key, ep_.model, hash::sha256_hex(prompt), text);
    return text;
  }

 private:
  std::string post_with_retries(const std::string& prompt) {
    nlohmann::json body = {{"model", ep_.model},
                           {"messages", {{{"role", "user"}, {"content", prompt}}}}};
    if (ep_.temperature) body["temperature"] = *ep_.temperature;

    std::vector<Header> headers{{"Content-Type", "application/json"}};
    if (!ep_.auth_env.empty()) {
      const char* token = std::getenv(ep_.auth_env.c_str());
      if (token == nullptr || *token == '\0')
        throw TransportError("auth environment variable " + ep_.auth_env + " is not set");
      headers.emplace_back("Authorization", std::string("Bearer ") + token);
    }

    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= ep_.max_retries; ++attempt) {
      if (attempt > 0) sleep_(ep_.backoff_base_s * std::ldexp(1.0, attempt - 1));
      HttpResponse r;
      try {
        r = transport_->post(ep_.base_url, ep_.path, headers, payload);
      } catch (const std::exception& e) {
        last_error = e.what();  // connection-level failure: retriable
        continue;
      }
      if (r.status == 200) return extract_text(r.body);
      if (r.status == 429 || r.status >= 500) {
        last_error = "endpoint returned status " + std::to_string(r.status);
        continue;
      }
      throw TransportError("endpoint returned non-retriable status " + std::to_string(r.status) +
                           ": " + r.body);
    }
    throw TransportError("retries exhausted after " + std::to_string(ep_.max_retries + 1) +
                         " attempts; last error: " + last_error);
  }

  static std::string extract_text(const std::string& body) {
    try {
      auto j = nlohmann::json::parse(body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw TransportError(std::string("malformed completion response: ") + e.what());
    }
  }

  QueryMode mode_;
  EndpointConfig ep_;
  Transport* transport_;
  ReplayStore* store_;
  Sleeper sleep_;
};

}  // namespace calibench::gateway
