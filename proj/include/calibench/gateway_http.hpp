#pragma once

// The real HTTP transport, kept out of gateway.hpp so translation units that
// only need replay or a mock never pull in the embedded HTTP client.

#include <string>
#include <vector>

#include <httplib.h>

#include "calibench/gateway.hpp"

namespace calibench::gateway {

class HttplibTransport : public Transport {
 public:
  explicit HttplibTransport(double timeout_s = 120.0) : timeout_s_(timeout_s) {}

  HttpResponse post(const std::string& base_url, const std::string& path,
                    const std::vector<Header>& headers, const std::string& body) override {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(std::chrono::duration<double>(timeout_s_));
    cli.set_read_timeout(std::chrono::duration<double>(timeout_s_));

    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type")
        content_type = v;  // httplib passes the content type separately
      else
        h.emplace(k, v);
    }
    auto res = cli.Post(path, h, body, content_type);
    if (!res) throw TransportError("connection failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  double timeout_s_;
};

}  // namespace calibench::gateway
