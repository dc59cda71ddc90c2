#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "logitest/test_model.hpp"

namespace logitest {

struct HttpResponseRecord {
  std::optional<int> status;
  std::map<std::string, std::string> headers;
  std::string body;
  std::int64_t latency_ms = 0;
  std::optional<std::string> transport_error;

  bool ok_2xx() const { return status && *status >= 200 && *status <= 299; }
};

// RFC 3986 unreserved characters pass through; everything else becomes %XX.
std::string percent_encode(std::string_view text);

// Builds the concrete path from the template and the request's path values.
std::string instantiate_path(const GeneratedRequest& request);

// Fires the request at base_url and captures whatever happens. Transport
// failures come back in the record instead of being thrown; the budget
// accounting upstream treats them as spent requests either way.
HttpResponseRecord do_request(const GeneratedRequest& request, const std::string& base_url,
                              int timeout_seconds = 30);

// Append-only JSONL log of every wire exchange, one line per request.
class ExchangeLog {
 public:
  ExchangeLog() = default;

  // Opens the log file, truncating any previous content.
  void open(const std::string& path);
  bool is_open() const { return !path_.empty(); }
  const std::string& path() const { return path_; }

  // Writes one exchange line and returns its sequence number (1-based).
  std::uint64_t record(const GeneratedRequest& request, const HttpResponseRecord& response);

  std::uint64_t entries() const { return next_seq_ - 1; }

 private:
  std::string path_;
  std::uint64_t next_seq_ = 1;
};

nlohmann::json to_json(const HttpResponseRecord& response);

}  // namespace logitest
