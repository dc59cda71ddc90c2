#include "logitest/http_executor.hpp"

#include <chrono>
#include <fstream>

#include "logitest/errors.hpp"
#include "logitest/httplib_shim.hpp"

namespace logitest {

using nlohmann::json;

std::string percent_encode(std::string_view text) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    bool unreserved = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                      c == '-' || c == '.' || c == '_' || c == '~';
    if (unreserved) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

std::string instantiate_path(const GeneratedRequest& request) {
  std::string path;
  path.reserve(request.path.size());
  std::size_t pos = 0;
  while (pos < request.path.size()) {
    if (request.path[pos] != '{') {
      path += request.path[pos++];
      continue;
    }
    auto end = request.path.find('}', pos);
    if (end == std::string::npos) {
      path += request.path.substr(pos);
      break;
    }
    std::string name = request.path.substr(pos + 1, end - pos - 1);
    auto it = request.path_values.find(name);
    path += it == request.path_values.end() ? "{" + name + "}" : percent_encode(it->second);
    pos = end + 1;
  }
  return path;
}

HttpResponseRecord do_request(const GeneratedRequest& request, const std::string& base_url,
                              int timeout_seconds) {
  HttpResponseRecord record;
  auto started = std::chrono::steady_clock::now();
  auto finish = [&] {
    record.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    return record;
  };

  std::string path = instantiate_path(request);
  httplib::Params params;
  for (const auto& [name, value] : request.query_values) params.emplace(name, value);
  if (!params.empty()) path += "?" + httplib::detail::params_to_query_str(params);

  httplib::Client client(base_url);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  client.set_follow_location(true);

  httplib::Headers headers;
  for (const auto& [name, value] : request.header_values) headers.emplace(name, value);

  std::string body = request.body ? request.body->dump() : "";
  const char* content_type = "application/json";

  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(path, headers);
  } else if (request.method == "DELETE") {
    result = request.body ? client.Delete(path, headers, body, content_type)
                          : client.Delete(path, headers);
  } else if (request.method == "POST") {
    result = client.Post(path, headers, body, content_type);
  } else if (request.method == "PUT") {
    result = client.Put(path, headers, body, content_type);
  } else if (request.method == "PATCH") {
    result = client.Patch(path, headers, body, content_type);
  } else {
    record.transport_error = "unsupported method " + request.method;
    return finish();
  }

  if (!result) {
    record.transport_error = httplib::to_string(result.error());
    return finish();
  }
  record.status = result->status;
  for (const auto& [name, value] : result->headers) record.headers[name] = value;
  record.body = result->body;
  return finish();
}

void ExchangeLog::open(const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open exchange log " + path);
  path_ = path;
  next_seq_ = 1;
}

std::uint64_t ExchangeLog::record(const GeneratedRequest& request,
                                  const HttpResponseRecord& response) {
  if (path_.empty()) throw IoError("exchange log was never opened");
  std::uint64_t seq = next_seq_++;
  auto now = std::chrono::system_clock::now().time_since_epoch();
  json line{{"seq", seq},
            {"ts_ms", std::chrono::duration_cast<std::chrono::milliseconds>(now).count()},
            {"api", request.api},
            {"method", request.method},
            {"path", request.path},
            {"request", to_json(request)},
            {"response", to_json(response)}};
  std::ofstream file(path_, std::ios::app);
  if (!file) throw IoError("cannot append to exchange log " + path_);
  file << line.dump() << "\n";
  file.flush();
  return seq;
}

json to_json(const HttpResponseRecord& response) {
  json out;
  if (response.status) out["status"] = *response.status;
  if (response.transport_error) out["transport_error"] = *response.transport_error;
  out["headers"] = response.headers;
  out["body"] = response.body;
  out["latency_ms"] = response.latency_ms;
  return out;
}

}  // namespace logitest
