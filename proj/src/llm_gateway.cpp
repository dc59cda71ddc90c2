#include "logitest/llm_gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "logitest/errors.hpp"
#include "logitest/httplib_shim.hpp"
#include "logitest/text.hpp"

namespace logitest {

using nlohmann::json;

namespace {

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

// Splits "https://host:1234/v1" into the origin httplib::Client accepts and
// the path prefix to prepend to endpoint paths.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = base_url.find('/', host_start);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

bool transient_status(int status) { return status >= 500 || status == 429 || status == 408; }

// Runs `send` up to 1 + max_retries times, backing off between attempts.
// Returns the successful body; throws GatewayError otherwise.
std::string post_with_retries(const HttpProviderOptions& options, const std::string& endpoint,
                              const std::string& payload, std::uint64_t& retries_out) {
  if (options.base_url.empty())
    throw GatewayError("no provider base URL configured (set LLM_BASE_URL)");
  auto [origin, prefix] = split_base_url(options.base_url);
  std::string path = prefix + endpoint;

  std::string last_error;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) {
      ++retries_out;
      auto delay = std::chrono::milliseconds(options.initial_backoff_ms << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }

    httplib::Client client(origin);
    client.set_connection_timeout(options.timeout_seconds, 0);
    client.set_read_timeout(options.timeout_seconds, 0);
    client.set_write_timeout(options.timeout_seconds, 0);
    httplib::Headers headers;
    if (!options.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options.api_key);

    auto result = client.Post(path, headers, payload, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 401 || result->status == 403)
      throw GatewayError("provider rejected credentials (HTTP " + std::to_string(result->status) +
                         ")");
    if (transient_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200)
      throw GatewayError("provider returned HTTP " + std::to_string(result->status) + ": " +
                         result->body.substr(0, 200));
    return result->body;
  }
  throw GatewayError("provider unreachable after " + std::to_string(options.max_retries + 1) +
                     " attempts (" + last_error + ")");
}

json parse_provider_json(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) throw GatewayError("provider reply is not valid JSON");
  return parsed;
}

}  // namespace

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "?";
}

HttpProviderOptions HttpProviderOptions::completions_from_env() {
  HttpProviderOptions options;
  options.base_url = env_or_empty("LLM_BASE_URL");
  options.api_key = env_or_empty("LLM_API_KEY");
  return options;
}

HttpProviderOptions HttpProviderOptions::embeddings_from_env() {
  HttpProviderOptions options;
  options.base_url = env_or_empty("EMBEDDING_BASE_URL");
  if (options.base_url.empty()) options.base_url = env_or_empty("LLM_BASE_URL");
  options.api_key = env_or_empty("LLM_API_KEY");
  return options;
}

HttpCompletionProvider::HttpCompletionProvider(HttpProviderOptions options)
    : options_(std::move(options)) {}

std::string HttpCompletionProvider::complete(const CompletionRequest& request) {
  if (request.messages.empty()) throw GatewayError("completion request has no messages");

  json messages = json::array();
  for (const auto& message : request.messages)
    messages.push_back({{"role", std::string(to_string(message.role))},
                        {"content", message.content}});
  json payload{{"model", request.model}, {"messages", std::move(messages)}};
  if (request.temperature) payload["temperature"] = *request.temperature;
  if (request.max_output) payload["max_tokens"] = *request.max_output;

  std::uint64_t retries = 0;
  std::string body = post_with_retries(options_, "/chat/completions", payload.dump(), retries);
  json reply = parse_provider_json(body);

  std::lock_guard lock(mutex_);
  ++stats_.calls;
  stats_.retries += retries;
  if (reply.contains("usage") && reply["usage"].is_object()) {
    stats_.prompt_tokens += reply["usage"].value("prompt_tokens", 0);
    stats_.completion_tokens += reply["usage"].value("completion_tokens", 0);
  }
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw GatewayError("provider reply lacks choices[0].message.content");
  }
}

GatewayStats HttpCompletionProvider::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpProviderOptions options)
    : options_(std::move(options)) {}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(const EmbeddingBatch& batch) {
  if (batch.inputs.empty()) throw GatewayError("embedding batch is empty");

  json payload{{"model", batch.model}, {"input", batch.inputs}};
  std::uint64_t retries = 0;
  std::string body = post_with_retries(options_, "/embeddings", payload.dump(), retries);
  json reply = parse_provider_json(body);

  {
    std::lock_guard lock(mutex_);
    ++stats_.calls;
    stats_.retries += retries;
    if (reply.contains("usage") && reply["usage"].is_object())
      stats_.prompt_tokens += reply["usage"].value("prompt_tokens", 0);
  }

  if (!reply.contains("data") || !reply["data"].is_array())
    throw GatewayError("provider reply lacks a data array");
  std::vector<std::vector<double>> vectors(batch.inputs.size());
  std::size_t filled = 0;
  for (const auto& item : reply["data"]) {
    if (!item.is_object() || !item.contains("embedding")) continue;
    std::size_t index = item.value("index", filled);
    if (index >= vectors.size()) throw GatewayError("embedding index out of range");
    vectors[index] = item["embedding"].get<std::vector<double>>();
    ++filled;
  }
  if (filled != batch.inputs.size())
    throw GatewayError("provider returned " + std::to_string(filled) + " embeddings for " +
                       std::to_string(batch.inputs.size()) + " inputs");
  for (const auto& v : vectors)
    if (v.size() != vectors.front().size()) throw GatewayError("embedding dimensions differ");
  return vectors;
}

GatewayStats HttpEmbeddingProvider::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

MockCompletionProvider::MockCompletionProvider(Script script) : script_(std::move(script)) {}

MockCompletionProvider::Script MockCompletionProvider::load_script_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open mock script " + path);
  json doc = json::parse(file, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw MalformedDocument("mock script " + path + " is not a JSON object");
  Script script;
  for (const auto& [key, replies] : doc.items()) {
    if (!replies.is_array())
      throw MalformedDocument("mock script key '" + key + "' must map to an array");
    std::vector<std::string> list;
    for (const auto& reply : replies) {
      if (!reply.is_string())
        throw MalformedDocument("mock script key '" + key + "' has a non-string reply");
      list.push_back(reply.get<std::string>());
    }
    script[key] = std::move(list);
  }
  return script;
}

std::string MockCompletionProvider::routing_key(const CompletionRequest& request) {
  for (const auto& message : request.messages) {
    if (message.role != ChatRole::system) continue;
    auto start = message.content.find("[call:");
    if (start == std::string::npos) continue;
    auto end = message.content.find(']', start);
    if (end == std::string::npos) continue;
    return message.content.substr(start + 6, end - start - 6);
  }
  return "";
}

std::string MockCompletionProvider::complete(const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  calls_.push_back(request);

  std::string key = routing_key(request);
  if (key.empty())
    throw GatewayError("mock completion call carries no [call:...] routing key");

  std::string lookup = key;
  auto it = script_.find(lookup);
  bool wildcard = false;
  if (it == script_.end()) {
    auto hash = key.find('#');
    if (hash != std::string::npos) {
      lookup = key.substr(0, hash) + "#*";
      it = script_.find(lookup);
      wildcard = true;
    }
  }
  if (it == script_.end())
    throw ScriptExhausted("no scripted replies for routing key '" + key + "'");

  std::size_t& cursor = cursor_[lookup];
  if (cursor >= it->second.size()) {
    if (wildcard && !it->second.empty()) return it->second.back();
    throw ScriptExhausted("scripted replies for '" + lookup + "' are used up");
  }
  return it->second[cursor++];
}

std::vector<CompletionRequest> MockCompletionProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ < 2) throw FatalSetup("mock embedding dimension must be at least 2");
}

std::vector<std::vector<double>> MockEmbeddingProvider::embed(const EmbeddingBatch& batch) {
  std::vector<std::vector<double>> vectors;
  vectors.reserve(batch.inputs.size());
  for (const auto& text : batch.inputs) {
    std::vector<double> v(dimension_, 0.0);
    for (const auto& token : tokenize(text)) v[fnv1a64(token) % dimension_] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    vectors.push_back(std::move(v));
  }
  return vectors;
}

}  // namespace logitest
