#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace logitest {

enum class ChatRole { system, user, assistant };

std::string_view to_string(ChatRole role);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
  std::string model;
  std::vector<ChatMessage> messages;  // first message must be the system prompt
  std::optional<double> temperature;
  std::optional<int> max_output;

  bool operator==(const CompletionRequest&) const = default;
};

struct EmbeddingBatch {
  std::string model;
  std::vector<std::string> inputs;

  bool operator==(const EmbeddingBatch&) const = default;
};

struct GatewayStats {
  std::uint64_t calls = 0;
  std::uint64_t retries = 0;
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
};

class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(const EmbeddingBatch& batch) = 0;
};

struct HttpProviderOptions {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  int timeout_seconds = 60;
  int max_retries = 3;
  int initial_backoff_ms = 500;

  // Reads LLM_API_KEY plus LLM_BASE_URL or EMBEDDING_BASE_URL (falling back
  // to LLM_BASE_URL for embeddings when the latter is unset).
  static HttpProviderOptions completions_from_env();
  static HttpProviderOptions embeddings_from_env();
};

// POST {base_url}/chat/completions, OpenAI wire shape. Transient failures
// (transport errors, 5xx, 429) are retried with exponential backoff; auth
// rejections and malformed replies fail immediately.
class HttpCompletionProvider : public CompletionProvider {
 public:
  explicit HttpCompletionProvider(HttpProviderOptions options);
  std::string complete(const CompletionRequest& request) override;
  GatewayStats stats() const;

 private:
  HttpProviderOptions options_;
  mutable std::mutex mutex_;
  GatewayStats stats_;
};

// POST {base_url}/embeddings. Same retry policy as the completion provider.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpProviderOptions options);
  std::vector<std::vector<double>> embed(const EmbeddingBatch& batch) override;
  GatewayStats stats() const;

 private:
  HttpProviderOptions options_;
  mutable std::mutex mutex_;
  GatewayStats stats_;
};

// Replays canned replies keyed by the routing tag that agents embed in
// their system message: "[call:<agent>#<ordinal>]". Every key's replies are
// consumed in order; a "<agent>#*" key matches any ordinal of that agent
// and its last reply repeats once the earlier ones are used up.
class MockCompletionProvider : public CompletionProvider {
 public:
  using Script = std::map<std::string, std::vector<std::string>>;

  explicit MockCompletionProvider(Script script);

  // Script file: JSON object mapping routing key -> array of reply strings.
  static Script load_script_file(const std::string& path);

  // Returns the routing key found in the request's system message, or empty.
  static std::string routing_key(const CompletionRequest& request);

  std::string complete(const CompletionRequest& request) override;

  // Every request received, in order, content untouched.
  std::vector<CompletionRequest> calls() const;

 private:
  Script script_;
  std::map<std::string, std::size_t> cursor_;
  std::vector<CompletionRequest> calls_;
  mutable std::mutex mutex_;
};

// Deterministic bag-of-words embedder: each token is hashed into one of
// `dimension` buckets and the counts are L2-normalized. Texts without
// tokens map to the zero vector.
class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(std::size_t dimension = 16);
  std::vector<std::vector<double>> embed(const EmbeddingBatch& batch) override;
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
};

}  // namespace logitest
