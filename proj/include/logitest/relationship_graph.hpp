#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "logitest/llm_gateway.hpp"
#include "logitest/spec_model.hpp"

namespace logitest {

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct ArgNode {
  std::string id;
  std::string method;
  std::string path;
  std::string markdown;

  bool operator==(const ArgNode&) const = default;
};

// Undirected relationship graph over catalog operations. Adjacency lists
// are kept sorted so traversal order never depends on build order.
struct ApiRelationshipGraph {
  std::vector<ArgNode> nodes;  // catalog order
  std::map<std::string, std::vector<std::string>> adjacency;

  bool has_edge(const std::string& a, const std::string& b) const;
  std::size_t edge_count() const;
  std::size_t degree(const std::string& id) const;
  nlohmann::json to_adjacency_json() const;
};

// All unordered pairs (catalog order, i < j) whose description-text
// embeddings have cosine similarity strictly above the threshold.
std::vector<std::pair<std::string, std::string>> candidate_pairs(
    const ApiCatalog& catalog, EmbeddingProvider& embedder, double threshold = 0.5,
    const std::string& embedding_model = "text-embedding-3-small");

struct JudgeOptions {
  std::string model = "gpt-4o-mini";
  std::optional<double> temperature;
  int reasks = 2;  // extra attempts after an unparseable first reply
};

// Asks the model whether two operations interact, expecting a RELATED or
// UNRELATED token somewhere in the reply. Replies that stay unparseable
// through the re-asks count as UNRELATED and add a warning.
bool judge_relationship(const ApiOperation& a, const ApiOperation& b, CompletionProvider& llm,
                        const JudgeOptions& options, int call_ordinal,
                        std::vector<std::string>* warnings = nullptr);

struct GraphBuildOptions {
  double threshold = 0.5;
  std::string embedding_model = "text-embedding-3-small";
  JudgeOptions judge;
  std::string cache_dir;  // empty disables the on-disk cache
};

ApiRelationshipGraph build_graph(const ApiCatalog& catalog, EmbeddingProvider& embedder,
                                 CompletionProvider& llm, const GraphBuildOptions& options = {},
                                 std::vector<std::string>* warnings = nullptr);

// Uniformly picks a start node, then repeatedly moves to a uniformly chosen
// not-yet-visited neighbor, stopping at max_len nodes or a dead end.
std::vector<std::string> random_walk(const ApiRelationshipGraph& graph, std::mt19937_64& rng,
                                     std::size_t max_len = 10);

}  // namespace logitest
