#include "logitest/relationship_graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logitest/errors.hpp"
#include "logitest/text.hpp"

namespace logitest {

using nlohmann::json;

namespace {

// Scans for RELATED / UNRELATED as whole word tokens. "UNRELATED" contains
// "RELATED" as a substring, so a plain find() would misread it.
std::optional<bool> parse_verdict_token(const std::string& reply) {
  bool saw_related = false;
  bool saw_unrelated = false;
  std::string word;
  auto flush = [&] {
    if (word == "RELATED") saw_related = true;
    if (word == "UNRELATED") saw_unrelated = true;
    word.clear();
  };
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c)))
      word += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    else
      flush();
  }
  flush();
  if (saw_related == saw_unrelated) return std::nullopt;  // neither, or contradictory
  return saw_related;
}

std::string judge_user_prompt(const ApiOperation& a, const ApiOperation& b) {
  std::ostringstream out;
  out << "Decide whether the two REST API operations below exhibit a logical interaction or "
         "dependency: one produces data the other consumes, they act on the same resource, or "
         "calling one changes what the other returns.\n\n";
  out << "First operation:\n\n" << render_markdown(a) << "\n";
  out << "Second operation:\n\n" << render_markdown(b) << "\n";
  out << "Answer with the single word RELATED or UNRELATED.\n";
  return out.str();
}

std::string cache_key(const ApiCatalog& catalog, const GraphBuildOptions& options) {
  std::ostringstream material;
  for (const auto& op : catalog.operations)
    material << op.id << "\n" << render_markdown(op) << "\n";
  material << "threshold=" << options.threshold << "\n";
  material << "judge=" << options.judge.model << "\n";
  material << "embedder=" << options.embedding_model << "\n";
  return hex64(fnv1a64(material.str()));
}

void insert_edge(std::map<std::string, std::vector<std::string>>& adjacency, const std::string& a,
                 const std::string& b) {
  if (a == b) return;
  auto& na = adjacency[a];
  if (std::find(na.begin(), na.end(), b) == na.end()) na.push_back(b);
  auto& nb = adjacency[b];
  if (std::find(nb.begin(), nb.end(), a) == nb.end()) nb.push_back(a);
}

}  // namespace

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw LengthMismatch("vectors of length " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) throw ZeroVector("cosine of a zero vector is undefined");
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

bool ApiRelationshipGraph::has_edge(const std::string& a, const std::string& b) const {
  auto it = adjacency.find(a);
  if (it == adjacency.end()) return false;
  return std::find(it->second.begin(), it->second.end(), b) != it->second.end();
}

std::size_t ApiRelationshipGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& [_, neighbors] : adjacency) total += neighbors.size();
  return total / 2;
}

std::size_t ApiRelationshipGraph::degree(const std::string& id) const {
  auto it = adjacency.find(id);
  return it == adjacency.end() ? 0 : it->second.size();
}

json ApiRelationshipGraph::to_adjacency_json() const {
  json nodes_json = json::array();
  for (const auto& node : nodes)
    nodes_json.push_back({{"id", node.id}, {"method", node.method}, {"path", node.path}});
  json adjacency_json = json::object();
  for (const auto& node : nodes) {
    auto it = adjacency.find(node.id);
    adjacency_json[node.id] =
        it == adjacency.end() ? json::array() : json(it->second);
  }
  return json{{"nodes", std::move(nodes_json)}, {"adjacency", std::move(adjacency_json)}};
}

std::vector<std::pair<std::string, std::string>> candidate_pairs(
    const ApiCatalog& catalog, EmbeddingProvider& embedder, double threshold,
    const std::string& embedding_model) {
  if (catalog.operations.empty()) throw EmptySpec("cannot embed an empty catalog");

  EmbeddingBatch batch;
  batch.model = embedding_model;
  for (const auto& op : catalog.operations) batch.inputs.push_back(description_text(op));
  auto vectors = embedder.embed(batch);

  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      if (cosine_similarity(vectors[i], vectors[j]) > threshold)
        pairs.emplace_back(catalog.operations[i].id, catalog.operations[j].id);
    }
  }
  return pairs;
}

bool judge_relationship(const ApiOperation& a, const ApiOperation& b, CompletionProvider& llm,
                        const JudgeOptions& options, int call_ordinal,
                        std::vector<std::string>* warnings) {
  CompletionRequest request;
  request.model = options.model;
  request.temperature = options.temperature;
  request.messages.push_back(
      {ChatRole::system,
       "You are an API analyst judging whether two REST operations are logically related.\n\n"
       "[call:judge#" + std::to_string(call_ordinal) + "]"});
  request.messages.push_back({ChatRole::user, judge_user_prompt(a, b)});

  for (int attempt = 0; attempt <= options.reasks; ++attempt) {
    std::string reply;
    try {
      reply = llm.complete(request);
    } catch (const GatewayError& e) {
      // A dead provider on the very first ask is a real outage; a failure
      // while re-asking is treated like one more unusable reply.
      if (attempt == 0) throw;
      if (warnings)
        warnings->push_back("judge gave no usable verdict for {" + a.id + ", " + b.id +
                            "}; assuming UNRELATED (" + e.what() + ")");
      return false;
    }
    auto verdict = parse_verdict_token(reply);
    if (verdict) return *verdict;
    request.messages.push_back({ChatRole::assistant, reply});
    request.messages.push_back(
        {ChatRole::user,
         "That reply did not contain a usable verdict. Answer again with exactly one word: "
         "RELATED or UNRELATED."});
  }
  if (warnings)
    warnings->push_back("judge gave no usable verdict for {" + a.id + ", " + b.id +
                        "}; assuming UNRELATED");
  return false;
}

ApiRelationshipGraph build_graph(const ApiCatalog& catalog, EmbeddingProvider& embedder,
                                 CompletionProvider& llm, const GraphBuildOptions& options,
                                 std::vector<std::string>* warnings) {
  if (catalog.operations.empty()) throw EmptySpec("cannot build a graph from an empty catalog");

  ApiRelationshipGraph graph;
  for (const auto& op : catalog.operations)
    graph.nodes.push_back(ArgNode{op.id, std::string(to_string(op.method)), op.path,
                                  render_markdown(op)});
  for (const auto& node : graph.nodes) graph.adjacency[node.id];

  std::filesystem::path cache_file;
  if (!options.cache_dir.empty()) {
    cache_file = std::filesystem::path(options.cache_dir) /
                 ("arg-" + cache_key(catalog, options) + ".json");
    std::ifstream in(cache_file);
    if (in) {
      json cached = json::parse(in, nullptr, false);
      if (!cached.is_discarded() && cached.contains("edges")) {
        for (const auto& edge : cached["edges"])
          insert_edge(graph.adjacency, edge.at(0).get<std::string>(),
                      edge.at(1).get<std::string>());
        for (auto& [_, neighbors] : graph.adjacency) std::sort(neighbors.begin(), neighbors.end());
        return graph;
      }
    }
  }

  auto pairs = candidate_pairs(catalog, embedder, options.threshold, options.embedding_model);
  int ordinal = 0;
  for (const auto& [left, right] : pairs) {
    const ApiOperation* a = catalog.find(left);
    const ApiOperation* b = catalog.find(right);
    ++ordinal;
    if (judge_relationship(*a, *b, llm, options.judge, ordinal, warnings))
      insert_edge(graph.adjacency, left, right);
  }

  // The walk must be able to leave every node, so operations nobody judged
  // related get blanket edges to the whole catalog.
  if (graph.nodes.size() > 1) {
    std::vector<std::string> isolated;
    for (const auto& node : graph.nodes)
      if (graph.adjacency[node.id].empty()) isolated.push_back(node.id);
    for (const auto& id : isolated)
      for (const auto& node : graph.nodes) insert_edge(graph.adjacency, id, node.id);
  }

  for (auto& [_, neighbors] : graph.adjacency) std::sort(neighbors.begin(), neighbors.end());

  if (!cache_file.empty()) {
    json edges = json::array();
    for (const auto& node : graph.nodes)
      for (const auto& neighbor : graph.adjacency[node.id])
        if (node.id < neighbor) edges.push_back({node.id, neighbor});
    std::error_code ec;
    std::filesystem::create_directories(cache_file.parent_path(), ec);
    std::ofstream out(cache_file);
    if (out) out << json{{"edges", std::move(edges)}}.dump(2) << "\n";
  }
  return graph;
}

std::vector<std::string> random_walk(const ApiRelationshipGraph& graph, std::mt19937_64& rng,
                                     std::size_t max_len) {
  if (graph.nodes.empty() || max_len == 0) return {};

  std::vector<std::string> visited;
  std::string current = graph.nodes[rng() % graph.nodes.size()].id;
  visited.push_back(current);

  while (visited.size() < max_len) {
    auto it = graph.adjacency.find(current);
    if (it == graph.adjacency.end()) break;
    std::vector<const std::string*> unvisited;
    for (const auto& neighbor : it->second)
      if (std::find(visited.begin(), visited.end(), neighbor) == visited.end())
        unvisited.push_back(&neighbor);
    if (unvisited.empty()) break;
    current = *unvisited[rng() % unvisited.size()];
    visited.push_back(current);
  }
  return visited;
}

}  // namespace logitest
