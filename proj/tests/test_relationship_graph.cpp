#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "logitest/errors.hpp"
#include "logitest/relationship_graph.hpp"

using namespace logitest;
using nlohmann::json;

namespace {

// Hands back preset vectors, one per input, and counts invocations.
class FakeEmbedder : public EmbeddingProvider {
 public:
  explicit FakeEmbedder(std::vector<std::vector<double>> vectors)
      : vectors_(std::move(vectors)) {}

  std::vector<std::vector<double>> embed(const EmbeddingBatch& batch) override {
    ++calls;
    REQUIRE(batch.inputs.size() == vectors_.size());
    return vectors_;
  }

  int calls = 0;

 private:
  std::vector<std::vector<double>> vectors_;
};

class ThrowingProvider : public CompletionProvider {
 public:
  std::string complete(const CompletionRequest&) override {
    throw GatewayError("provider must not be called");
  }
};

ApiOperation make_op(const std::string& id, const std::string& summary) {
  ApiOperation op;
  op.id = id;
  op.method = HttpMethod::GET;
  op.path = "/" + id;
  op.summary = summary;
  return op;
}

ApiCatalog make_catalog(const std::vector<std::string>& ids) {
  ApiCatalog catalog;
  catalog.title = "toy";
  for (const auto& id : ids) catalog.operations.push_back(make_op(id, "operation " + id));
  return catalog;
}

MockCompletionProvider::Script one_key(const std::string& key, std::vector<std::string> replies) {
  MockCompletionProvider::Script script;
  script[key] = std::move(replies);
  return script;
}

ApiRelationshipGraph make_graph(const std::vector<std::string>& ids,
                                const std::vector<std::pair<std::string, std::string>>& edges) {
  ApiRelationshipGraph graph;
  for (const auto& id : ids) {
    graph.nodes.push_back(ArgNode{id, "GET", "/" + id, ""});
    graph.adjacency[id];
  }
  for (const auto& [a, b] : edges) {
    graph.adjacency[a].push_back(b);
    graph.adjacency[b].push_back(a);
  }
  for (auto& [_, neighbors] : graph.adjacency) std::sort(neighbors.begin(), neighbors.end());
  return graph;
}

}  // namespace

TEST_CASE("cosine similarity matches hand-computed values") {
  CHECK(cosine_similarity({1, 0}, {0, 1}) == 0.0);
  CHECK(cosine_similarity({2, 0}, {5, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity({1, 0}, {1, 1}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(cosine_similarity({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_similarity({1, 0}, {1, 0, 0}), LengthMismatch);
  CHECK_THROWS_AS(cosine_similarity({0, 0}, {1, 0}), ZeroVector);
}

TEST_CASE("candidate pairs are those strictly above the threshold") {
  auto catalog = make_catalog({"A", "B", "C"});
  FakeEmbedder embedder({{1, 0}, {1, 1}, {0, 1}});
  // cos(A,B) = cos(B,C) = 1/sqrt(2), cos(A,C) = 0.

  auto pairs = candidate_pairs(catalog, embedder, 0.5);
  CHECK(pairs == std::vector<std::pair<std::string, std::string>>{{"A", "B"}, {"B", "C"}});

  // A cosine equal to the threshold does not qualify.
  FakeEmbedder tie_embedder({{1, 0}, {0, 1}, {0, 1}});
  auto none = candidate_pairs(catalog, tie_embedder, 0.0);
  CHECK(none == std::vector<std::pair<std::string, std::string>>{{"B", "C"}});

  auto all = candidate_pairs(catalog, embedder, -1.0);
  CHECK(all.size() == 3);

  CHECK_THROWS_AS(candidate_pairs(ApiCatalog{}, embedder), EmptySpec);
}

TEST_CASE("candidate pairs match a brute-force scan on random vectors") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int round = 0; round < 20; ++round) {
    std::size_t n = 2 + rng() % 10;
    std::vector<std::vector<double>> vectors;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      vectors.push_back({coord(rng), coord(rng), coord(rng)});
      ids.push_back("op" + std::to_string(i));
    }
    auto catalog = make_catalog(ids);
    FakeEmbedder embedder(vectors);
    auto pairs = candidate_pairs(catalog, embedder, 0.5);

    // Pairs come back in catalog order, so the brute-force scan reproduces
    // the exact sequence, not just the set.
    std::vector<std::pair<std::string, std::string>> expected;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (cosine_similarity(vectors[i], vectors[j]) > 0.5) expected.push_back({ids[i], ids[j]});

    CHECK(pairs == expected);
  }
}

TEST_CASE("the judge reads whole-word verdict tokens") {
  auto a = make_op("A", "first");
  auto b = make_op("B", "second");
  JudgeOptions options;

  MockCompletionProvider yes(one_key("judge#1", {"These operations are RELATED."}));
  CHECK(judge_relationship(a, b, yes, options, 1));

  // UNRELATED contains RELATED as a substring; it must still read as no.
  MockCompletionProvider no(one_key("judge#1", {"UNRELATED"}));
  CHECK_FALSE(judge_relationship(a, b, no, options, 1));

  MockCompletionProvider lowercase(one_key("judge#1", {"definitely related, yes"}));
  CHECK(judge_relationship(a, b, lowercase, options, 1));
}

TEST_CASE("an ambiguous judge reply triggers a re-ask on the same ordinal") {
  auto a = make_op("A", "first");
  auto b = make_op("B", "second");
  JudgeOptions options;

  MockCompletionProvider mock(
      {{"judge#4", {"RELATED or UNRELATED, tough call", "hmm", "RELATED"}}});
  std::vector<std::string> warnings;
  CHECK(judge_relationship(a, b, mock, options, 4, &warnings));
  CHECK(warnings.empty());

  auto calls = mock.calls();
  REQUIRE(calls.size() == 3);
  // The re-ask keeps the conversation: prior reply plus corrective feedback.
  CHECK(calls[1].messages.size() == calls[0].messages.size() + 2);
  CHECK(calls[1].messages[calls[1].messages.size() - 2].role == ChatRole::assistant);
  CHECK(calls[1].messages.back().content.find("RELATED or UNRELATED") != std::string::npos);
}

TEST_CASE("a judge that never answers usably counts as unrelated with a warning") {
  auto a = make_op("A", "first");
  auto b = make_op("B", "second");
  JudgeOptions options;

  MockCompletionProvider mock({{"judge#1", {"???", "...", "still nothing"}}});
  std::vector<std::string> warnings;
  CHECK_FALSE(judge_relationship(a, b, mock, options, 1, &warnings));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("assuming UNRELATED") != std::string::npos);
}

TEST_CASE("gateway failures propagate on the first ask but not during re-asks") {
  auto a = make_op("A", "first");
  auto b = make_op("B", "second");
  JudgeOptions options;

  MockCompletionProvider empty({});
  CHECK_THROWS_AS(judge_relationship(a, b, empty, options, 1), ScriptExhausted);

  // One gibberish reply, then the script runs dry during the re-ask.
  MockCompletionProvider partial(one_key("judge#1", {"gibberish"}));
  std::vector<std::string> warnings;
  CHECK_FALSE(judge_relationship(a, b, partial, options, 1, &warnings));
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("assuming UNRELATED") != std::string::npos);
}

TEST_CASE("judged edges stay put and only isolated nodes get blanket edges") {
  auto catalog = make_catalog({"A", "B", "C", "D"});
  // A~B and C~D are the embedding candidates.
  FakeEmbedder embedder({{1, 0}, {1, 0.1}, {0, 1}, {0.1, 1}});
  MockCompletionProvider llm({{"judge#1", {"RELATED"}}, {"judge#2", {"RELATED"}}});

  auto graph = build_graph(catalog, embedder, llm, {});
  CHECK(graph.edge_count() == 2);
  CHECK(graph.has_edge("A", "B"));
  CHECK(graph.has_edge("B", "A"));
  CHECK(graph.has_edge("C", "D"));
  CHECK_FALSE(graph.has_edge("A", "C"));
  CHECK(graph.degree("A") == 1);
}

TEST_CASE("a node nobody relates to is wired to the whole catalog") {
  auto catalog = make_catalog({"A", "B", "C"});
  // Only A~B is a candidate; C stays isolated until the blanket rule fires.
  FakeEmbedder embedder({{1, 0}, {1, 0.1}, {0, 1}});
  MockCompletionProvider llm(one_key("judge#1", {"RELATED"}));

  auto graph = build_graph(catalog, embedder, llm, {});
  CHECK(graph.edge_count() == 3);
  CHECK(graph.has_edge("A", "B"));
  CHECK(graph.has_edge("C", "A"));
  CHECK(graph.has_edge("C", "B"));
  for (const auto& [_, neighbors] : graph.adjacency)
    CHECK(std::is_sorted(neighbors.begin(), neighbors.end()));
}

TEST_CASE("a rejected candidate leaves both endpoints to the isolation rule") {
  auto catalog = make_catalog({"A", "B", "C"});
  FakeEmbedder embedder({{1, 0}, {1, 0.1}, {0, 1}});
  MockCompletionProvider llm(one_key("judge#1", {"UNRELATED"}));

  auto graph = build_graph(catalog, embedder, llm, {});
  // Everyone ends up isolated, so everyone gets connected to everyone.
  CHECK(graph.edge_count() == 3);
}

TEST_CASE("a single-operation catalog yields a single unconnected node") {
  auto catalog = make_catalog({"A"});
  FakeEmbedder embedder({{1, 0}});
  MockCompletionProvider llm({});
  auto graph = build_graph(catalog, embedder, llm, {});
  REQUIRE(graph.nodes.size() == 1);
  CHECK(graph.edge_count() == 0);
  CHECK(graph.degree("A") == 0);

  auto doc = graph.to_adjacency_json();
  CHECK(doc["nodes"][0]["id"] == "A");
  CHECK(doc["adjacency"]["A"] == json::array());
}

TEST_CASE("the on-disk cache replays a graph without touching the providers") {
  auto cache_dir = std::filesystem::temp_directory_path() / "logitest_arg_cache_test";
  std::filesystem::remove_all(cache_dir);

  auto catalog = make_catalog({"A", "B", "C"});
  GraphBuildOptions options;
  options.cache_dir = cache_dir.string();

  FakeEmbedder embedder({{1, 0}, {1, 0.1}, {0, 1}});
  MockCompletionProvider llm(one_key("judge#1", {"RELATED"}));
  auto first = build_graph(catalog, embedder, llm, options);
  CHECK(embedder.calls == 1);

  bool cache_file_found = false;
  for (const auto& entry : std::filesystem::directory_iterator(cache_dir))
    if (entry.path().filename().string().rfind("arg-", 0) == 0) cache_file_found = true;
  CHECK(cache_file_found);

  FakeEmbedder unused_embedder({{1, 0}, {1, 0.1}, {0, 1}});
  ThrowingProvider unused_llm;
  auto second = build_graph(catalog, unused_embedder, unused_llm, options);
  CHECK(unused_embedder.calls == 0);
  CHECK(second.adjacency == first.adjacency);

  // A different threshold keys a different cache entry, so work happens again.
  options.threshold = 0.9;
  FakeEmbedder fresh_embedder({{1, 0}, {1, 0.1}, {0, 1}});
  MockCompletionProvider fresh_llm(one_key("judge#1", {"RELATED"}));
  build_graph(catalog, fresh_embedder, fresh_llm, options);
  CHECK(fresh_embedder.calls == 1);

  std::filesystem::remove_all(cache_dir);
}

TEST_CASE("random walks start uniformly and never revisit a node") {
  auto graph = make_graph({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}});

  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    std::string expected_start = graph.nodes[std::mt19937_64(seed)() % 3].id;
    auto walk = random_walk(graph, rng);
    REQUIRE_FALSE(walk.empty());
    CHECK(walk.front() == expected_start);

    std::set<std::string> seen;
    for (const auto& node : walk) CHECK(seen.insert(node).second);
    for (std::size_t i = 1; i < walk.size(); ++i) CHECK(graph.has_edge(walk[i - 1], walk[i]));

    // On the path graph, starting at an end covers all 3 nodes; starting in
    // the middle dead-ends after 2.
    if (walk.front() == "B")
      CHECK(walk.size() == 2);
    else
      CHECK(walk.size() == 3);
  }
}

TEST_CASE("walks stop at the length cap even when more nodes remain") {
  std::vector<std::string> ids;
  std::vector<std::pair<std::string, std::string>> edges;
  for (int i = 0; i < 15; ++i) ids.push_back("n" + std::to_string(i < 10 ? 0 : i / 10) +
                                             std::to_string(i % 10));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) edges.emplace_back(ids[i], ids[j]);
  auto graph = make_graph(ids, edges);

  std::mt19937_64 rng(7);
  auto walk = random_walk(graph, rng);
  CHECK(walk.size() == 10);

  auto short_walk = random_walk(graph, rng, 1);
  CHECK(short_walk.size() == 1);
  CHECK(random_walk(graph, rng, 0).empty());
  CHECK(random_walk(ApiRelationshipGraph{}, rng).empty());
}

TEST_CASE("walks are reproducible for a fixed seed") {
  auto graph = make_graph({"A", "B", "C", "D"},
                          {{"A", "B"}, {"B", "C"}, {"C", "D"}, {"D", "A"}, {"A", "C"}});
  std::mt19937_64 rng_one(42);
  std::mt19937_64 rng_two(42);
  CHECK(random_walk(graph, rng_one) == random_walk(graph, rng_two));
}
