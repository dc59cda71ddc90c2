#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "logitest/execution_memory.hpp"
#include "logitest/http_executor.hpp"
#include "logitest/llm_gateway.hpp"
#include "logitest/spec_model.hpp"
#include "logitest/test_model.hpp"

namespace logitest {

// A prompt file has four sections separated by "=== name ===" marker lines:
// role, requirements, few_shot, and input. The input section carries
// {{slot}} placeholders filled per call.
struct PromptTemplate {
  std::string role_assignment;
  std::string detailed_requirements;
  std::string few_shot_examples;
  std::string input_template;

  static PromptTemplate load_file(const std::string& path);

  // Substitutes every {{slot}}; an unfilled placeholder is a setup error.
  std::string render_input(const std::map<std::string, std::string>& slots) const;
};

struct PromptSet {
  PromptTemplate scenario_generator;
  PromptTemplate request_executor;
  PromptTemplate response_validator;

  static PromptSet load_dir(const std::string& dir);
};

enum class ReplyKind { scenario, request, verdict };

// Extracts the first fenced JSON block in the reply that satisfies the
// kind's schema. Prose around and between blocks is ignored; a reply with
// no acceptable block raises ParseFailure.
nlohmann::json parse_structured_reply(const std::string& reply, ReplyKind kind);

// One line of campaign history shown to the generator.
struct ScenarioSummary {
  std::string scenario_id;
  std::string outcome;  // "passed" or "failed"
  std::vector<std::string> step_lines;
};

// One already-executed step of the scenario in progress, shown to the
// executor so later requests can reuse returned identifiers.
struct StepExchange {
  std::string step_title;
  GeneratedRequest request;
  HttpResponseRecord response;
};

struct AgentOptions {
  std::string model = "gpt-4o-mini";
  std::optional<double> temperature;
  int scenario_reasks = 1;
  int request_reasks = 2;
  int verdict_reasks = 2;
  std::size_t history_cap = 10;     // scenarios shown to the generator
  std::size_t reflection_cap = 5;   // reflections injected per prompt
  std::size_t max_steps = 15;       // scenarios are cut here on parse
  std::size_t prompt_body_limit = 4000;  // response-body chars shown in prompts
  bool include_ref_params = true;
  bool include_reflections = true;
};

// The three LLM-backed agents. Each call assembles a four-part prompt
// (role, requirements, few-shot examples, filled input), dispatches it, and
// parses the structured reply, re-asking a bounded number of times.
class Agents {
 public:
  Agents(std::shared_ptr<CompletionProvider> llm, PromptSet prompts, AgentOptions options = {});

  // Turns a random-walk operation subset plus sampled history into the next
  // scenario. Steps naming unknown operations are dropped with a warning;
  // an entirely unusable reply is re-asked once before GenerationFailed.
  TestScenario generate_scenario(const ApiCatalog& catalog,
                                 const std::vector<std::string>& walk_apis,
                                 const std::vector<ScenarioSummary>& history, std::mt19937_64& rng,
                                 std::vector<std::string>* warnings = nullptr);

  // Builds the concrete request for one step. Throws
  // RequestConstructionFailed when no attempt yields a usable request.
  GeneratedRequest build_request(const ApiOperation& api, const TestStep& step,
                                 const std::vector<StepExchange>& scenario_context,
                                 const std::vector<std::pair<std::string, std::string>>& ref_params,
                                 const std::vector<ReflectionRecord>& reflections,
                                 std::vector<std::string>* warnings = nullptr);

  // Judges the response against the step's oracle. HTTP 500 always comes
  // back as a server_crash verdict no matter what the model said; a verdict
  // that stays unparseable is conservatively treated as not aligned.
  ValidationVerdict validate_response(const ApiOperation& api, const TestStep& step,
                                      const GeneratedRequest& request,
                                      const HttpResponseRecord& response,
                                      std::vector<std::string>* warnings = nullptr);

  const AgentOptions& options() const { return options_; }

 private:
  std::string dispatch(const std::string& agent_name, int ordinal, const PromptTemplate& prompt,
                       const std::map<std::string, std::string>& slots,
                       std::vector<ChatMessage>& transcript);

  std::shared_ptr<CompletionProvider> llm_;
  PromptSet prompts_;
  AgentOptions options_;
  int scenario_calls_ = 0;
  int request_calls_ = 0;
  int verdict_calls_ = 0;
};

// Uniformly samples up to `cap` items, preserving their original order.
std::vector<std::size_t> sample_indices(std::size_t count, std::size_t cap, std::mt19937_64& rng);

}  // namespace logitest
