#include "logitest/agents.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "logitest/errors.hpp"

namespace logitest {

using nlohmann::json;

namespace {

std::string trim_blank_edges(const std::string& text) {
  std::size_t begin = 0, end = text.size();
  while (begin < end && (text[begin] == '\n' || text[begin] == '\r')) ++begin;
  while (end > begin && (text[end - 1] == '\n' || text[end - 1] == '\r' || text[end - 1] == ' '))
    --end;
  return text.substr(begin, end - begin);
}

// Fenced blocks: a line starting with ``` opens one, the next such line
// closes it. Returns block contents in order of appearance.
std::vector<std::string> fenced_blocks(const std::string& reply) {
  std::vector<std::string> blocks;
  std::istringstream stream(reply);
  std::string line;
  bool in_block = false;
  std::string current;
  while (std::getline(stream, line)) {
    std::string stripped = line;
    if (!stripped.empty() && stripped.back() == '\r') stripped.pop_back();
    std::size_t indent = stripped.find_first_not_of(" \t");
    bool fence = indent != std::string::npos && stripped.compare(indent, 3, "```") == 0;
    if (fence) {
      if (in_block) {
        blocks.push_back(current);
        current.clear();
      }
      in_block = !in_block;
      continue;
    }
    if (in_block) current += stripped + "\n";
  }
  return blocks;
}

bool is_scalar(const json& value) {
  return value.is_string() || value.is_number() || value.is_boolean();
}

std::string scalar_to_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

// Throws ParseFailure when the candidate object does not fit the kind.
void check_schema(const json& value, ReplyKind kind) {
  if (!value.is_object()) throw ParseFailure("top-level value is not an object");
  switch (kind) {
    case ReplyKind::scenario: {
      if (!value.contains("steps") || !value["steps"].is_array() || value["steps"].empty())
        throw ParseFailure("scenario needs a nonempty steps array");
      for (const auto& step : value["steps"]) {
        if (!step.is_object()) throw ParseFailure("scenario step is not an object");
        for (const char* field : {"title", "api", "description", "expected_response"})
          if (!step.contains(field) || !step[field].is_string())
            throw ParseFailure(std::string("scenario step lacks string field '") + field + "'");
        if (step["api"].get<std::string>().empty())
          throw ParseFailure("scenario step has an empty api");
        if (step["expected_response"].get<std::string>().empty())
          throw ParseFailure("scenario step has an empty expected_response");
      }
      return;
    }
    case ReplyKind::request: {
      for (const char* field : {"path_values", "query_values", "header_values"}) {
        if (!value.contains(field)) continue;
        if (!value[field].is_object())
          throw ParseFailure(std::string("request field '") + field + "' is not an object");
        for (const auto& [name, v] : value[field].items()) {
          (void)name;
          if (!is_scalar(v))
            throw ParseFailure(std::string("request field '") + field +
                               "' holds a non-scalar value");
        }
      }
      return;
    }
    case ReplyKind::verdict: {
      if (!value.contains("aligned") || !value["aligned"].is_boolean())
        throw ParseFailure("verdict needs a boolean 'aligned'");
      bool aligned = value["aligned"].get<bool>();
      if (value.contains("issue_kind")) {
        if (!value["issue_kind"].is_string())
          throw ParseFailure("verdict issue_kind must be a string");
        std::string kind_text = value["issue_kind"].get<std::string>();
        if (kind_text != "none" && kind_text != "logical_issue" && kind_text != "server_crash")
          throw ParseFailure("verdict issue_kind '" + kind_text + "' is not recognized");
        if (aligned && kind_text != "none")
          throw ParseFailure("verdict claims aligned yet names an issue_kind");
      }
      if (!aligned) {
        if (!value.contains("explanation") || !value["explanation"].is_string() ||
            value["explanation"].get<std::string>().empty())
          throw ParseFailure("unaligned verdict needs a nonempty explanation");
      }
      for (const char* field : {"explanation", "minor_notes", "issue_type", "severity"})
        if (value.contains(field) && !value[field].is_string())
          throw ParseFailure(std::string("verdict field '") + field + "' must be a string");
      if (value.contains("severity")) {
        std::string severity = value["severity"].get<std::string>();
        if (!severity.empty() && severity != "bug" && severity != "enhancement")
          throw ParseFailure("verdict severity '" + severity + "' is not recognized");
      }
      return;
    }
  }
}

std::string truncate_for_prompt(const std::string& text, std::size_t limit) {
  if (limit == 0 || text.size() <= limit) return text;
  return text.substr(0, limit) + "\n... [truncated]";
}

std::string response_status_text(const HttpResponseRecord& response) {
  if (response.status) return std::to_string(*response.status);
  return "transport error: " + response.transport_error.value_or("unknown");
}

}  // namespace

PromptTemplate PromptTemplate::load_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open prompt template " + path);
  std::map<std::string, std::string> sections;
  std::string line, current;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("=== ", 0) == 0 && line.find(" ===", 4) != std::string::npos) {
      current = line.substr(4, line.find(" ===", 4) - 4);
      sections[current];
      continue;
    }
    if (!current.empty()) sections[current] += line + "\n";
  }

  PromptTemplate prompt;
  struct {
    const char* name;
    std::string PromptTemplate::* member;
  } parts[] = {{"role", &PromptTemplate::role_assignment},
               {"requirements", &PromptTemplate::detailed_requirements},
               {"few_shot", &PromptTemplate::few_shot_examples},
               {"input", &PromptTemplate::input_template}};
  for (const auto& part : parts) {
    auto it = sections.find(part.name);
    if (it == sections.end() || trim_blank_edges(it->second).empty())
      throw MalformedDocument("prompt template " + path + " lacks the '" + part.name +
                              "' section");
    prompt.*(part.member) = trim_blank_edges(it->second);
  }
  return prompt;
}

std::string PromptTemplate::render_input(const std::map<std::string, std::string>& slots) const {
  std::string out = input_template;
  for (const auto& [name, value] : slots) {
    std::string marker = "{{" + name + "}}";
    std::size_t pos = 0;
    while ((pos = out.find(marker, pos)) != std::string::npos) {
      out.replace(pos, marker.size(), value);
      pos += value.size();
    }
  }
  auto leftover = out.find("{{");
  if (leftover != std::string::npos) {
    auto end = out.find("}}", leftover);
    std::string name = end == std::string::npos ? "?" : out.substr(leftover + 2, end - leftover - 2);
    throw FatalSetup("prompt placeholder '" + name + "' was never filled");
  }
  return out;
}

PromptSet PromptSet::load_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  PromptSet set;
  set.scenario_generator = PromptTemplate::load_file((fs::path(dir) / "scenario_generator.txt").string());
  set.request_executor = PromptTemplate::load_file((fs::path(dir) / "request_executor.txt").string());
  set.response_validator = PromptTemplate::load_file((fs::path(dir) / "response_validator.txt").string());
  return set;
}

json parse_structured_reply(const std::string& reply, ReplyKind kind) {
  auto blocks = fenced_blocks(reply);
  if (blocks.empty()) throw ParseFailure("reply contains no fenced block");
  std::string first_diagnostic;
  for (const auto& block : blocks) {
    json value = json::parse(block, nullptr, false);
    if (value.is_discarded()) {
      if (first_diagnostic.empty()) first_diagnostic = "fenced block is not valid JSON";
      continue;
    }
    try {
      check_schema(value, kind);
      return value;
    } catch (const ParseFailure& e) {
      if (first_diagnostic.empty()) first_diagnostic = e.what();
    }
  }
  throw ParseFailure(first_diagnostic.empty() ? "no usable fenced block" : first_diagnostic);
}

std::vector<std::size_t> sample_indices(std::size_t count, std::size_t cap, std::mt19937_64& rng) {
  std::vector<std::size_t> indices(count);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  if (count <= cap) return indices;
  for (std::size_t i = 0; i < cap; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (count - i));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(cap);
  std::sort(indices.begin(), indices.end());
  return indices;
}

Agents::Agents(std::shared_ptr<CompletionProvider> llm, PromptSet prompts, AgentOptions options)
    : llm_(std::move(llm)), prompts_(std::move(prompts)), options_(std::move(options)) {}

std::string Agents::dispatch(const std::string& agent_name, int ordinal,
                             const PromptTemplate& prompt,
                             const std::map<std::string, std::string>& slots,
                             std::vector<ChatMessage>& transcript) {
  if (transcript.empty()) {
    transcript.push_back({ChatRole::system, prompt.role_assignment + "\n\n[call:" + agent_name +
                                                "#" + std::to_string(ordinal) + "]"});
    transcript.push_back({ChatRole::user, prompt.detailed_requirements + "\n\n" +
                                              prompt.few_shot_examples + "\n\n" +
                                              prompt.render_input(slots)});
  }
  CompletionRequest request;
  request.model = options_.model;
  request.messages = transcript;
  request.temperature = options_.temperature;
  return llm_->complete(request);
}

TestScenario Agents::generate_scenario(const ApiCatalog& catalog,
                                       const std::vector<std::string>& walk_apis,
                                       const std::vector<ScenarioSummary>& history,
                                       std::mt19937_64& rng, std::vector<std::string>* warnings) {
  if (walk_apis.empty()) throw GenerationFailed("cannot generate a scenario from an empty walk");

  std::string api_subset;
  for (const auto& id : walk_apis) {
    const ApiOperation* op = catalog.find(id);
    if (!op) {
      if (warnings) warnings->push_back("walk produced unknown operation '" + id + "'; skipped");
      continue;
    }
    api_subset += render_markdown(*op) + "\n";
  }
  if (api_subset.empty()) throw GenerationFailed("no walk operation resolves in the catalog");

  std::string history_text;
  for (std::size_t index : sample_indices(history.size(), options_.history_cap, rng)) {
    const auto& entry = history[index];
    history_text += "Scenario " + entry.scenario_id + " (" + entry.outcome + "):\n";
    for (const auto& line : entry.step_lines) history_text += "- " + line + "\n";
  }
  if (history_text.empty()) history_text = "(none)\n";

  int ordinal = ++scenario_calls_;
  std::vector<ChatMessage> transcript;
  std::map<std::string, std::string> slots{{"api_subset", api_subset}, {"history", history_text}};

  std::string last_reason = "no attempt made";
  for (int attempt = 0; attempt <= options_.scenario_reasks; ++attempt) {
    std::string reply;
    try {
      reply = dispatch("scenario-gen", ordinal, prompts_.scenario_generator, slots, transcript);
    } catch (const GatewayError&) {
      if (attempt == 0) throw;
      throw GenerationFailed("scenario generation failed: " + last_reason +
                             ", then the provider stopped answering");
    }

    json parsed;
    try {
      parsed = parse_structured_reply(reply, ReplyKind::scenario);
    } catch (const ParseFailure& e) {
      last_reason = e.what();
      transcript.push_back({ChatRole::assistant, reply});
      transcript.push_back({ChatRole::user,
                            std::string("That reply could not be used (") + e.what() +
                                "). Reply again with exactly one fenced JSON block holding the "
                                "scenario steps in the required format."});
      continue;
    }

    TestScenario scenario;
    for (const auto& step_json : parsed["steps"]) {
      TestStep step;
      step.title = step_json["title"].get<std::string>();
      step.api = step_json["api"].get<std::string>();
      step.description = step_json["description"].get<std::string>();
      step.expected_response = step_json["expected_response"].get<std::string>();
      if (!catalog.find(step.api)) {
        if (warnings)
          warnings->push_back("scenario step '" + step.title + "' names unknown operation '" +
                              step.api + "'; dropped");
        continue;
      }
      if (scenario.steps.size() == options_.max_steps) {
        if (warnings)
          warnings->push_back("scenario reply exceeded " + std::to_string(options_.max_steps) +
                              " steps; extra steps dropped");
        break;
      }
      scenario.steps.push_back(std::move(step));
    }
    if (scenario.steps.empty()) {
      last_reason = "every step was dropped";
      transcript.push_back({ChatRole::assistant, reply});
      transcript.push_back({ChatRole::user,
                            "No step in that reply named an operation from the provided list. "
                            "Reply again using only the listed operations."});
      continue;
    }
    if (warnings && (scenario.steps.size() < 8 || scenario.steps.size() > 12))
      warnings->push_back("scenario has " + std::to_string(scenario.steps.size()) +
                          " steps, outside the typical 8-12 range");
    scenario.scenario_id = "S" + std::to_string(ordinal);
    scenario.source_apis = walk_apis;
    return scenario;
  }
  throw GenerationFailed("scenario generation failed: " + last_reason);
}

GeneratedRequest Agents::build_request(
    const ApiOperation& api, const TestStep& step, const std::vector<StepExchange>& scenario_context,
    const std::vector<std::pair<std::string, std::string>>& ref_params,
    const std::vector<ReflectionRecord>& reflections, std::vector<std::string>* warnings) {
  std::string context_text;
  for (const auto& exchange : scenario_context) {
    context_text += "### Step: " + exchange.step_title + "\n";
    context_text += "Request:\n" + to_json(exchange.request).dump() + "\n";
    context_text += "Response: HTTP " + response_status_text(exchange.response) + "\n";
    context_text +=
        "Body: " + truncate_for_prompt(exchange.response.body, options_.prompt_body_limit) + "\n\n";
  }
  if (context_text.empty()) context_text = "(none)\n";

  std::string ref_section;
  if (options_.include_ref_params) {
    ref_section = "## Reference Parameters\nPreviously accepted parameter values, most relevant "
                  "first:\n";
    if (ref_params.empty()) {
      ref_section += "(none)\n";
    } else {
      for (const auto& [name, value] : ref_params) ref_section += "- " + name + " = " + value + "\n";
    }
    ref_section += "\n";
  }

  std::string reflection_section;
  if (options_.include_reflections) {
    reflection_section =
        "## Failure Reflections\nRecent failures recorded for this operation, newest first:\n";
    if (reflections.empty()) {
      reflection_section += "(none)\n";
    } else {
      std::size_t shown = 0;
      for (const auto& reflection : reflections) {
        if (shown++ == options_.reflection_cap) break;
        reflection_section += "- request " + reflection.request_detail +
                              " failed: " + reflection.failure_explanation + "\n";
      }
    }
    reflection_section += "\n";
  }

  int ordinal = ++request_calls_;
  std::vector<ChatMessage> transcript;
  std::map<std::string, std::string> slots{
      {"api_markdown", render_markdown(api)},
      {"step_title", step.title},
      {"step_description", step.description},
      {"expected_response", step.expected_response},
      {"scenario_context", context_text},
      {"reference_parameters_section", ref_section},
      {"failure_reflections_section", reflection_section}};

  std::string last_reason = "no attempt made";
  for (int attempt = 0; attempt <= options_.request_reasks; ++attempt) {
    std::string reply;
    try {
      reply = dispatch("executor", ordinal, prompts_.request_executor, slots, transcript);
    } catch (const GatewayError& e) {
      if (attempt == 0) throw;
      throw RequestConstructionFailed("request construction failed: " + last_reason +
                                      ", then the provider stopped answering (" + e.what() + ")");
    }

    json parsed;
    try {
      parsed = parse_structured_reply(reply, ReplyKind::request);
    } catch (const ParseFailure& e) {
      last_reason = e.what();
      transcript.push_back({ChatRole::assistant, reply});
      transcript.push_back({ChatRole::user,
                            std::string("That reply could not be used (") + e.what() +
                                "). Reply again with exactly one fenced JSON block holding the "
                                "request fields in the required format."});
      continue;
    }

    GeneratedRequest request;
    request.api = api.id;
    request.method = std::string(to_string(api.method));
    request.path = api.path;
    auto read_map = [&](const char* field, std::map<std::string, std::string>& target) {
      if (!parsed.contains(field)) return;
      for (const auto& [name, value] : parsed[field].items())
        target[name] = scalar_to_string(value);
    };
    read_map("path_values", request.path_values);
    read_map("query_values", request.query_values);
    read_map("header_values", request.header_values);
    if (parsed.contains("body") && !parsed["body"].is_null()) request.body = parsed["body"];

    std::string missing;
    for (const auto& var : path_template_variables(api.path))
      if (!request.path_values.count(var)) missing = var;
    if (!missing.empty()) {
      last_reason = "missing value for path variable '" + missing + "'";
      transcript.push_back({ChatRole::assistant, reply});
      transcript.push_back({ChatRole::user, "The request lacks a value for path variable '" +
                                                missing + "'. Reply again with every path "
                                                "variable filled."});
      continue;
    }
    return request;
  }
  if (warnings) warnings->push_back("request construction gave up for step '" + step.title + "'");
  throw RequestConstructionFailed("request construction failed: " + last_reason);
}

ValidationVerdict Agents::validate_response(const ApiOperation& api, const TestStep& step,
                                            const GeneratedRequest& request,
                                            const HttpResponseRecord& response,
                                            std::vector<std::string>* warnings) {
  int ordinal = ++verdict_calls_;
  std::vector<ChatMessage> transcript;
  std::map<std::string, std::string> slots{
      {"api_markdown", render_markdown(api)},
      {"step_title", step.title},
      {"step_description", step.description},
      {"expected_response", step.expected_response},
      {"request_json", to_json(request).dump(2)},
      {"response_status", response_status_text(response)},
      {"response_body", truncate_for_prompt(response.body, options_.prompt_body_limit)}};

  ValidationVerdict verdict;
  bool parsed_ok = false;
  for (int attempt = 0; attempt <= options_.verdict_reasks && !parsed_ok; ++attempt) {
    std::string reply;
    try {
      reply = dispatch("validator", ordinal, prompts_.response_validator, slots, transcript);
    } catch (const GatewayError& e) {
      if (attempt == 0) throw;
      if (warnings)
        warnings->push_back("validator stopped answering for step '" + step.title + "' (" +
                            e.what() + ")");
      break;
    }
    json parsed;
    try {
      parsed = parse_structured_reply(reply, ReplyKind::verdict);
    } catch (const ParseFailure& e) {
      transcript.push_back({ChatRole::assistant, reply});
      transcript.push_back({ChatRole::user,
                            std::string("That reply could not be used (") + e.what() +
                                "). Reply again with exactly one fenced JSON block holding the "
                                "verdict fields in the required format."});
      continue;
    }

    verdict.aligned = parsed["aligned"].get<bool>();
    std::string kind_text = parsed.value("issue_kind", verdict.aligned ? "none" : "logical_issue");
    if (kind_text == "server_crash")
      verdict.issue_kind = IssueKind::server_crash;
    else if (kind_text == "logical_issue")
      verdict.issue_kind = IssueKind::logical_issue;
    else
      verdict.issue_kind = IssueKind::none;
    verdict.explanation = parsed.value("explanation", "");
    verdict.minor_notes = parsed.value("minor_notes", "");
    verdict.issue_type = parsed.value("issue_type", "");
    std::string severity = parsed.value("severity", "");
    if (severity == "bug")
      verdict.severity = Severity::bug_candidate;
    else if (severity == "enhancement")
      verdict.severity = Severity::enhancement_candidate;
    else
      verdict.severity = Severity::unclassified;
    if (!verdict.aligned && verdict.issue_type.empty()) verdict.issue_type = "other";
    if (verdict.aligned) {
      verdict.issue_kind = IssueKind::none;
      verdict.issue_type.clear();
      verdict.severity = Severity::unclassified;
    }
    parsed_ok = true;
  }

  if (!parsed_ok) {
    verdict = ValidationVerdict{};
    verdict.aligned = false;
    verdict.issue_kind = IssueKind::none;
    verdict.explanation = "validator output unparseable";
    if (warnings)
      warnings->push_back("validator verdict for step '" + step.title +
                          "' stayed unparseable; treated as not aligned");
  }

  bool crashed = response.status && *response.status == 500;
  if (crashed) {
    verdict.aligned = false;
    verdict.issue_kind = IssueKind::server_crash;
    verdict.severity = Severity::bug_candidate;
    if (verdict.issue_type.empty() || verdict.issue_type == "other")
      verdict.issue_type = "server-crash";
    if (verdict.explanation.empty())
      verdict.explanation = "the service answered HTTP 500, indicating an unhandled server-side "
                            "failure";
  } else if (verdict.issue_kind == IssueKind::server_crash) {
    verdict.issue_kind = IssueKind::logical_issue;
    if (warnings)
      warnings->push_back("validator claimed a crash for a non-500 response on step '" +
                          step.title + "'; downgraded to logical_issue");
  }
  return verdict;
}

}  // namespace logitest
