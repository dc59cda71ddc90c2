#include "logitest/orchestrator.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "logitest/errors.hpp"
#include "logitest/execution_memory.hpp"
#include "logitest/http_executor.hpp"
#include "logitest/scheduler.hpp"
#include "logitest/text.hpp"

namespace logitest {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::trunc | std::ios::binary);
    if (!file) throw IoError("cannot write " + tmp.string());
    file << content;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

json response_snapshot(const HttpResponseRecord& response) {
  json out;
  if (response.status) out["status"] = *response.status;
  if (response.transport_error) out["transport_error"] = *response.transport_error;
  out["body"] = response.body;
  return out;
}

std::string normalized_crash_body(const CrashRecord& crash,
                                  const std::vector<std::regex>& volatile_res) {
  std::string body = crash.response_body;
  for (const auto& re : volatile_res) body = std::regex_replace(body, re, "");
  return collapse_whitespace(body);
}

Severity severity_from_string(const std::string& text) {
  if (text == "bug") return Severity::bug_candidate;
  if (text == "enhancement") return Severity::enhancement_candidate;
  return Severity::unclassified;
}

struct CampaignState {
  RunReport report;
  std::vector<IssueReport> raw_issues;
  std::vector<CrashRecord> raw_crashes;
};

void record_verdict_artifacts(CampaignState& state, const ApiOperation& op, const TestStep& step,
                              const GeneratedRequest& request, const HttpResponseRecord& response,
                              const ValidationVerdict& verdict, const std::string& scenario_id,
                              std::uint64_t seq) {
  if (verdict.issue_kind == IssueKind::server_crash) {
    CrashRecord crash;
    crash.api = op.id;
    crash.response_body = response.body;
    crash.request_snapshot = to_json(request);
    crash.scenario_id = scenario_id;
    crash.exchange_seq = seq;
    state.raw_crashes.push_back(std::move(crash));
    return;
  }
  if (!verdict.aligned && verdict.issue_kind == IssueKind::logical_issue) {
    IssueReport issue;
    issue.api = op.id;
    issue.issue_type = normalize_issue_type(verdict.issue_type);
    issue.severity = verdict.severity;
    issue.explanation = verdict.explanation;
    issue.request_snapshot = to_json(request);
    issue.response_snapshot = response_snapshot(response);
    issue.scenario_id = scenario_id;
    issue.step_title = step.title;
    issue.exchange_seq = seq;
    state.raw_issues.push_back(std::move(issue));
  }
}

}  // namespace

std::string normalize_issue_type(std::string_view raw) {
  return collapse_whitespace(to_lower(raw));
}

std::vector<IssueReport> dedup_issues(const std::vector<IssueReport>& raw) {
  std::vector<IssueReport> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& issue : raw) {
    auto key = std::make_pair(issue.api, normalize_issue_type(issue.issue_type));
    if (!seen.insert(key).second) continue;
    IssueReport kept = issue;
    kept.issue_type = key.second;
    out.push_back(std::move(kept));
  }
  return out;
}

std::vector<CrashRecord> dedup_crashes(const std::vector<CrashRecord>& raw,
                                       const std::vector<std::string>& volatile_patterns) {
  std::vector<std::regex> volatile_res;
  for (const auto& pattern : volatile_patterns) volatile_res.emplace_back(pattern);

  std::vector<CrashRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& crash : raw) {
    auto key = std::make_pair(crash.api, normalized_crash_body(crash, volatile_res));
    if (!seen.insert(key).second) continue;
    out.push_back(crash);
  }
  return out;
}

CoverageSummary operation_coverage(const std::string& exchange_log_path,
                                   const ApiCatalog& catalog) {
  CoverageSummary coverage;
  coverage.total_operations = catalog.operations.size();
  for (const auto& op : catalog.operations) coverage.per_operation[op.id];

  std::ifstream log(exchange_log_path);
  std::string line;
  while (log && std::getline(log, line)) {
    if (line.empty()) continue;
    json entry = json::parse(line, nullptr, false);
    if (entry.is_discarded() || !entry.is_object()) continue;
    std::string api = entry.value("api", "");
    auto it = coverage.per_operation.find(api);
    if (it == coverage.per_operation.end()) continue;
    ++it->second.requests;
    if (entry.contains("response") && entry["response"].is_object()) {
      int status = entry["response"].value("status", 0);
      if (status >= 200 && status <= 299) ++it->second.ok_2xx;
    }
  }
  for (const auto& [_, tally] : coverage.per_operation)
    if (tally.ok_2xx > 0) ++coverage.covered_operations;
  return coverage;
}

RunReport run_campaign(const RunConfig& config) {
  if (config.request_budget < 1) throw FatalSetup("request budget must be at least 1");
  if (config.arg_threshold <= -1.0 || config.arg_threshold >= 1.0)
    throw FatalSetup("similarity threshold must lie strictly between -1 and 1");
  if (!config.completion) throw FatalSetup("no completion provider configured");
  if (!config.embedding) throw FatalSetup("no embedding provider configured");
  if (config.base_url.empty()) throw FatalSetup("no --base-url configured");
  if (config.out_dir.empty()) throw FatalSetup("no --out directory configured");

  std::string document = config.spec_document;
  if (document.empty()) {
    if (config.spec_path.empty()) throw FatalSetup("no --spec given");
    document = read_file(config.spec_path);
  }

  CampaignState state;
  RunReport& report = state.report;
  ApiCatalog catalog;
  try {
    catalog = parse_spec(document, config.spec_format, &report.warnings);
  } catch (const Error& e) {
    throw FatalSetup(std::string("spec did not parse: ") + e.what());
  }

  PromptSet prompts;
  try {
    prompts = PromptSet::load_dir(config.prompts_dir);
  } catch (const Error& e) {
    throw FatalSetup(std::string("prompt templates unavailable: ") + e.what());
  }

  fs::create_directories(config.out_dir);
  std::string log_dir = config.exchange_log_dir.empty() ? config.out_dir : config.exchange_log_dir;
  fs::create_directories(log_dir);
  ExchangeLog exchange_log;
  exchange_log.open((fs::path(log_dir) / "exchanges.jsonl").string());
  report.exchange_log_path = exchange_log.path();

  ExecutionMemory memory;
  std::string journal = config.memory_journal_path.empty()
                            ? (fs::path(config.out_dir) / "memory.jsonl").string()
                            : config.memory_journal_path;
  memory.open_journal(journal);
  report.memory_journal_path = journal;

  GraphBuildOptions graph_options;
  graph_options.threshold = config.arg_threshold;
  graph_options.embedding_model = config.embedding_model;
  graph_options.judge.model = config.agent.model;
  graph_options.judge.temperature = config.agent.temperature;
  graph_options.cache_dir = config.arg_cache_dir;
  ApiRelationshipGraph graph;
  try {
    graph = build_graph(catalog, *config.embedding, *config.completion, graph_options,
                        &report.warnings);
  } catch (const GatewayError& e) {
    throw FatalSetup(std::string("relationship graph build failed: ") + e.what());
  }
  if (config.dump_arg)
    write_file_atomic(fs::path(config.out_dir) / "arg.json",
                      graph.to_adjacency_json().dump(2) + "\n");

  AgentOptions agent_options = config.agent;
  agent_options.include_ref_params = config.ablation.use_ref_params;
  agent_options.include_reflections = config.ablation.use_reflections;
  Agents agents(config.completion, prompts, agent_options);

  std::mt19937_64 rng(config.seed);
  ScenarioScheduler scheduler(config.retry_limit);
  std::vector<ScenarioSummary> history;

  bool script_done = false;
  int consecutive_generation_failures = 0;
  auto budget_left = [&] {
    return report.requests_issued < static_cast<std::uint64_t>(config.request_budget);
  };

  while (!script_done && budget_left()) {
    auto walk = random_walk(graph, rng, config.walk_max);

    TestScenario scenario;
    try {
      scenario = agents.generate_scenario(catalog, walk, history, rng, &report.warnings);
      consecutive_generation_failures = 0;
    } catch (const ScriptExhausted&) {
      break;
    } catch (const GenerationFailed& e) {
      report.warnings.push_back(std::string("scenario generation failed: ") + e.what());
      if (++consecutive_generation_failures >= 3) {
        report.warnings.push_back("giving up after 3 consecutive generation failures");
        break;
      }
      continue;
    } catch (const GatewayError& e) {
      report.warnings.push_back(std::string("scenario generation failed: ") + e.what());
      if (++consecutive_generation_failures >= 3) {
        report.warnings.push_back("giving up after 3 consecutive generation failures");
        break;
      }
      continue;
    }

    scheduler.add_scenario(scenario);
    std::vector<StepExchange> scenario_context;

    while (!scheduler.check_termination() && budget_left()) {
      const TestStep& step = scheduler.retrieve_step();
      const ApiOperation* op = catalog.find(step.api);

      std::vector<std::pair<std::string, std::string>> ref_params;
      if (config.ablation.use_ref_params)
        ref_params = memory.retrieve_parameters(*op, step.description);
      std::vector<ReflectionRecord> reflections;
      if (config.ablation.use_reflections) reflections = memory.retrieve_reflections(*op);

      GeneratedRequest request;
      try {
        request = agents.build_request(*op, step, scenario_context, ref_params, reflections,
                                       &report.warnings);
      } catch (const ScriptExhausted&) {
        script_done = true;
        break;
      } catch (const RequestConstructionFailed& e) {
        report.warnings.push_back(std::string("step failed before the wire: ") + e.what());
        scheduler.update_status(StepStatus::failed);
        continue;
      } catch (const GatewayError& e) {
        report.warnings.push_back(std::string("step failed before the wire: ") + e.what());
        scheduler.update_status(StepStatus::failed);
        continue;
      }
      for (const auto& [name, value] : config.static_headers)
        request.header_values.emplace(name, value);

      HttpResponseRecord response =
          do_request(request, config.base_url, config.http_timeout_seconds);
      ++report.requests_issued;
      std::uint64_t seq = exchange_log.record(request, response);

      ValidationVerdict verdict;
      if (response.transport_error) {
        verdict.aligned = false;
        verdict.issue_kind = IssueKind::none;
        verdict.explanation = "transport error: " + *response.transport_error;
      } else {
        try {
          verdict = agents.validate_response(*op, step, request, response, &report.warnings);
        } catch (const ScriptExhausted&) {
          script_done = true;
          break;
        } catch (const GatewayError& e) {
          verdict.aligned = false;
          verdict.issue_kind = IssueKind::none;
          verdict.explanation = std::string("validator unavailable: ") + e.what();
        }
      }

      memory.insert_execution(*op, step, request, verdict);
      record_verdict_artifacts(state, *op, step, request, response, verdict,
                               scenario.scenario_id, seq);
      scenario_context.push_back(StepExchange{step.title, request, response});
      scheduler.update_status(verdict.aligned ? StepStatus::passed : StepStatus::failed);
    }

    if (!scheduler.check_termination()) break;  // budget or script ended mid-scenario

    ScenarioSummary summary;
    summary.scenario_id = scenario.scenario_id;
    summary.outcome = scheduler.scenario_failed() ? "failed" : "passed";
    for (const auto& step : scenario.steps)
      summary.step_lines.push_back(step.title + " [" + step.api + "]");
    history.push_back(std::move(summary));
    if (scheduler.scenario_failed())
      ++report.scenarios_failed;
    else
      ++report.scenarios_completed;
  }

  report.raw_issue_count = state.raw_issues.size();
  report.raw_crash_count = state.raw_crashes.size();
  report.issues = dedup_issues(state.raw_issues);
  report.crashes = dedup_crashes(state.raw_crashes, config.crash_volatile_patterns);
  report.coverage = operation_coverage(report.exchange_log_path, catalog);
  return report;
}

json to_json(const IssueReport& issue) {
  return json{{"api", issue.api},
              {"issue_type", issue.issue_type},
              {"severity", std::string(to_string(issue.severity))},
              {"explanation", issue.explanation},
              {"request", issue.request_snapshot},
              {"response", issue.response_snapshot},
              {"scenario_id", issue.scenario_id},
              {"step_title", issue.step_title},
              {"exchange_seq", issue.exchange_seq}};
}

json to_json(const CrashRecord& crash) {
  return json{{"api", crash.api},
              {"response_body", crash.response_body},
              {"request", crash.request_snapshot},
              {"scenario_id", crash.scenario_id},
              {"exchange_seq", crash.exchange_seq}};
}

json to_json(const CoverageSummary& coverage) {
  json operations = json::object();
  for (const auto& [id, tally] : coverage.per_operation)
    operations[id] = json{{"requests", tally.requests}, {"ok_2xx", tally.ok_2xx}};
  return json{{"total_operations", coverage.total_operations},
              {"covered_operations", coverage.covered_operations},
              {"operations", std::move(operations)}};
}

std::string render_summary(const RunReport& report) {
  std::ostringstream out;
  out << "campaign summary\n";
  out << "================\n";
  out << "requests issued:     " << report.requests_issued << "\n";
  out << "scenarios completed: " << report.scenarios_completed << "\n";
  out << "scenarios failed:    " << report.scenarios_failed << "\n";
  out << "issue reports (raw): " << report.raw_issue_count << "\n";
  out << "issues (deduped):    " << report.issues.size() << "\n";
  out << "crashes (raw):       " << report.raw_crash_count << "\n";
  out << "crashes (deduped):   " << report.crashes.size() << "\n";
  out << "operation coverage:  " << report.coverage.covered_operations << "/"
      << report.coverage.total_operations << "\n";
  out << "\nper-operation coverage:\n";
  for (const auto& [id, tally] : report.coverage.per_operation)
    out << "  " << id << ": requests " << tally.requests << ", 2xx " << tally.ok_2xx << "\n";
  if (!report.warnings.empty()) {
    out << "\nwarnings (" << report.warnings.size() << "):\n";
    for (const auto& warning : report.warnings) out << "  - " << warning << "\n";
  }
  return out.str();
}

void emit_reports(const RunReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::path dir(out_dir);

  std::string issues_text;
  for (const auto& issue : report.issues) issues_text += to_json(issue).dump() + "\n";
  write_file_atomic(dir / "issues.jsonl", issues_text);

  std::string crashes_text;
  for (const auto& crash : report.crashes) crashes_text += to_json(crash).dump() + "\n";
  write_file_atomic(dir / "crashes.jsonl", crashes_text);

  write_file_atomic(dir / "coverage.json", to_json(report.coverage).dump(2) + "\n");

  json run{{"requests_issued", report.requests_issued},
           {"scenarios_completed", report.scenarios_completed},
           {"scenarios_failed", report.scenarios_failed},
           {"raw_issue_count", report.raw_issue_count},
           {"raw_crash_count", report.raw_crash_count},
           {"exchange_log", report.exchange_log_path},
           {"memory_journal", report.memory_journal_path},
           {"warnings", report.warnings}};
  write_file_atomic(dir / "run.json", run.dump(2) + "\n");

  write_file_atomic(dir / "summary.txt", render_summary(report));
}

RunReport load_reports(const std::string& out_dir) {
  fs::path dir(out_dir);
  RunReport report;

  json run = json::parse(read_file(dir / "run.json"));
  report.requests_issued = run.value("requests_issued", 0);
  report.scenarios_completed = run.value("scenarios_completed", 0);
  report.scenarios_failed = run.value("scenarios_failed", 0);
  report.raw_issue_count = run.value("raw_issue_count", 0);
  report.raw_crash_count = run.value("raw_crash_count", 0);
  report.exchange_log_path = run.value("exchange_log", "");
  report.memory_journal_path = run.value("memory_journal", "");
  if (run.contains("warnings"))
    report.warnings = run["warnings"].get<std::vector<std::string>>();

  std::ifstream issues_file(dir / "issues.jsonl");
  std::string line;
  while (issues_file && std::getline(issues_file, line)) {
    if (line.empty()) continue;
    json entry = json::parse(line);
    IssueReport issue;
    issue.api = entry.value("api", "");
    issue.issue_type = entry.value("issue_type", "");
    issue.severity = severity_from_string(entry.value("severity", ""));
    issue.explanation = entry.value("explanation", "");
    issue.request_snapshot = entry.value("request", json::object());
    issue.response_snapshot = entry.value("response", json::object());
    issue.scenario_id = entry.value("scenario_id", "");
    issue.step_title = entry.value("step_title", "");
    issue.exchange_seq = entry.value("exchange_seq", 0);
    report.issues.push_back(std::move(issue));
  }

  std::ifstream crashes_file(dir / "crashes.jsonl");
  while (crashes_file && std::getline(crashes_file, line)) {
    if (line.empty()) continue;
    json entry = json::parse(line);
    CrashRecord crash;
    crash.api = entry.value("api", "");
    crash.response_body = entry.value("response_body", "");
    crash.request_snapshot = entry.value("request", json::object());
    crash.scenario_id = entry.value("scenario_id", "");
    crash.exchange_seq = entry.value("exchange_seq", 0);
    report.crashes.push_back(std::move(crash));
  }

  json coverage = json::parse(read_file(dir / "coverage.json"));
  report.coverage.total_operations = coverage.value("total_operations", 0);
  report.coverage.covered_operations = coverage.value("covered_operations", 0);
  if (coverage.contains("operations")) {
    for (const auto& [id, tally] : coverage["operations"].items())
      report.coverage.per_operation[id] =
          OperationTally{tally.value("requests", std::uint64_t{0}),
                         tally.value("ok_2xx", std::uint64_t{0})};
  }
  return report;
}

}  // namespace logitest
