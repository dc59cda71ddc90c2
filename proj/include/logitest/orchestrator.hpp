#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "logitest/agents.hpp"
#include "logitest/llm_gateway.hpp"
#include "logitest/relationship_graph.hpp"
#include "logitest/spec_model.hpp"
#include "logitest/test_model.hpp"

namespace logitest {

struct AblationFlags {
  bool use_ref_params = true;
  bool use_reflections = true;
};

struct RunConfig {
  std::string spec_path;
  std::string spec_document;  // inline document; wins over spec_path when nonempty
  SpecFormat spec_format = SpecFormat::auto_detect;
  std::string base_url;
  int request_budget = 1000;
  int retry_limit = 3;
  double arg_threshold = 0.5;
  std::size_t walk_max = 10;
  std::uint64_t seed = 0;
  AblationFlags ablation;
  std::string out_dir;
  std::string exchange_log_dir;     // defaults to out_dir
  std::string memory_journal_path;  // defaults to out_dir/memory.jsonl
  std::string prompts_dir = "prompts";
  bool dump_arg = false;
  std::string arg_cache_dir;  // empty disables the graph cache
  int http_timeout_seconds = 30;
  std::map<std::string, std::string> static_headers;
  std::vector<std::string> crash_volatile_patterns;  // stripped before crash dedup
  std::string embedding_model = "text-embedding-3-small";
  AgentOptions agent;
  std::shared_ptr<CompletionProvider> completion;
  std::shared_ptr<EmbeddingProvider> embedding;
};

struct IssueReport {
  std::string api;
  std::string issue_type;
  Severity severity = Severity::unclassified;
  std::string explanation;
  nlohmann::json request_snapshot;
  nlohmann::json response_snapshot;
  std::string scenario_id;
  std::string step_title;
  std::uint64_t exchange_seq = 0;
};

struct CrashRecord {
  std::string api;
  std::string response_body;
  nlohmann::json request_snapshot;
  std::string scenario_id;
  std::uint64_t exchange_seq = 0;
};

struct OperationTally {
  std::uint64_t requests = 0;
  std::uint64_t ok_2xx = 0;
};

struct CoverageSummary {
  std::size_t total_operations = 0;
  std::size_t covered_operations = 0;  // operations with at least one 2xx
  std::map<std::string, OperationTally> per_operation;
};

struct RunReport {
  std::vector<IssueReport> issues;   // deduplicated
  std::vector<CrashRecord> crashes;  // deduplicated
  std::size_t raw_issue_count = 0;
  std::size_t raw_crash_count = 0;
  CoverageSummary coverage;
  std::uint64_t requests_issued = 0;
  std::size_t scenarios_completed = 0;
  std::size_t scenarios_failed = 0;
  std::string exchange_log_path;
  std::string memory_journal_path;
  std::vector<std::string> warnings;
};

// Lowercases and whitespace-collapses a validator category label so
// spelling variations of the same type share a dedup key.
std::string normalize_issue_type(std::string_view raw);

// Keeps the first report per (api, normalized issue_type).
std::vector<IssueReport> dedup_issues(const std::vector<IssueReport>& raw);

// Keeps, per api, one record per distinct normalized response body. The
// patterns are regexes for volatile substrings (timestamps, request ids)
// removed before bodies are compared.
std::vector<CrashRecord> dedup_crashes(const std::vector<CrashRecord>& raw,
                                       const std::vector<std::string>& volatile_patterns = {});

CoverageSummary operation_coverage(const std::string& exchange_log_path,
                                   const ApiCatalog& catalog);

// Drives the full workflow: build the relationship graph once, then loop
// scenario generation, step execution, validation, and memory updates until
// the request budget is spent or the provider has nothing more to say.
RunReport run_campaign(const RunConfig& config);

// Writes issues.jsonl, crashes.jsonl, coverage.json, run.json, and
// summary.txt into out_dir, each replaced atomically.
void emit_reports(const RunReport& report, const std::string& out_dir);

std::string render_summary(const RunReport& report);

// Rebuilds a RunReport from files previously written by emit_reports.
RunReport load_reports(const std::string& out_dir);

nlohmann::json to_json(const IssueReport& issue);
nlohmann::json to_json(const CrashRecord& crash);
nlohmann::json to_json(const CoverageSummary& coverage);

}  // namespace logitest
