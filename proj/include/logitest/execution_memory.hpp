#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "logitest/spec_model.hpp"
#include "logitest/test_model.hpp"

namespace logitest {

// A parameter name/value pair that once appeared in a request the validator
// accepted, together with the text it is retrieved by.
struct ParameterRecord {
  std::string param_name;
  std::string param_value;
  std::string source_api;
  std::string doc_text;
  std::uint64_t timestamp = 0;  // monotonic insertion sequence

  bool operator==(const ParameterRecord&) const = default;
};

// What went wrong the last time an operation was exercised.
struct ReflectionRecord {
  std::string api_key;
  std::string request_detail;
  std::string failure_explanation;
  std::uint64_t timestamp = 0;

  bool operator==(const ReflectionRecord&) const = default;
};

struct CorpusStats {
  std::size_t doc_count = 0;
  std::size_t total_tokens = 0;
  std::map<std::string, std::size_t> doc_freq;  // token -> documents containing it

  double avgdl() const { return doc_count == 0 ? 0.0 : static_cast<double>(total_tokens) / doc_count; }

  bool operator==(const CorpusStats&) const = default;
};

double bm25_score(const std::vector<std::string>& query_tokens,
                  const std::vector<std::string>& doc_tokens, const CorpusStats& stats,
                  double k1 = 1.2, double b = 0.75);

// Long-term store of passed parameters and per-operation failure
// reflections. Parameter lookup is ranked by BM25 over each record's
// doc_text; reflections are keyed by operation id.
class ExecutionMemory {
 public:
  ExecutionMemory() = default;

  // Opens (truncating) a JSONL journal that every insert is appended to.
  void open_journal(const std::string& path);

  // Records the outcome of one executed step: an aligned verdict stores the
  // request's parameters, a failed one stores a reflection.
  void insert_execution(const ApiOperation& api, const TestStep& step,
                        const GeneratedRequest& request, const ValidationVerdict& verdict);

  // Top-k parameter pairs ranked by BM25 relevance of each record's doc_text
  // against the operation's description text plus the step description.
  // Ties go to the more recently inserted record.
  std::vector<std::pair<std::string, std::string>> retrieve_parameters(
      const ApiOperation& api, const std::string& step_description, std::size_t k = 10) const;

  // All reflections stored for the operation, newest first. Callers that
  // build prompts apply their own injection cap.
  std::vector<ReflectionRecord> retrieve_reflections(const ApiOperation& api) const;

  const std::vector<ParameterRecord>& parameter_records() const { return parameter_records_; }
  const std::map<std::string, std::vector<ReflectionRecord>>& reflections() const {
    return reflections_;
  }
  const CorpusStats& corpus_stats() const { return corpus_stats_; }

  // Recomputes the stats from the stored records; used to cross-check the
  // incrementally maintained ones.
  CorpusStats recompute_stats() const;

  void clear();

 private:
  void journal_line(const nlohmann::json& record);

  std::vector<ParameterRecord> parameter_records_;
  std::map<std::string, std::vector<ReflectionRecord>> reflections_;
  CorpusStats corpus_stats_;
  std::uint64_t next_timestamp_ = 1;
  std::optional<std::string> journal_path_;
};

// All (name, value) pairs a request carries, in extraction order: path
// values, query values, non-auth headers, then body fields with nested
// objects flattened to dotted names.
std::vector<std::pair<std::string, std::string>> extract_request_parameters(
    const GeneratedRequest& request);

}  // namespace logitest
