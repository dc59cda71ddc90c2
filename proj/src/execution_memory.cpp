#include "logitest/execution_memory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "logitest/errors.hpp"
#include "logitest/text.hpp"

namespace logitest {

using nlohmann::json;

namespace {

const char* const kAuthHeaders[] = {"authorization", "api_key", "api-key", "x-api-key", "cookie"};

bool is_auth_header(const std::string& name) {
  std::string lower = to_lower(name);
  for (const char* h : kAuthHeaders)
    if (lower == h) return true;
  return false;
}

std::string value_to_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

void flatten_body(const json& body, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
  if (!body.is_object()) {
    if (!prefix.empty()) out.emplace_back(prefix, value_to_text(body));
    return;
  }
  for (const auto& [key, value] : body.items()) {
    std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object())
      flatten_body(value, name, out);
    else
      out.emplace_back(name, value_to_text(value));
  }
}

}  // namespace

double bm25_score(const std::vector<std::string>& query_tokens,
                  const std::vector<std::string>& doc_tokens, const CorpusStats& stats, double k1,
                  double b) {
  if (query_tokens.empty() || doc_tokens.empty() || stats.doc_count == 0) return 0.0;

  std::map<std::string, std::size_t> tf;
  for (const auto& t : doc_tokens) ++tf[t];
  double dl = static_cast<double>(doc_tokens.size());
  double avgdl = stats.avgdl();
  double n = static_cast<double>(stats.doc_count);

  double score = 0.0;
  for (const auto& term : query_tokens) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    double df = 0.0;
    if (auto dit = stats.doc_freq.find(term); dit != stats.doc_freq.end())
      df = static_cast<double>(dit->second);
    double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double freq = static_cast<double>(it->second);
    score += idf * freq * (k1 + 1.0) / (freq + k1 * (1.0 - b + b * dl / avgdl));
  }
  return score;
}

std::vector<std::pair<std::string, std::string>> extract_request_parameters(
    const GeneratedRequest& request) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, value] : request.path_values) out.emplace_back(name, value);
  for (const auto& [name, value] : request.query_values) out.emplace_back(name, value);
  for (const auto& [name, value] : request.header_values)
    if (!is_auth_header(name)) out.emplace_back(name, value);
  if (request.body) flatten_body(*request.body, "", out);
  return out;
}

void ExecutionMemory::open_journal(const std::string& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot open memory journal " + path);
  journal_path_ = path;
}

void ExecutionMemory::journal_line(const json& record) {
  if (!journal_path_) return;
  std::ofstream file(*journal_path_, std::ios::app);
  if (!file) throw IoError("cannot append to memory journal " + *journal_path_);
  file << record.dump() << "\n";
  file.flush();
}

void ExecutionMemory::insert_execution(const ApiOperation& api, const TestStep& step,
                                       const GeneratedRequest& request,
                                       const ValidationVerdict& verdict) {
  if (verdict.aligned) {
    std::string doc_text = description_text(api);
    if (!step.description.empty()) {
      if (!doc_text.empty()) doc_text += "\n";
      doc_text += step.description;
    }
    for (const auto& [name, value] : extract_request_parameters(request)) {
      ParameterRecord record;
      record.param_name = name;
      record.param_value = value;
      record.source_api = api.id;
      record.doc_text = doc_text;
      record.timestamp = next_timestamp_++;

      auto tokens = tokenize(record.doc_text);
      ++corpus_stats_.doc_count;
      corpus_stats_.total_tokens += tokens.size();
      std::sort(tokens.begin(), tokens.end());
      tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
      for (const auto& t : tokens) ++corpus_stats_.doc_freq[t];

      journal_line(json{{"kind", "parameter"},
                        {"param_name", record.param_name},
                        {"param_value", record.param_value},
                        {"source_api", record.source_api},
                        {"doc_text", record.doc_text},
                        {"timestamp", record.timestamp}});
      parameter_records_.push_back(std::move(record));
    }
    return;
  }

  ReflectionRecord record;
  record.api_key = api.id;
  record.request_detail = to_json(request).dump();
  record.failure_explanation = verdict.explanation;
  record.timestamp = next_timestamp_++;
  journal_line(json{{"kind", "reflection"},
                    {"api_key", record.api_key},
                    {"request_detail", record.request_detail},
                    {"failure_explanation", record.failure_explanation},
                    {"timestamp", record.timestamp}});
  reflections_[record.api_key].push_back(std::move(record));
}

std::vector<std::pair<std::string, std::string>> ExecutionMemory::retrieve_parameters(
    const ApiOperation& api, const std::string& step_description, std::size_t k) const {
  if (parameter_records_.empty() || k == 0) return {};

  std::string query_text = description_text(api);
  if (!step_description.empty()) {
    if (!query_text.empty()) query_text += "\n";
    query_text += step_description;
  }
  auto query_tokens = tokenize(query_text);

  struct Scored {
    double score;
    const ParameterRecord* record;
  };
  std::vector<Scored> scored;
  scored.reserve(parameter_records_.size());
  for (const auto& record : parameter_records_)
    scored.push_back({bm25_score(query_tokens, tokenize(record.doc_text), corpus_stats_), &record});

  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.record->timestamp > b.record->timestamp;
  });

  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : scored) {
    if (out.size() == k) break;
    out.emplace_back(s.record->param_name, s.record->param_value);
  }
  return out;
}

std::vector<ReflectionRecord> ExecutionMemory::retrieve_reflections(const ApiOperation& api) const {
  auto it = reflections_.find(api.id);
  if (it == reflections_.end()) return {};
  std::vector<ReflectionRecord> out(it->second.rbegin(), it->second.rend());
  return out;
}

CorpusStats ExecutionMemory::recompute_stats() const {
  CorpusStats stats;
  for (const auto& record : parameter_records_) {
    auto tokens = tokenize(record.doc_text);
    ++stats.doc_count;
    stats.total_tokens += tokens.size();
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (const auto& t : tokens) ++stats.doc_freq[t];
  }
  return stats;
}

void ExecutionMemory::clear() {
  parameter_records_.clear();
  reflections_.clear();
  corpus_stats_ = CorpusStats{};
  next_timestamp_ = 1;
}

}  // namespace logitest
