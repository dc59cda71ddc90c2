#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "logitest/errors.hpp"
#include "logitest/fixture_service.hpp"
#include "logitest/llm_gateway.hpp"
#include "logitest/orchestrator.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

std::pair<std::string, std::string> split_header(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw logitest::FatalSetup("header '" + text + "' is not in 'Name: value' form");
  std::string name = text.substr(0, colon);
  std::string value = text.substr(colon + 1);
  while (!value.empty() && value.front() == ' ') value.erase(value.begin());
  return {name, value};
}

int run_command(const logitest::RunConfig& config) {
  logitest::RunReport report = logitest::run_campaign(config);
  logitest::emit_reports(report, config.out_dir);
  std::cout << logitest::render_summary(report);
  std::cout << "\nreports written to " << config.out_dir << "\n";
  return 0;
}

int report_command(const std::string& out_dir) {
  logitest::RunReport report = logitest::load_reports(out_dir);
  std::cout << logitest::render_summary(report);
  return 0;
}

int fixture_command(int port, const std::string& bugs_csv) {
  logitest::FixtureBugs bugs;  // all on unless a list narrows them
  if (!bugs_csv.empty()) bugs = logitest::FixtureBugs::from_csv(bugs_csv);
  logitest::FixtureService service(bugs);
  service.start(port);
  std::cout << "fixture listening on " << service.base_url() << " (Ctrl-C to stop)\n";
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logic-aware REST API testing with LLM agents"};
  app.require_subcommand(1);

  logitest::RunConfig config;
  std::string mock_script;
  std::vector<std::string> headers;
  double temperature = -1.0;
  auto* run = app.add_subcommand("run", "Run a testing campaign against a live service");
  run->add_option("--spec", config.spec_path, "OpenAPI document (JSON or YAML)")->required();
  run->add_option("--base-url", config.base_url, "Base URL of the service under test")->required();
  run->add_option("--out", config.out_dir, "Directory for reports and logs")->required();
  run->add_option("--budget", config.request_budget, "Wire request budget")->capture_default_str();
  run->add_option("--retry-limit", config.retry_limit, "Step retries before a scenario fails")
      ->capture_default_str();
  run->add_option("--seed", config.seed, "Seed for walks and history sampling")
      ->capture_default_str();
  run->add_option("--arg-threshold", config.arg_threshold,
                  "Cosine-similarity cutoff for relationship candidates")
      ->capture_default_str();
  run->add_option("--walk-max", config.walk_max, "Maximum random-walk length")
      ->capture_default_str();
  run->add_option("--mock-llm", mock_script, "Scripted-replies file instead of a live provider");
  run->add_flag("--dump-arg", config.dump_arg, "Write the relationship graph to arg.json");
  run->add_flag("!--ref-params,--no-ref-params", config.ablation.use_ref_params,
                "Skip reference-parameter retrieval (ablation)");
  run->add_flag("!--reflections,--no-reflections", config.ablation.use_reflections,
                "Skip failure-reflection retrieval (ablation)");
  run->add_option("--llm-model", config.agent.model, "Chat model name")->capture_default_str();
  run->add_option("--embedding-model", config.embedding_model, "Embedding model name")
      ->capture_default_str();
  run->add_option("--temperature", temperature, "Sampling temperature (provider default if unset)");
  run->add_option("--timeout", config.http_timeout_seconds, "Per-request timeout in seconds")
      ->capture_default_str();
  run->add_option("--header", headers, "Static header sent with every request ('Name: value')");
  run->add_option("--prompts-dir", config.prompts_dir, "Directory with the agent prompt files")
      ->capture_default_str();
  run->add_option("--log-dir", config.exchange_log_dir,
                  "Directory for exchanges.jsonl (defaults to --out)");
  run->add_option("--memory-journal", config.memory_journal_path,
                  "Path for the memory journal (defaults to <out>/memory.jsonl)");
  run->add_option("--arg-cache", config.arg_cache_dir,
                  "Directory caching built relationship graphs");
  run->add_option("--crash-volatile", config.crash_volatile_patterns,
                  "Regex stripped from crash bodies before deduplication");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Re-render summary.txt from emitted reports");
  report->add_option("--out", report_dir, "Directory holding the reports")->required();

  int fixture_port = 0;
  std::string bugs_csv;
  auto* fixture = app.add_subcommand("fixture", "Serve the bundled buggy petstore fixture");
  fixture->add_option("--port", fixture_port, "Port to listen on")->required();
  fixture->add_option("--bugs", bugs_csv,
                      "Comma-separated seeded bugs to enable (B1,B2,B3,B4); default all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (temperature >= 0.0) config.agent.temperature = temperature;
      for (const auto& header : headers) config.static_headers.insert(split_header(header));
      if (!mock_script.empty()) {
        config.completion = std::make_shared<logitest::MockCompletionProvider>(
            logitest::MockCompletionProvider::load_script_file(mock_script));
        config.embedding = std::make_shared<logitest::MockEmbeddingProvider>();
      } else {
        config.completion = std::make_shared<logitest::HttpCompletionProvider>(
            logitest::HttpProviderOptions::completions_from_env());
        config.embedding = std::make_shared<logitest::HttpEmbeddingProvider>(
            logitest::HttpProviderOptions::embeddings_from_env());
      }
      return run_command(config);
    }
    if (report->parsed()) return report_command(report_dir);
    if (fixture->parsed()) return fixture_command(fixture_port, bugs_csv);
  } catch (const logitest::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
