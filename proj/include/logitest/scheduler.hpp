#pragma once

#include <cstddef>
#include <deque>
#include <optional>

#include "logitest/test_model.hpp"

namespace logitest {

enum class StepStatus { passed, failed };

// Holds the steps of the scenario currently being executed. Steps run in
// order; a failed step is retried in place until its retry count exceeds
// the limit, at which point the whole remaining scenario is abandoned.
class ScenarioScheduler {
 public:
  explicit ScenarioScheduler(int retry_limit = 3);

  // Loads a new scenario. Throws ScenarioStillActive when steps from the
  // previous one are still pending.
  void add_scenario(const TestScenario& scenario);

  // Returns the step to execute next without consuming it. Throws
  // NoActiveScenario when the list is empty.
  const TestStep& retrieve_step() const;

  // Reports the outcome of the step last handed out. passed -> the step is
  // removed; failed -> its retry count grows, and once it exceeds the retry
  // limit the remaining steps are dropped and the scenario is marked failed.
  void update_status(StepStatus status);

  // True when no steps remain and a new scenario may be loaded.
  bool check_termination() const;

  // True when the most recently finished scenario was abandoned.
  bool scenario_failed() const { return scenario_failed_; }

  int retry_limit() const { return retry_limit_; }
  std::size_t pending_steps() const { return steps_.size(); }

  // Retry count of the current front step (0 before any failure).
  int current_retry_count() const;

 private:
  struct PendingStep {
    TestStep step;
    int retries = 0;
  };

  int retry_limit_;
  std::deque<PendingStep> steps_;
  bool scenario_failed_ = false;
};

}  // namespace logitest
