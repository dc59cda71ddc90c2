#include "logitest/scheduler.hpp"

#include "logitest/errors.hpp"

namespace logitest {

ScenarioScheduler::ScenarioScheduler(int retry_limit) : retry_limit_(retry_limit) {
  if (retry_limit_ < 0) retry_limit_ = 0;
}

void ScenarioScheduler::add_scenario(const TestScenario& scenario) {
  if (!steps_.empty())
    throw ScenarioStillActive("cannot load scenario '" + scenario.scenario_id +
                              "' while steps are pending");
  scenario_failed_ = false;
  for (const auto& step : scenario.steps) steps_.push_back(PendingStep{step, 0});
}

const TestStep& ScenarioScheduler::retrieve_step() const {
  if (steps_.empty()) throw NoActiveScenario("no step to retrieve");
  return steps_.front().step;
}

void ScenarioScheduler::update_status(StepStatus status) {
  if (steps_.empty()) throw NoActiveScenario("no step to update");
  if (status == StepStatus::passed) {
    steps_.pop_front();
    return;
  }
  PendingStep& front = steps_.front();
  ++front.retries;
  if (front.retries > retry_limit_) {
    steps_.clear();
    scenario_failed_ = true;
  }
}

bool ScenarioScheduler::check_termination() const { return steps_.empty(); }

int ScenarioScheduler::current_retry_count() const {
  if (steps_.empty()) throw NoActiveScenario("no step to inspect");
  return steps_.front().retries;
}

}  // namespace logitest
