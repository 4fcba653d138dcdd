#pragma once

#include <string>

#include "coop_lane/planner.hpp"
#include "coop_lane/sim_harness.hpp"

namespace coop_lane {

// Loads a scenario from a JSON document; every field is optional and defaults
// to the standard two-lane setup. Unknown keys are rejected
// (std::invalid_argument) so typos cannot silently fall back to defaults.
Scenario scenario_from_json_text(const std::string& text);
Scenario scenario_from_json_file(const std::string& path);

// Snapshot file for single-maneuver planning: states of C, U and the
// fast-lane candidates, plus optional config overrides.
struct PlanInput {
  ManeuverProblem problem;
  Scenario scenario;  // carries planner/lateral configuration
};
PlanInput plan_input_from_json_file(const std::string& path);

std::string metrics_to_json(const SimMetrics& metrics);
std::string trajectory_to_csv(const std::vector<TrajectoryRow>& rows);
std::string events_to_text(const std::vector<SimEvent>& events);
std::string solution_to_csv(const LongitudinalSolution& sol, double sample_dt = 0.05);

}  // namespace coop_lane
