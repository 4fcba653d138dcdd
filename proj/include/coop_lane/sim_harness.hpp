#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coop_lane/lateral.hpp"
#include "coop_lane/planner.hpp"

namespace coop_lane {

struct Scenario {
  double segment_length = 4000.0;
  double traffic_rate_veh_h = 3000.0;  // fast-lane Poisson arrivals
  double slow_rate_veh_h = 600.0;      // slow-lane arrivals behind U
  double sim_duration_s = 300.0;
  double measurement_window_s = 240.0;  // trailing part of the run
  double warmup_s = 60.0;
  std::uint64_t seed = 1;
  double dt = 0.05;
  double v_U = 16.0;
  double xU_start = 100.0;
  double fast_desired_speed = 34.0;
  double headway_mean = 0.6, headway_std = 0.4, headway_min = 0.1;
  double d_start_mean = 70.0, d_start_std = 10.0, d_start_min = 20.0;
  double retry_cooldown_s = 5.0;
  VehicleLimits base_limits;
  PlannerConfig planner;
  LateralConfig lateral;

  void validate() const;
};

enum class VehiclePhase { Follow, Longitudinal, Lateral };

const char* to_string(VehiclePhase phase);

struct SimVehicle {
  int id = 0;
  Lane lane = Lane::Fast;
  double x = 0.0;
  double v = 0.0;
  double u = 0.0;
  double y = 0.0;  // lateral offset inside the current lane
  VehicleLimits limits;
  double v_des = 34.0;
  double d_start = 70.0;
  VehiclePhase phase = VehiclePhase::Follow;
  bool is_U = false;
  double spawn_time = 0.0;
  double cooldown_until = 0.0;
  int role = 0;  // 0 none, 1 C, 2 i*, 3 i*+1
};

struct ActiveManeuver {
  int c_id = 0;
  int i_id = -1;
  int i1_id = -1;
  double t0 = 0.0;
  double tf = 0.0;
  double t0L = 0.0;
  double flip_t = 0.0;  // lateral completion
  double origin_x = 0.0;
  ManeuverPlan plan;
  LateralSolution lateral;
};

struct SimEvent {
  double t = 0.0;
  std::string event;
  std::string detail;
};

struct TrajectoryRow {
  double t = 0.0;
  int id = 0;
  Lane lane = Lane::Fast;
  double x = 0.0, v = 0.0, u = 0.0;
  VehiclePhase phase = VehiclePhase::Follow;
};

struct SimMetrics {
  double throughput_veh_h = 0.0;
  int completed_maneuvers = 0;
  int aborted_maneuvers = 0;
  double maneuver_time_mean = 0.0;
  double maneuver_time_std = 0.0;
  double travel_time_mean = 0.0;
  int safety_violations = 0;
  std::vector<double> disruptions;  // accepted maneuvers, in completion order
};

struct World {
  Scenario scenario;
  double t = 0.0;
  int next_id = 1;
  std::vector<SimVehicle> vehicles;
  std::optional<ActiveManeuver> active;
  std::mt19937_64 rng;
  double next_fast_arrival = 0.0;
  double next_slow_arrival = 0.0;
  int pending_fast = 0;
  int pending_slow = 0;
  // accounting
  int violations = 0;
  std::vector<std::pair<int, int>> violating_pairs;  // currently in violation
  std::vector<SimEvent> events;
  std::vector<double> maneuver_times;
  std::vector<double> disruptions;
  std::vector<double> travel_times;
  int aborted = 0;
  int window_crossings = 0;
};

// Speed-tracking / car-following control: free term k_v*(v_des - v); with a
// leader, the follow term k_v*(v_lead - v) + k_g*(gap - delta(v)) caps it.
double baseline_follow(const SimVehicle& self, const SimVehicle* leader,
                       const VehicleLimits& limits, double dt);

World make_world(const Scenario& scenario);

// One fixed step: maneuvering vehicles sample their planned arcs exactly,
// others follow the baseline law; lateral phases advance and lane membership
// flips on completion; safety violations are recorded on the world.
void step_simulation(World& world, double dt);

struct SimResult {
  SimMetrics metrics;
  std::vector<SimEvent> events;
  std::vector<TrajectoryRow> trajectory;
};

SimResult run_scenario(const Scenario& scenario, bool record_trajectory = false);

}  // namespace coop_lane
