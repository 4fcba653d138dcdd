#include "coop_lane/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coop_lane {

void Scenario::validate() const {
  if (traffic_rate_veh_h < 0.0 || slow_rate_veh_h < 0.0) {
    throw std::invalid_argument("Scenario: rates must be >= 0");
  }
  if (dt <= 0.0) throw std::invalid_argument("Scenario: dt > 0");
  if (sim_duration_s < measurement_window_s) {
    throw std::invalid_argument("Scenario: duration must cover the window");
  }
  base_limits.validate();
  planner.validate();
}

const char* to_string(VehiclePhase phase) {
  switch (phase) {
    case VehiclePhase::Follow: return "follow";
    case VehiclePhase::Longitudinal: return "longitudinal";
    case VehiclePhase::Lateral: return "lateral";
  }
  return "?";
}

double baseline_follow(const SimVehicle& self, const SimVehicle* leader,
                       const VehicleLimits& limits, double dt) {
  constexpr double k_v = 0.6;      // 1/s
  constexpr double k_g = 0.2;      // 1/s^2
  constexpr double k_a = 2.0;      // approach-envelope gain, 1/s
  constexpr double a_comf = 0.75;  // envelope deceleration, m/s^2
  constexpr double margin = 0.4;   // envelope aims this far outside delta, m
  double u = k_v * (self.v_des - self.v);
  if (leader) {
    const double gap = leader->x - self.x;
    const double slack = gap - safety_distance(limits, self.v);
    const double follow = k_v * (leader->v - self.v) + k_g * slack;
    // Approach envelope on a one-step lookahead slack: arrive at the safety
    // gap tangentially instead of overshooting it.
    const double closing = self.v - leader->v;
    const double slack_pred = slack - margin - std::max(0.0, closing) * dt;
    // Inside the margin the envelope turns negative and eases back out.
    const double v_safe =
        slack_pred >= 0.0
            ? leader->v + std::sqrt(2.0 * a_comf * slack_pred)
            : leader->v - std::sqrt(2.0 * a_comf * -slack_pred);
    // Leader-acceleration feedforward keeps platoon dips out of the gap.
    u = std::min({u, follow, std::min(leader->u, 0.0) + k_a * (v_safe - self.v)});
  }
  return std::clamp(u, limits.u_min, limits.u_max);
}

namespace {

double draw_truncated_normal(std::mt19937_64& rng, double mean, double std,
                             double lo) {
  std::normal_distribution<double> dist(mean, std);
  for (int k = 0; k < 100; ++k) {
    const double x = dist(rng);
    if (x >= lo) return x;
  }
  return lo;
}

double draw_exponential_gap(std::mt19937_64& rng, double rate_veh_h) {
  if (rate_veh_h <= 0.0) return 1e18;
  std::exponential_distribution<double> dist(rate_veh_h / 3600.0);
  return dist(rng);
}

// Effective lane for ordering: a laterally-moving C counts as fast-lane once
// it is more than half way across.
Lane effective_lane(const SimVehicle& v, double lane_width) {
  if (v.phase == VehiclePhase::Lateral && v.lane == Lane::Slow &&
      v.y >= 0.5 * lane_width) {
    return Lane::Fast;
  }
  return v.lane;
}

std::vector<int> lane_order(const World& world, Lane lane) {
  std::vector<int> idx;
  for (int k = 0; k < static_cast<int>(world.vehicles.size()); ++k) {
    if (effective_lane(world.vehicles[static_cast<size_t>(k)],
                       world.scenario.lateral.lane_width) == lane) {
      idx.push_back(k);
    }
  }
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return world.vehicles[static_cast<size_t>(a)].x >
           world.vehicles[static_cast<size_t>(b)].x;
  });
  return idx;
}

SimVehicle* find_vehicle(World& world, int id) {
  for (SimVehicle& v : world.vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

void record_violation(World& world, int follower_id, int leader_id, double deficit) {
  const auto key = std::make_pair(follower_id, leader_id);
  const bool already =
      std::find(world.violating_pairs.begin(), world.violating_pairs.end(), key) !=
      world.violating_pairs.end();
  if (!already) {
    world.violating_pairs.push_back(key);
    ++world.violations;
    world.events.push_back(
        {world.t, "violation",
         "follower=" + std::to_string(follower_id) + " leader=" +
             std::to_string(leader_id) + " deficit=" + std::to_string(deficit)});
  }
}

void clear_violation(World& world, int follower_id, int leader_id) {
  const auto key = std::make_pair(follower_id, leader_id);
  world.violating_pairs.erase(
      std::remove(world.violating_pairs.begin(), world.violating_pairs.end(), key),
      world.violating_pairs.end());
}

void check_safety(World& world) {
  const double lat_eps = world.scenario.lateral.eps_v;
  for (Lane lane : {Lane::Slow, Lane::Fast}) {
    const auto order = lane_order(world, lane);
    for (size_t k = 1; k < order.size(); ++k) {
      const SimVehicle& leader = world.vehicles[static_cast<size_t>(order[k - 1])];
      const SimVehicle& follower = world.vehicles[static_cast<size_t>(order[k])];
      const double gap = leader.x - follower.x;
      // The eps_v standard applies while either party is mid lane change.
      const bool lateral_pair = leader.phase == VehiclePhase::Lateral ||
                                follower.phase == VehiclePhase::Lateral;
      const double required =
          lateral_pair ? lat_eps : safety_distance(follower.limits, follower.v);
      if (gap < required - kTol) {
        record_violation(world, follower.id, leader.id, required - gap);
      } else {
        clear_violation(world, follower.id, leader.id);
      }
    }
  }
}

}  // namespace

World make_world(const Scenario& scenario) {
  scenario.validate();
  World world;
  world.scenario = scenario;
  world.rng.seed(scenario.seed);
  // Vehicle U anchors the slow lane.
  SimVehicle u;
  u.id = world.next_id++;
  u.lane = Lane::Slow;
  u.x = scenario.xU_start;
  u.v = scenario.v_U;
  u.v_des = scenario.v_U;
  u.limits = scenario.base_limits;
  u.is_U = true;
  world.vehicles.push_back(u);
  world.next_fast_arrival = draw_exponential_gap(world.rng, scenario.traffic_rate_veh_h);
  world.next_slow_arrival = draw_exponential_gap(world.rng, scenario.slow_rate_veh_h);
  return world;
}

namespace {

void advance_follow(SimVehicle& v, const SimVehicle* leader, double dt) {
  if (v.is_U) {
    v.u = 0.0;
    v.x += v.v * dt;
    return;
  }
  v.u = baseline_follow(v, leader, v.limits, dt);
  v.x += v.v * dt + 0.5 * v.u * dt * dt;
  v.v = std::clamp(v.v + v.u * dt, 0.0, v.limits.v_max);
}

}  // namespace

void step_simulation(World& world, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("step_simulation: dt > 0");
  const double t_next = world.t + dt;

  // Leaders resolved against the pre-step order.
  std::vector<const SimVehicle*> leaders(world.vehicles.size(), nullptr);
  for (Lane lane : {Lane::Slow, Lane::Fast}) {
    const auto order = lane_order(world, lane);
    for (size_t k = 1; k < order.size(); ++k) {
      leaders[static_cast<size_t>(order[k])] =
          &world.vehicles[static_cast<size_t>(order[k - 1])];
    }
  }
  // A cooperating rear vehicle keys on C across lanes until the flip.
  if (world.active) {
    const SimVehicle* c = find_vehicle(world, world.active->c_id);
    if (c != nullptr && c->lane == Lane::Slow) {
      for (size_t k = 0; k < world.vehicles.size(); ++k) {
        if (world.vehicles[k].id == world.active->i1_id &&
            world.vehicles[k].phase == VehiclePhase::Follow) {
          if (leaders[k] == nullptr || leaders[k]->x > c->x) leaders[k] = c;
        }
      }
    }
  }

  for (size_t k = 0; k < world.vehicles.size(); ++k) {
    SimVehicle& v = world.vehicles[k];
    const ActiveManeuver* m = world.active ? &*world.active : nullptr;
    const bool in_plan = m != nullptr && v.role != 0 && world.t < m->tf - 1e-12;
    if (in_plan) {
      const LongitudinalSolution* traj = nullptr;
      if (v.role == 1) traj = &*m->plan.traj_C;
      if (v.role == 2 && m->plan.traj_i) traj = &*m->plan.traj_i;
      if (v.role == 3 && m->plan.traj_i1) traj = &*m->plan.traj_i1;
      if (traj != nullptr) {
        const auto s = traj->eval(std::min(t_next, traj->tf));
        // Exact sampling, with constant-speed extrapolation over the step
        // fragment past tf.
        const double over = std::max(0.0, t_next - traj->tf);
        v.x = s.x + s.v * over + m->origin_x;
        v.v = s.v;
        v.u = over > 0.0 ? 0.0 : s.u;
      } else {
        advance_follow(v, leaders[k], dt);
      }
    } else if (v.role == 1 && m != nullptr && t_next > m->tf) {
      // Longitudinal phase done; hold speed until the lateral flip.
      v.u = 0.0;
      v.x += v.v * dt;
    } else {
      advance_follow(v, leaders[k], dt);
    }
    // Lateral profile overlay for C.
    if (m != nullptr && v.role == 1 && t_next >= m->t0L && v.lane == Lane::Slow) {
      v.phase = VehiclePhase::Lateral;
      const double s = t_next - m->t0L;
      const auto& states = m->lateral.trajectory.states;
      if (m->lateral.dt > 0.0 && states.size() > 1) {
        const double fi = s / m->lateral.dt;
        const size_t i0 = std::min(states.size() - 1, static_cast<size_t>(fi));
        v.y = states[i0].y;
      }
      if (t_next >= m->flip_t) {
        v.lane = Lane::Fast;
        v.y = 0.0;
        v.phase = t_next <= m->tf ? VehiclePhase::Longitudinal : VehiclePhase::Follow;
        world.events.push_back({t_next, "lane_change", "id=" + std::to_string(v.id)});
      }
    }
  }

  world.t = t_next;
  check_safety(world);

  // Close out the maneuver once both phases are done.
  if (world.active) {
    const ActiveManeuver& m = *world.active;
    if (world.t >= std::max(m.tf, m.flip_t)) {
      world.maneuver_times.push_back(m.tf - m.t0);
      world.disruptions.push_back(m.plan.D_value);
      world.events.push_back({world.t, "maneuver_complete",
                              "c=" + std::to_string(m.c_id) + " tf=" +
                                  std::to_string(m.tf - m.t0)});
      for (SimVehicle& v : world.vehicles) {
        if (v.role != 0) {
          v.role = 0;
          v.phase = VehiclePhase::Follow;
        }
      }
      world.active.reset();
    } else {
      for (SimVehicle& v : world.vehicles) {
        if (v.role != 0 && v.phase == VehiclePhase::Follow &&
            world.t <= m.tf + 1e-12) {
          v.phase = v.role == 1 && world.t >= m.t0L ? VehiclePhase::Lateral
                                                    : VehiclePhase::Longitudinal;
        }
      }
    }
  }
}

namespace {

bool try_spawn(World& world, Lane lane) {
  const Scenario& sc = world.scenario;
  SimVehicle v;
  v.id = world.next_id;
  v.lane = lane;
  v.x = 0.0;
  v.limits = sc.base_limits;
  v.limits.phi = draw_truncated_normal(world.rng, sc.headway_mean, sc.headway_std,
                                       sc.headway_min);
  v.d_start = draw_truncated_normal(world.rng, sc.d_start_mean, sc.d_start_std,
                                    sc.d_start_min);
  v.v_des = sc.fast_desired_speed;
  v.spawn_time = world.t;

  // Entry speed and blocking: never insert in violation of the safety gap.
  const SimVehicle* rear = nullptr;
  for (const SimVehicle& other : world.vehicles) {
    if (effective_lane(other, sc.lateral.lane_width) != lane) continue;
    if (rear == nullptr || other.x < rear->x) rear = &other;
  }
  double v_entry = sc.fast_desired_speed;
  if (rear != nullptr) {
    v_entry = std::min(v_entry, std::max(rear->v, sc.base_limits.v_min));
    const double need = safety_distance(v.limits, v_entry) +
                        0.5 * (sc.fast_desired_speed - rear->v > 0.0
                                   ? sc.fast_desired_speed - rear->v
                                   : 0.0);
    if (rear->x < need) return false;
  }
  v.v = v_entry;
  world.next_id++;
  world.vehicles.push_back(v);
  return true;
}

void spawn_traffic(World& world) {
  const Scenario& sc = world.scenario;
  while (world.t >= world.next_fast_arrival) {
    ++world.pending_fast;
    world.next_fast_arrival += draw_exponential_gap(world.rng, sc.traffic_rate_veh_h);
  }
  while (world.t >= world.next_slow_arrival) {
    ++world.pending_slow;
    world.next_slow_arrival += draw_exponential_gap(world.rng, sc.slow_rate_veh_h);
  }
  if (world.pending_fast > 0 && try_spawn(world, Lane::Fast)) --world.pending_fast;
  if (world.pending_slow > 0 && try_spawn(world, Lane::Slow)) --world.pending_slow;
}

void try_trigger(World& world) {
  if (world.active) return;
  const Scenario& sc = world.scenario;
  const auto slow = lane_order(world, Lane::Slow);
  // C is the vehicle immediately behind U on the slow lane.
  int c_idx = -1;
  for (size_t k = 1; k < slow.size(); ++k) {
    if (world.vehicles[static_cast<size_t>(slow[k - 1])].is_U) {
      c_idx = slow[k];
      break;
    }
  }
  if (c_idx < 0) return;
  SimVehicle& c = world.vehicles[static_cast<size_t>(c_idx)];
  const SimVehicle* u = find_vehicle(world, 1);
  if (u == nullptr || c.phase != VehiclePhase::Follow || world.t < c.cooldown_until) {
    return;
  }
  if (!trigger_check(u->x, c.x, c.d_start)) return;
  // C must actually be following U, not still closing in at full speed.
  if (c.v > u->v + 5.0) return;

  ManeuverProblem problem;
  problem.t0 = world.t;
  problem.C = ManeuverVehicle{VehicleState{c.id, 0.0, c.v, Lane::Slow}, c.limits};
  problem.U = VehicleState{u->id, u->x - c.x, u->v, Lane::Slow};
  for (const SimVehicle& v : world.vehicles) {
    if (v.lane == Lane::Fast && v.phase == VehiclePhase::Follow && !v.is_U) {
      problem.fast_lane.push_back(
          ManeuverVehicle{VehicleState{v.id, v.x - c.x, v.v, Lane::Fast}, v.limits});
    }
  }
  PlannerConfig cfg = sc.planner;
  cfg.flow.v_max_road = sc.planner.flow.v_max_road;
  const ManeuverPlan plan = plan_maneuver(problem, cfg);
  if (plan.status == PlanStatus::Aborted) {
    ++world.aborted;
    c.cooldown_until = world.t + sc.retry_cooldown_s;
    std::string detail = std::string("reason=") + to_string(plan.abort_reason);
    for (const PairEvaluation& e : plan.pair_table) {
      detail += " p" + std::to_string(e.front_index) + ":" +
                (e.feasible ? "D=" + std::to_string(e.D) : to_string(e.reason));
    }
    world.events.push_back({world.t, "abort", detail});
    return;
  }

  LateralConfig lat = sc.lateral;
  lat.v = std::max(1.0, plan.traj_C->terminal_v);
  const auto lateral = solve_lateral(lat);
  if (!lateral) {
    ++world.aborted;
    c.cooldown_until = world.t + sc.retry_cooldown_s;
    world.events.push_back({world.t, "abort", "reason=lateral"});
    return;
  }

  ActiveManeuver m;
  m.c_id = c.id;
  m.t0 = world.t;
  m.tf = plan.tf_final;
  m.t0L = plan.t0L;
  m.flip_t = plan.t0L + lateral->t_f_L;
  m.origin_x = c.x;
  m.plan = plan;
  m.lateral = *lateral;
  const auto id_at = [&](int index) {
    return plan.set.is_virtual(index) ? -1
                                      : plan.set.states[static_cast<size_t>(index)].id;
  };
  m.i_id = id_at(plan.pair_front);
  m.i1_id = id_at(plan.pair_front + 1);
  c.role = 1;
  c.phase = VehiclePhase::Longitudinal;
  if (SimVehicle* vi = find_vehicle(world, m.i_id)) {
    vi->role = 2;
    vi->phase = VehiclePhase::Longitudinal;
  }
  if (SimVehicle* vi1 = find_vehicle(world, m.i1_id)) {
    vi1->role = 3;
    vi1->phase = VehiclePhase::Longitudinal;
  }
  world.active = m;
  world.events.push_back(
      {world.t, "planned",
       "c=" + std::to_string(c.id) + " pair=" + std::to_string(plan.pair_front) +
           " tf=" + std::to_string(plan.tf_final - world.t) +
           " D=" + std::to_string(plan.D_value) +
           " relax=" + std::to_string(plan.relaxations_used)});
}

void retire_vehicles(World& world) {
  const double limit = world.scenario.segment_length + 200.0;
  auto& vs = world.vehicles;
  for (const SimVehicle& v : vs) {
    if (v.x > limit && v.role != 0) return;  // never drop a cooperating vehicle
  }
  vs.erase(std::remove_if(vs.begin(), vs.end(),
                          [&](const SimVehicle& v) {
                            return v.x > limit && v.role == 0 && !v.is_U;
                          }),
           vs.end());
}

}  // namespace

SimResult run_scenario(const Scenario& scenario, bool record_trajectory) {
  World world = make_world(scenario);
  SimResult result;
  const double window_start = scenario.sim_duration_s - scenario.measurement_window_s;
  std::vector<double> prev_x;

  const int steps = static_cast<int>(std::round(scenario.sim_duration_s / scenario.dt));
  for (int step = 0; step < steps; ++step) {
    spawn_traffic(world);
    try_trigger(world);

    prev_x.clear();
    for (const SimVehicle& v : world.vehicles) prev_x.push_back(v.x);
    const size_t n_before = world.vehicles.size();

    step_simulation(world, scenario.dt);

    for (size_t k = 0; k < n_before; ++k) {
      const SimVehicle& v = world.vehicles[k];
      if (prev_x[k] < scenario.segment_length && v.x >= scenario.segment_length) {
        world.travel_times.push_back(world.t - v.spawn_time);
        if (world.t >= window_start) ++world.window_crossings;
      }
    }
    if (record_trajectory) {
      for (const SimVehicle& v : world.vehicles) {
        result.trajectory.push_back({world.t, v.id, v.lane, v.x, v.v, v.u, v.phase});
      }
    }
    retire_vehicles(world);
  }

  SimMetrics& m = result.metrics;
  m.throughput_veh_h = world.window_crossings * 3600.0 / scenario.measurement_window_s;
  m.completed_maneuvers = static_cast<int>(world.maneuver_times.size());
  m.aborted_maneuvers = world.aborted;
  m.safety_violations = world.violations;
  m.disruptions = world.disruptions;
  if (!world.maneuver_times.empty()) {
    const double n = static_cast<double>(world.maneuver_times.size());
    const double mean =
        std::accumulate(world.maneuver_times.begin(), world.maneuver_times.end(), 0.0) / n;
    double var = 0.0;
    for (double x : world.maneuver_times) var += (x - mean) * (x - mean);
    m.maneuver_time_mean = mean;
    m.maneuver_time_std = std::sqrt(var / n);
  }
  if (!world.travel_times.empty()) {
    m.travel_time_mean =
        std::accumulate(world.travel_times.begin(), world.travel_times.end(), 0.0) /
        static_cast<double>(world.travel_times.size());
  }
  result.events = std::move(world.events);
  return result;
}

}  // namespace coop_lane
