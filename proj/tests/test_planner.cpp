#include <doctest.h>

#include <cmath>
#include <sstream>

#include "coop_lane/planner.hpp"

using namespace coop_lane;

namespace {

PlannerConfig test_config() {
  PlannerConfig cfg;
  cfg.c_weights = CWeights{0.55, 0.25, 0.2};
  cfg.tracking.alpha_v = 0.5;
  cfg.tracking.v_th = 22.0;
  cfg.flow.omega = 0.3;
  cfg.flow.v_max_road = 35.0;
  cfg.T_max = 12.0;
  cfg.parallel_pairs = false;
  return cfg;
}

ManeuverVehicle vehicle(int id, double x, double v, Lane lane, double phi = 0.6) {
  VehicleLimits lim;
  lim.phi = phi;
  return ManeuverVehicle{VehicleState{id, x, v, lane}, lim};
}

// Typical trigger snapshot: C stuck behind U, fast-lane platoon alongside.
ManeuverProblem platoon_problem(const std::vector<std::pair<double, double>>& fast) {
  ManeuverProblem p;
  p.t0 = 0.0;
  p.C = vehicle(1, 0.0, 18.0, Lane::Slow);
  p.U = VehicleState{2, 55.0, 16.0, Lane::Slow};
  int id = 10;
  for (const auto& [x, v] : fast) {
    p.fast_lane.push_back(vehicle(id++, x, v, Lane::Fast));
  }
  return p;
}

std::string fingerprint(const ManeuverPlan& plan) {
  std::ostringstream out;
  out.precision(17);
  out << to_string(plan.status) << '|' << plan.pair_front << '|' << plan.tf_final
      << '|' << plan.relaxations_used << '|' << plan.D_value << '|' << plan.t0L
      << '|' << plan.v_flow;
  if (plan.traj_C) {
    for (const Arc& a : plan.traj_C->arcs) {
      out << '|' << a.t_start << ',' << a.t_end << ',' << a.x0 << ',' << a.v0 << ','
          << a.u0 << ',' << a.jerk;
    }
  }
  for (const PairEvaluation& e : plan.pair_table) {
    out << '|' << e.front_index << ',' << e.feasible << ',' << e.D << ','
        << e.relaxations_used;
  }
  return out.str();
}

}  // namespace

TEST_CASE("trigger_check") {
  CHECK(trigger_check(49.0, 0.0, 50.0));
  CHECK(trigger_check(50.0, 0.0, 50.0));  // boundary inclusive
  CHECK(!trigger_check(80.0, 0.0, 70.0));
  CHECK_THROWS_AS(trigger_check(-1.0, 0.0, 50.0), std::invalid_argument);
}

TEST_CASE("evaluate_pair with a virtual front skips the front OCP") {
  auto p = platoon_problem({{-60.0, 20.0}});
  auto cfg = test_config();
  FlowParams flow = cfg.flow;
  flow.T_max = cfg.T_max;
  const auto set = build_candidate_set({p.fast_lane[0].state}, 0.0,
                                       p.C.limits.v_min, p.U.x, p.U.v, flow);
  REQUIRE(set.size() == 3);
  REQUIRE(set.virtual_front);
  const double v_flow = flow_speed(set, flow);
  CavCProblem cp{0.0, 0.0, 18.0, p.U.x, p.U.v, v_flow, cfg.T_max, p.C.limits};
  const auto base = solve_cav_c(cp, cfg.c_weights);
  REQUIRE(base.ok());
  const auto eval = evaluate_pair(0, set, p, base.value(), v_flow, cfg);
  CHECK(!eval.traj_i.has_value());
  if (eval.feasible) {
    CHECK(eval.D_i == doctest::Approx(0.0));
    CHECK(eval.D ==
          doctest::Approx(cfg.disruption.zeta_C * eval.D_C +
                          cfg.disruption.zeta_i1 * eval.D_i1));
  }
}

TEST_CASE("evaluate_pair disruption equals recomputing from the trajectories") {
  auto p = platoon_problem({{30.0, 30.0}, {-25.0, 30.0}, {-70.0, 31.0}});
  auto cfg = test_config();
  FlowParams flow = cfg.flow;
  flow.T_max = cfg.T_max;
  std::vector<VehicleState> fast;
  for (const auto& mv : p.fast_lane) fast.push_back(mv.state);
  const auto set = build_candidate_set(fast, 0.0, p.C.limits.v_min, p.U.x, p.U.v, flow);
  const double v_flow = flow_speed(set, flow);
  CavCProblem cp{0.0, 0.0, 18.0, p.U.x, p.U.v, v_flow, cfg.T_max, p.C.limits};
  const auto base = solve_cav_c(cp, cfg.c_weights);
  REQUIRE(base.ok());
  for (int k = 0; k + 1 < set.size(); ++k) {
    const auto eval = evaluate_pair(k, set, p, base.value(), v_flow, cfg);
    if (!eval.feasible) continue;
    double D_i = 0.0, D_i1 = 0.0;
    const double tf = base.value().tf;
    if (eval.traj_i) {
      const auto& s = set.states[static_cast<size_t>(k)];
      D_i = vehicle_disruption(eval.traj_i->terminal_x, eval.traj_i->terminal_v, tf,
                               s.x, s.v, 0.0, v_flow, cfg.disruption, p.C.limits);
    }
    if (eval.traj_i1) {
      const auto& s = set.states[static_cast<size_t>(k + 1)];
      D_i1 = vehicle_disruption(eval.traj_i1->terminal_x, eval.traj_i1->terminal_v,
                                tf, s.x, s.v, 0.0, v_flow, cfg.disruption,
                                p.C.limits);
    }
    const double D = total_disruption(eval.D_C, D_i, D_i1, cfg.disruption);
    CHECK(eval.D == doctest::Approx(D).epsilon(1e-9));
  }
}

TEST_CASE("plan_maneuver picks the minimum-disruption pair under the threshold") {
  auto p = platoon_problem({{40.0, 31.0}, {-15.0, 30.5}, {-55.0, 31.5}, {-95.0, 30.0}});
  auto cfg = test_config();
  cfg.disruption.D_th = 0.15;
  const auto plan = plan_maneuver(p, cfg);
  REQUIRE(plan.status == PlanStatus::Planned);
  CHECK(plan.D_value <= 0.15 + 1e-12);
  for (const PairEvaluation& e : plan.pair_table) {
    if (e.feasible && e.D <= cfg.disruption.D_th) {
      CHECK(plan.D_value <= e.D + 1e-12);
    }
  }
  // Plan validity: all safety constraints pass and tf respects T_max.
  CHECK(plan.tf_final <= cfg.T_max + 1e-9);
  REQUIRE(plan.traj_C.has_value());
  const double tf = plan.tf_final;
  const auto traj_U = LongitudinalSolution::constant_speed(0.0, tf, p.U.x, p.U.v);
  const auto front =
      plan.traj_i ? *plan.traj_i
                  : LongitudinalSolution::constant_speed(
                        0.0, tf, plan.set.states[static_cast<size_t>(plan.pair_front)].x,
                        plan.set.states[static_cast<size_t>(plan.pair_front)].v);
  const auto rear =
      plan.traj_i1 ? *plan.traj_i1
                   : LongitudinalSolution::constant_speed(
                         0.0, tf,
                         plan.set.states[static_cast<size_t>(plan.pair_front + 1)].x,
                         plan.set.states[static_cast<size_t>(plan.pair_front + 1)].v);
  CHECK(check_safety_constraints(*plan.traj_C, traj_U, front, rear, p.C.limits,
                                 p.C.limits)
            .clean());
}

TEST_CASE("threshold subset property") {
  auto p = platoon_problem({{35.0, 31.0}, {-20.0, 30.0}, {-60.0, 30.0}});
  auto cfg = test_config();
  cfg.disruption.D_th = 0.15;
  const auto tight = plan_maneuver(p, cfg);
  cfg.disruption.D_th = 1e18;
  const auto loose = plan_maneuver(p, cfg);
  REQUIRE(tight.pair_table.size() == loose.pair_table.size());
  for (size_t k = 0; k < tight.pair_table.size(); ++k) {
    const auto& t = tight.pair_table[k];
    if (t.feasible && t.D <= 0.15) {
      CHECK(loose.pair_table[k].feasible);
    }
  }
}

TEST_CASE("plans are bit-identical across reruns and thread modes") {
  auto p = platoon_problem({{40.0, 31.0}, {-15.0, 30.5}, {-55.0, 31.5}});
  auto cfg = test_config();
  cfg.parallel_pairs = false;
  const auto a = plan_maneuver(p, cfg);
  const auto b = plan_maneuver(p, cfg);
  CHECK(fingerprint(a) == fingerprint(b));
  cfg.parallel_pairs = true;
  const auto c = plan_maneuver(p, cfg);
  CHECK(fingerprint(a) == fingerprint(c));
}

TEST_CASE("zeta scaling leaves the argmin unchanged") {
  auto p = platoon_problem({{40.0, 31.0}, {-15.0, 30.5}, {-55.0, 31.5}});
  auto cfg = test_config();
  cfg.disruption.D_th = 1e18;  // pure argmin comparison
  const auto base = plan_maneuver(p, cfg);
  // Permissible rescaling keeps ratios: use equal thirds vs scaled thirds.
  auto cfg2 = cfg;
  cfg2.disruption.zeta_C = 1.0 / 3;
  cfg2.disruption.zeta_i = 1.0 / 3;
  cfg2.disruption.zeta_i1 = 1.0 / 3;
  const auto thirds = plan_maneuver(p, cfg2);
  // Scaling all weights by a positive constant is blocked by the sum-to-one
  // invariant, so verify directly on the recorded pair table instead.
  for (double scale : {2.0, 0.5}) {
    int best = -1;
    double bestD = 1e30;
    for (const auto& e : thirds.pair_table) {
      if (!e.feasible) continue;
      const double D = scale * e.D;
      if (D < bestD) {
        bestD = D;
        best = e.front_index;
      }
    }
    CHECK(best == thirds.pair_front);
  }
  CHECK(base.status == PlanStatus::Planned);
}

TEST_CASE("relaxation ladder accepts a pair that fails at tf*") {
  // One candidate pair squeezed so the first solve violates the disruption
  // threshold but a relaxed horizon passes.
  auto p = platoon_problem({{18.0, 29.0}, {-12.0, 29.0}});
  auto cfg = test_config();
  cfg.lambda_tf = 1.1;
  cfg.max_relaxations = 10;
  cfg.disruption.D_th = 0.15;
  const auto plan = plan_maneuver(p, cfg);
  if (plan.status == PlanStatus::Planned && plan.relaxations_used > 0) {
    CHECK(plan.tf_final > 0.0);
    CHECK(plan.D_value <= 0.15 + 1e-12);
  }
  // The ladder never exceeds T_max.
  for (const auto& e : plan.pair_table) {
    CHECK(e.tf_used <= cfg.T_max + 1e-9);
  }
}

TEST_CASE("aborts when no pair is acceptable and fallback is off") {
  // Impossibly tight disruption threshold.
  auto p = platoon_problem({{30.0, 30.0}, {-25.0, 30.0}});
  auto cfg = test_config();
  cfg.disruption.D_th = 0.0;
  cfg.allow_selfish_fallback = false;
  const auto plan = plan_maneuver(p, cfg);
  // With a zero threshold only an exactly-zero disruption pair may pass;
  // squeezed geometry makes that impossible here.
  CHECK(plan.status == PlanStatus::Aborted);
}

TEST_CASE("selfish fallback picks the smallest feasible horizon") {
  auto p = platoon_problem({{30.0, 30.0}, {-25.0, 30.0}});
  auto cfg = test_config();
  cfg.disruption.D_th = 0.0;
  cfg.allow_selfish_fallback = true;
  const auto plan = plan_maneuver(p, cfg);
  if (plan.status == PlanStatus::SelfishFallback) {
    double min_tf = 1e30;
    for (const auto& e : plan.pair_table) {
      if (e.feasible) min_tf = std::min(min_tf, e.tf_used);
    }
    CHECK(plan.tf_final <= min_tf + 1e-9);
  }
}
