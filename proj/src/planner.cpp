#include "coop_lane/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace coop_lane {

void PlannerConfig::validate() const {
  if (lambda_tf <= 1.0) throw std::invalid_argument("PlannerConfig: lambda_tf > 1");
  if (max_relaxations < 0) throw std::invalid_argument("PlannerConfig: max_relaxations >= 0");
  if (T_max <= 0.0) throw std::invalid_argument("PlannerConfig: T_max > 0");
  c_weights.validate();
  tracking.validate();
  flow.validate();
  disruption.validate();
}

bool trigger_check(double xU, double xC, double d_start) {
  if (xU < xC) {
    throw std::invalid_argument("trigger_check: U must be ahead of C");
  }
  return xU - xC <= d_start;
}

const char* to_string(PlanStatus status) {
  switch (status) {
    case PlanStatus::Planned: return "Planned";
    case PlanStatus::Aborted: return "Aborted";
    case PlanStatus::SelfishFallback: return "SelfishFallback";
  }
  return "?";
}

namespace {

LongitudinalSolution member_trajectory(const CandidateSet& set, int index, double t0,
                                       double tf) {
  const VehicleState& s = set.states[static_cast<size_t>(index)];
  return LongitudinalSolution::constant_speed(t0, tf, s.x, s.v);
}

}  // namespace

PairEvaluation evaluate_pair(int front_index, const CandidateSet& set,
                             const ManeuverProblem& problem,
                             const LongitudinalSolution& traj_C, double v_flow,
                             const PlannerConfig& config) {
  PairEvaluation eval;
  eval.front_index = front_index;
  eval.tf_used = traj_C.tf;
  const int rear_index = front_index + 1;
  const double t0 = problem.t0;
  const double tf = traj_C.tf;
  const double xC_tf = traj_C.terminal_x;
  const double vC_tf = traj_C.terminal_v;

  const auto limits_of = [&](int index) -> const VehicleLimits& {
    const int id = set.states[static_cast<size_t>(index)].id;
    for (const ManeuverVehicle& mv : problem.fast_lane) {
      if (mv.state.id == id) return mv.limits;
    }
    return problem.C.limits;
  };

  std::optional<LongitudinalSolution> traj_i, traj_i1;
  if (!set.is_virtual(front_index)) {
    const VehicleState& s = set.states[static_cast<size_t>(front_index)];
    std::optional<LeaderRef> leader;
    if (front_index >= 1 && !set.is_virtual(front_index - 1)) {
      const VehicleState& l = set.states[static_cast<size_t>(front_index - 1)];
      leader = LeaderRef{l.x, l.v};
    }
    FixedTimeProblem p{t0, tf, s.x, s.v, v_flow, limits_of(front_index)};
    const SolveOutcome out = solve_tracking_i(p, leader, xC_tf, vC_tf,
                                              problem.C.limits, config.tracking);
    if (!out.ok()) {
      eval.reason = out.reason;
      if (std::getenv("COOP_LANE_LOG") != nullptr) {
        std::fprintf(stderr, "[planner] pair %d front solve: %s (x0=%.1f v0=%.1f)\n",
                     front_index, to_string(out.reason), s.x, s.v);
      }
      return eval;
    }
    traj_i = out.solution;
  }
  if (!set.is_virtual(rear_index)) {
    const VehicleState& s = set.states[static_cast<size_t>(rear_index)];
    FixedTimeProblem p{t0, tf, s.x, s.v, v_flow, limits_of(rear_index)};
    const SolveOutcome out = solve_tracking_i1(p, xC_tf, vC_tf, config.tracking);
    if (!out.ok()) {
      eval.reason = out.reason;
      if (std::getenv("COOP_LANE_LOG") != nullptr) {
        std::fprintf(stderr, "[planner] pair %d rear solve: %s (x0=%.1f v0=%.1f)\n",
                     front_index, to_string(out.reason), s.x, s.v);
      }
      return eval;
    }
    traj_i1 = out.solution;
  }

  const LongitudinalSolution traj_U =
      LongitudinalSolution::constant_speed(t0, tf, problem.U.x, problem.U.v);
  const LongitudinalSolution front_traj =
      traj_i ? *traj_i : member_trajectory(set, front_index, t0, tf);
  const LongitudinalSolution rear_traj =
      traj_i1 ? *traj_i1 : member_trajectory(set, rear_index, t0, tf);
  const VehicleLimits& rear_limits =
      set.is_virtual(rear_index) ? problem.C.limits : limits_of(rear_index);
  const SafetyReport report = check_safety_constraints(
      traj_C, traj_U, front_traj, rear_traj, problem.C.limits, rear_limits);
  if (!report.clean()) {
    eval.reason = InfeasibleReason::NoRoot;
    if (std::getenv("COOP_LANE_LOG") != nullptr) {
      std::fprintf(stderr, "[planner] pair %d safety %s t=%.3f deficit=%.4f\n",
                   front_index, to_string(report.first->which), report.first->t,
                   report.first->deficit);
    }
    return eval;
  }

  eval.D_C = speed_only_disruption(vC_tf, v_flow, config.disruption, problem.C.limits);
  if (traj_i) {
    const VehicleState& s = set.states[static_cast<size_t>(front_index)];
    eval.D_i = vehicle_disruption(traj_i->terminal_x, traj_i->terminal_v, tf, s.x,
                                  s.v, t0, v_flow, config.disruption,
                                  limits_of(front_index));
  }
  if (traj_i1) {
    const VehicleState& s = set.states[static_cast<size_t>(rear_index)];
    eval.D_i1 = vehicle_disruption(traj_i1->terminal_x, traj_i1->terminal_v, tf, s.x,
                                   s.v, t0, v_flow, config.disruption,
                                   limits_of(rear_index));
  }
  eval.D = total_disruption(eval.D_C, eval.D_i, eval.D_i1, config.disruption);
  eval.feasible = true;
  eval.traj_i = std::move(traj_i);
  eval.traj_i1 = std::move(traj_i1);
  return eval;
}

namespace {

struct PairOutcome {
  PairEvaluation last;                        // last attempt (for diagnostics)
  std::optional<PairEvaluation> accepted;     // feasible and within D_th
  std::optional<PairEvaluation> any_feasible; // earliest feasible, any D
  std::optional<LongitudinalSolution> accepted_traj_C;
  std::optional<LongitudinalSolution> any_feasible_traj_C;
};

PairOutcome run_pair_ladder(int front_index, const CandidateSet& set,
                            const ManeuverProblem& problem,
                            const LongitudinalSolution& base_traj_C, double v_flow,
                            const PlannerConfig& config) {
  PairOutcome out;
  LongitudinalSolution traj_C = base_traj_C;
  double duration = base_traj_C.tf - problem.t0;
  for (int r = 0; r <= config.max_relaxations; ++r) {
    PairEvaluation eval = evaluate_pair(front_index, set, problem, traj_C, v_flow, config);
    eval.relaxations_used = r;
    if (r > 0) eval.traj_C = traj_C;
    out.last = eval;
    if (eval.feasible && !out.any_feasible) {
      out.any_feasible = eval;
      out.any_feasible_traj_C = traj_C;
    }
    if (eval.feasible && eval.D <= config.disruption.D_th + 1e-12) {
      out.accepted = eval;
      out.accepted_traj_C = traj_C;
      return out;
    }
    if (r == config.max_relaxations) break;
    duration = std::max(duration, config.min_relax_base) * config.lambda_tf;
    if (duration > config.T_max + 1e-9) {
      out.last.reason = InfeasibleReason::Time;
      break;
    }
    CavCProblem cp{problem.t0,     problem.C.state.x, problem.C.state.v,
                   problem.U.x,    problem.U.v,       v_flow,
                   config.T_max,   problem.C.limits};
    const SolveOutcome relaxed = solve_cav_c_relaxed(cp, problem.t0 + duration,
                                                     config.tracking);
    if (!relaxed.ok()) {
      out.last.feasible = false;
      out.last.reason = relaxed.reason;
      break;
    }
    traj_C = relaxed.value();
  }
  return out;
}

}  // namespace

ManeuverPlan plan_maneuver(const ManeuverProblem& problem, const PlannerConfig& config) {
  config.validate();
  ManeuverPlan plan;

  std::vector<VehicleState> fast;
  fast.reserve(problem.fast_lane.size());
  for (const ManeuverVehicle& mv : problem.fast_lane) fast.push_back(mv.state);
  FlowParams flow = config.flow;
  flow.T_max = config.T_max;
  plan.set = build_candidate_set(fast, problem.C.state.x, problem.C.limits.v_min,
                                 problem.U.x, problem.U.v, flow);
  plan.v_flow = flow_speed(plan.set, flow);

  CavCProblem cp{problem.t0,   problem.C.state.x, problem.C.state.v, problem.U.x,
                 problem.U.v,  plan.v_flow,       config.T_max,      problem.C.limits};
  const SolveOutcome base = solve_cav_c(cp, config.c_weights);
  if (!base.ok()) {
    plan.status = PlanStatus::Aborted;
    plan.abort_reason = base.reason;
    return plan;
  }

  const int n_pairs = plan.set.size() - 1;
  std::vector<PairOutcome> outcomes(static_cast<size_t>(n_pairs));
  if (config.parallel_pairs) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n_pairs; ++k) {
      outcomes[static_cast<size_t>(k)] =
          run_pair_ladder(k, plan.set, problem, base.value(), plan.v_flow, config);
    }
  } else {
    for (int k = 0; k < n_pairs; ++k) {
      outcomes[static_cast<size_t>(k)] =
          run_pair_ladder(k, plan.set, problem, base.value(), plan.v_flow, config);
    }
  }

  plan.pair_table.reserve(static_cast<size_t>(n_pairs));
  for (const PairOutcome& out : outcomes) {
    plan.pair_table.push_back(out.accepted ? *out.accepted : out.last);
  }

  // Argmin disruption among accepted pairs; ties keep the smaller front index.
  int winner = -1;
  double best_D = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_pairs; ++k) {
    const auto& acc = outcomes[static_cast<size_t>(k)].accepted;
    if (acc && acc->D < best_D) {
      best_D = acc->D;
      winner = k;
    }
  }

  const auto fill_plan = [&](const PairEvaluation& eval,
                             const LongitudinalSolution& traj_C) {
    plan.pair_front = eval.front_index;
    plan.tf_final = eval.tf_used;
    plan.relaxations_used = eval.relaxations_used;
    plan.D_value = eval.D;
    plan.traj_C = traj_C;
    plan.traj_i = eval.traj_i;
    plan.traj_i1 = eval.traj_i1;
    const double t0 = problem.t0;
    const double tf = eval.tf_used;
    const LongitudinalSolution traj_U =
        LongitudinalSolution::constant_speed(t0, tf, problem.U.x, problem.U.v);
    const LongitudinalSolution front_traj =
        eval.traj_i ? *eval.traj_i
                    : member_trajectory(plan.set, eval.front_index, t0, tf);
    const LongitudinalSolution rear_traj =
        eval.traj_i1 ? *eval.traj_i1
                     : member_trajectory(plan.set, eval.front_index + 1, t0, tf);
    const SafeTimes taus =
        safe_times(traj_C, front_traj, rear_traj, traj_U, config.eps_v);
    plan.t0L = lateral_start_time(taus, tf, config.aggressiveness);
  };

  if (winner >= 0) {
    const PairOutcome& out = outcomes[static_cast<size_t>(winner)];
    plan.status = PlanStatus::Planned;
    fill_plan(*out.accepted, *out.accepted_traj_C);
    return plan;
  }

  if (config.allow_selfish_fallback) {
    // Minimum feasible terminal time ignoring the disruption threshold.
    int pick = -1;
    double best_tf = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_pairs; ++k) {
      const auto& feas = outcomes[static_cast<size_t>(k)].any_feasible;
      if (feas && feas->tf_used < best_tf - 1e-12) {
        best_tf = feas->tf_used;
        pick = k;
      }
    }
    if (pick >= 0) {
      const PairOutcome& out = outcomes[static_cast<size_t>(pick)];
      plan.status = PlanStatus::SelfishFallback;
      fill_plan(*out.any_feasible, *out.any_feasible_traj_C);
      return plan;
    }
  }

  plan.status = PlanStatus::Aborted;
  bool all_time = n_pairs > 0;
  for (const PairOutcome& out : outcomes) {
    if (out.last.reason != InfeasibleReason::Time) all_time = false;
  }
  plan.abort_reason = all_time ? InfeasibleReason::Time : InfeasibleReason::NoRoot;
  return plan;
}

}  // namespace coop_lane
