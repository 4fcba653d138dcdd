#pragma once

#include <optional>
#include <vector>

#include "coop_lane/core.hpp"
#include "coop_lane/disruption.hpp"
#include "coop_lane/flow_sets.hpp"
#include "coop_lane/lateral.hpp"
#include "coop_lane/ocp_longitudinal.hpp"

namespace coop_lane {

struct PlannerConfig {
  double lambda_tf = 1.1;  // relaxation factor, > 1
  int max_relaxations = 10;
  double d_start = 70.0;  // trigger distance [m]
  double T_max = 12.0;
  CWeights c_weights;
  TrackingWeights tracking;
  FlowParams flow;
  DisruptionParams disruption;
  Aggressiveness aggressiveness = Aggressiveness::Conservative;
  double eps_v = 9.0;  // lateral-start safety gap [m]
  bool allow_selfish_fallback = false;
  bool parallel_pairs = true;
  // Relaxation base when tf* collapses to ~t0 (merge-now optimum); keeps the
  // geometric ladder from degenerating.
  double min_relax_base = 1.0;

  void validate() const;
};

// true iff x_U - x_C <= d_start. Throws when U is behind C.
bool trigger_check(double xU, double xC, double d_start);

struct ManeuverVehicle {
  VehicleState state;
  VehicleLimits limits;
};

// Frozen snapshot at trigger time t0. Positions use the maneuver-local origin
// x_C(t0) = 0; the simulator converts to/from road coordinates.
struct ManeuverProblem {
  double t0 = 0.0;
  ManeuverVehicle C;
  VehicleState U;  // uncontrolled, constant speed
  std::vector<ManeuverVehicle> fast_lane;
};

struct PairEvaluation {
  int front_index = -1;  // index into the candidate set ordering
  bool feasible = false;
  InfeasibleReason reason = InfeasibleReason::None;
  double tf_used = 0.0;
  int relaxations_used = 0;
  double D = 0.0;
  double D_C = 0.0, D_i = 0.0, D_i1 = 0.0;
  std::optional<LongitudinalSolution> traj_C;  // relaxed re-solve when used
  std::optional<LongitudinalSolution> traj_i;
  std::optional<LongitudinalSolution> traj_i1;
};

enum class PlanStatus { Planned, Aborted, SelfishFallback };

const char* to_string(PlanStatus status);

struct ManeuverPlan {
  PlanStatus status = PlanStatus::Aborted;
  InfeasibleReason abort_reason = InfeasibleReason::None;
  int pair_front = -1;  // selected front index in the candidate set
  double tf_final = 0.0;
  int relaxations_used = 0;
  double D_value = 0.0;
  std::optional<LongitudinalSolution> traj_C;
  std::optional<LongitudinalSolution> traj_i;
  std::optional<LongitudinalSolution> traj_i1;
  double t0L = 0.0;  // lateral phase start time
  double v_flow = 0.0;
  CandidateSet set;
  std::vector<PairEvaluation> pair_table;  // diagnostics, ordered by front index
};

// Evaluates one adjacent candidate pair at a given C trajectory: solves the
// two tracking OCPs, checks the safety constraints and computes the triplet
// disruption at tf. Virtual members contribute no OCP and no disruption.
PairEvaluation evaluate_pair(int front_index, const CandidateSet& set,
                             const ManeuverProblem& problem,
                             const LongitudinalSolution& traj_C, double v_flow,
                             const PlannerConfig& config);

// Full single-maneuver pipeline: candidate set, flow speed, C's OCP, per-pair
// evaluation with per-pair time relaxation, selection of the minimum
// disruption pair, abort / selfish fallback.
ManeuverPlan plan_maneuver(const ManeuverProblem& problem, const PlannerConfig& config);

}  // namespace coop_lane
