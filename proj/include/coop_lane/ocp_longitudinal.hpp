#pragma once

#include <optional>

#include "coop_lane/core.hpp"

namespace coop_lane {

// Weights of the free-terminal-time objective for CAV C:
//   w_t*(tf-t0) + w_v/2*(v(tf)-v_flow)^2 + int w_u/2 u^2.
// The solvers work with the normalized ratios alpha_t, alpha_v.
struct CWeights {
  double w_t = 0.55;
  double w_v = 0.25;
  double w_u = 0.2;

  double alpha_t() const { return w_t / w_u; }
  double alpha_v() const { return w_v / w_u; }
  void validate() const;
};

// Weights of the fixed-terminal-time tracking objectives:
//   beta*(v(tf)-v_flow)^2 + int 1/2 u^2,
// with beta derived from alpha_v and the control bounds.
struct TrackingWeights {
  double alpha_v = 0.5;  // in (0,1)
  double v_th = 24.0;    // min allowable terminal speed for i+1 [m/s]

  double beta(const VehicleLimits& limits) const;
  void validate() const;
};

enum class InfeasibleReason {
  None,
  Time,           // tf would exceed T_max in all cases
  NoRoot,         // no equation system produced a feasible candidate
  Precondition,   // v_U >= v_flow
  EntrySafety,    // safety constraint already violated at t0
  TerminalGap,    // terminal gap unreachable under bounds
  TerminalSpeed,  // v_th unreachable together with the terminal gap
};

const char* to_string(InfeasibleReason reason);

struct SolveOutcome {
  std::optional<LongitudinalSolution> solution;
  InfeasibleReason reason = InfeasibleReason::None;

  bool ok() const { return solution.has_value(); }
  const LongitudinalSolution& value() const { return *solution; }
};

// Maneuver-time OCP inputs for CAV C against the uncontrolled vehicle U
// (constant speed v_U ahead of C on the slow lane).
struct CavCProblem {
  double t0 = 0.0;
  double xC0 = 0.0;
  double vC0 = 0.0;
  double xU0 = 0.0;  // must exceed xC0
  double vU = 0.0;
  double v_flow = 0.0;
  double T_max = 12.0;  // max maneuver duration [s]
  VehicleLimits limits;
};

// Free-terminal-time solve for CAV C: enumerates the analytical candidate
// structures (constant control, terminal-safety-equality arcs, control and
// speed constrained variants) and returns the feasible one with the lowest
// objective.
SolveOutcome solve_cav_c(const CavCProblem& problem, const CWeights& weights);

// Fixed-terminal-time re-solve of C's problem after time relaxation: tracking
// objective with the running safety constraint against U.
SolveOutcome solve_cav_c_relaxed(const CavCProblem& problem, double tf_fixed,
                                 const TrackingWeights& weights);

// Constant-speed leader extrapolation x(t) = x0 + v*(t - t0).
struct LeaderRef {
  double x0 = 0.0;
  double v = 0.0;
};

struct FixedTimeProblem {
  double t0 = 0.0;
  double tf = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  double v_flow = 0.0;
  VehicleLimits limits;
};

// CAV i: keeps leader safety for all t and must end at least delta_C(vC_tf)
// ahead of C's terminal position.
SolveOutcome solve_tracking_i(const FixedTimeProblem& problem,
                              const std::optional<LeaderRef>& leader,
                              double xC_tf, double vC_tf,
                              const VehicleLimits& limits_C,
                              const TrackingWeights& weights);

// CAV i+1: must end at least its own safety distance behind C and no slower
// than v_th. The running i/i+1 constraint is omitted (i never accelerates
// backward into i+1 in an optimal maneuver).
SolveOutcome solve_tracking_i1(const FixedTimeProblem& problem, double xC_tf,
                               double vC_tf, const TrackingWeights& weights);

}  // namespace coop_lane
