#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coop_lane {

// One absolute tolerance for continuity and feasibility checks (m, m/s, m/s^2).
inline constexpr double kTol = 1e-6;

// Finite stand-in for the +/- infinity coordinate of virtual vehicles.
inline constexpr double kSentinelX = 1e9;

// Default sampling step for constraint-satisfaction checks.
inline constexpr double kSafetyGridDt = 0.01;

enum class Lane { Slow, Fast };

struct VehicleState {
  int id = 0;
  double x = 0.0;  // longitudinal position [m], origin at x_C(t0)
  double v = 0.0;  // longitudinal speed [m/s]
  Lane lane = Lane::Fast;
};

// Per-vehicle control/speed bounds and safety-headway parameters.
struct VehicleLimits {
  double u_min = -7.0;  // max deceleration [m/s^2], < 0
  double u_max = 3.3;   // max acceleration [m/s^2], > 0
  double v_min = 10.0;  // [m/s], > 0
  double v_max = 35.0;  // [m/s]
  double phi = 0.6;     // reaction-time headway [s]
  double eps = 1.5;     // standstill gap [m]

  void validate() const;
};

// Speed-dependent safety distance phi*v + eps. Throws std::domain_error for v < 0.
double safety_distance(const VehicleLimits& limits, double v);

enum class ArcKind { PolynomialControl, ConstantControl, ConstantSpeed };

// One trajectory segment. In local time s = t - t_start:
//   u(s) = u0 + jerk*s
//   v(s) = v0 + u0*s + jerk*s^2/2
//   x(s) = x0 + v0*s + u0*s^2/2 + jerk*s^3/6
struct Arc {
  ArcKind kind = ArcKind::ConstantSpeed;
  double t_start = 0.0;
  double t_end = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  double u0 = 0.0;
  double jerk = 0.0;

  double u_at(double t) const { return u0 + jerk * (t - t_start); }
  double v_at(double t) const {
    const double s = t - t_start;
    return v0 + u0 * s + 0.5 * jerk * s * s;
  }
  double x_at(double t) const {
    const double s = t - t_start;
    return x0 + v0 * s + 0.5 * u0 * s * s + jerk * s * s * s / 6.0;
  }
};

// Which appendix case produced a longitudinal solution (kept for diagnostics
// and regression tests).
enum class CaseLabel {
  Unconstrained,
  UmaxArc,
  UminArc,
  UminUmaxArcs,
  VminArc,
  UminVminArcs,
  UmaxVminArcs,
  UminVminUmaxArcs,
  TerminalSafetyEquality,
};

const char* to_string(CaseLabel label);

struct TrajectorySample {
  double x = 0.0;
  double v = 0.0;
  double u = 0.0;
};

// Piecewise-polynomial optimal trajectory over [t0, tf].
struct LongitudinalSolution {
  std::vector<Arc> arcs;
  double t0 = 0.0;
  double tf = 0.0;
  double terminal_x = 0.0;
  double terminal_v = 0.0;
  CaseLabel case_label = CaseLabel::Unconstrained;
  double objective_value = 0.0;

  // State/control at time t; at arc boundaries the later arc wins.
  TrajectorySample eval(double t) const;

  // Constant-speed trajectory (used for vehicle U, leaders, and virtual members).
  static LongitudinalSolution constant_speed(double t0, double tf, double x0, double v);
};

// Free function form of LongitudinalSolution::eval.
TrajectorySample eval_trajectory(const LongitudinalSolution& sol, double t);

enum class SafetyConstraint {
  GapCU,        // (a) x_U - x_C >= delta_C(v_C) for all t
  GapII1,       // (b) x_i - x_{i+1} >= delta_{i+1}(v_{i+1}) for all t
  TerminalCI1,  // (c) x_C(tf) - x_{i+1}(tf) >= delta_{i+1}(v_{i+1}(tf))
  TerminalIC,   // (d) x_i(tf) - x_C(tf) >= delta_C(v_C(tf))
};

const char* to_string(SafetyConstraint c);

struct SafetyViolation {
  SafetyConstraint which;
  double t;
  double deficit;  // required - actual gap [m], > 0
};

struct SafetyReport {
  std::optional<SafetyViolation> first;
  bool clean() const { return !first.has_value(); }
};

// Evaluates constraints (a)-(d) on a grid of spacing grid_dt plus arc
// boundaries and analytic critical points; returns the first violation found.
// All four trajectories must share the same [t0, tf] horizon.
SafetyReport check_safety_constraints(const LongitudinalSolution& traj_C,
                                      const LongitudinalSolution& traj_U,
                                      const LongitudinalSolution& traj_i,
                                      const LongitudinalSolution& traj_i1,
                                      const VehicleLimits& limits_C,
                                      const VehicleLimits& limits_i1,
                                      double grid_dt = kSafetyGridDt);

}  // namespace coop_lane
