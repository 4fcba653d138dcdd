#include "coop_lane/core.hpp"

#include <algorithm>
#include <cmath>

namespace coop_lane {

void VehicleLimits::validate() const {
  if (!(u_min < 0.0 && 0.0 < u_max)) {
    throw std::invalid_argument("VehicleLimits: requires u_min < 0 < u_max");
  }
  if (!(0.0 < v_min && v_min <= v_max)) {
    throw std::invalid_argument("VehicleLimits: requires 0 < v_min <= v_max");
  }
  if (phi < 0.0) throw std::invalid_argument("VehicleLimits: phi must be >= 0");
  if (eps <= 0.0) throw std::invalid_argument("VehicleLimits: eps must be > 0");
}

double safety_distance(const VehicleLimits& limits, double v) {
  if (v < 0.0 || !std::isfinite(v)) {
    throw std::domain_error("safety_distance: speed must be finite and >= 0");
  }
  return limits.phi * v + limits.eps;
}

const char* to_string(CaseLabel label) {
  switch (label) {
    case CaseLabel::Unconstrained: return "Unconstrained";
    case CaseLabel::UmaxArc: return "UmaxArc";
    case CaseLabel::UminArc: return "UminArc";
    case CaseLabel::UminUmaxArcs: return "UminUmaxArcs";
    case CaseLabel::VminArc: return "VminArc";
    case CaseLabel::UminVminArcs: return "UminVminArcs";
    case CaseLabel::UmaxVminArcs: return "UmaxVminArcs";
    case CaseLabel::UminVminUmaxArcs: return "UminVminUmaxArcs";
    case CaseLabel::TerminalSafetyEquality: return "TerminalSafetyEquality";
  }
  return "?";
}

const char* to_string(SafetyConstraint c) {
  switch (c) {
    case SafetyConstraint::GapCU: return "gap(C,U)";
    case SafetyConstraint::GapII1: return "gap(i,i+1)";
    case SafetyConstraint::TerminalCI1: return "terminal gap(C,i+1)";
    case SafetyConstraint::TerminalIC: return "terminal gap(i,C)";
  }
  return "?";
}

TrajectorySample LongitudinalSolution::eval(double t) const {
  if (arcs.empty()) throw std::out_of_range("eval: empty solution");
  if (t < t0 - kTol || t > tf + kTol) {
    throw std::out_of_range("eval: t outside [t0, tf]");
  }
  t = std::clamp(t, t0, tf);
  // At a boundary the later arc wins, so pick the first arc with t < t_end,
  // falling back to the last one for t == tf.
  const Arc* arc = &arcs.back();
  for (const Arc& a : arcs) {
    if (t < a.t_end) {
      arc = &a;
      break;
    }
  }
  return {arc->x_at(t), arc->v_at(t), arc->u_at(t)};
}

LongitudinalSolution LongitudinalSolution::constant_speed(double t0, double tf,
                                                          double x0, double v) {
  LongitudinalSolution sol;
  sol.t0 = t0;
  sol.tf = tf;
  Arc arc;
  arc.kind = ArcKind::ConstantSpeed;
  arc.t_start = t0;
  arc.t_end = tf;
  arc.x0 = x0;
  arc.v0 = v;
  sol.arcs.push_back(arc);
  sol.terminal_x = arc.x_at(tf);
  sol.terminal_v = v;
  return sol;
}

TrajectorySample eval_trajectory(const LongitudinalSolution& sol, double t) {
  return sol.eval(t);
}

namespace {

// Collects grid points, arc boundaries, and critical points of v and u for
// all involved trajectories.
std::vector<double> sample_times(const std::vector<const LongitudinalSolution*>& trajs,
                                 double t0, double tf, double grid_dt) {
  std::vector<double> ts;
  const int n = std::max(1, static_cast<int>(std::ceil((tf - t0) / grid_dt)));
  ts.reserve(static_cast<size_t>(n) + 16);
  for (int k = 0; k <= n; ++k) {
    ts.push_back(std::min(tf, t0 + grid_dt * k));
  }
  for (const auto* traj : trajs) {
    for (const Arc& a : traj->arcs) {
      ts.push_back(a.t_start);
      ts.push_back(a.t_end);
      // v'(t) = u(t) = 0 at s = -u0/jerk.
      if (std::abs(a.jerk) > 1e-12) {
        const double s = -a.u0 / a.jerk;
        const double t = a.t_start + s;
        if (t > a.t_start && t < a.t_end) ts.push_back(t);
      }
    }
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end(),
                       [](double a, double b) { return std::abs(a - b) < 1e-12; }),
           ts.end());
  ts.erase(std::remove_if(ts.begin(), ts.end(),
                          [&](double t) { return t < t0 || t > tf; }),
           ts.end());
  return ts;
}

}  // namespace

SafetyReport check_safety_constraints(const LongitudinalSolution& traj_C,
                                      const LongitudinalSolution& traj_U,
                                      const LongitudinalSolution& traj_i,
                                      const LongitudinalSolution& traj_i1,
                                      const VehicleLimits& limits_C,
                                      const VehicleLimits& limits_i1,
                                      double grid_dt) {
  const std::vector<const LongitudinalSolution*> all = {&traj_C, &traj_U, &traj_i,
                                                        &traj_i1};
  const double t0 = traj_C.t0;
  const double tf = traj_C.tf;
  for (const auto* traj : all) {
    if (std::abs(traj->t0 - t0) > kTol || std::abs(traj->tf - tf) > kTol) {
      throw std::invalid_argument(
          "check_safety_constraints: trajectories must share [t0, tf]");
    }
  }

  SafetyReport report;
  const auto record = [&](SafetyConstraint which, double t, double deficit) {
    if (deficit > kTol && !report.first) {
      report.first = SafetyViolation{which, t, deficit};
    }
  };

  for (double t : sample_times(all, t0, tf, grid_dt)) {
    if (report.first) break;
    const auto c = traj_C.eval(t);
    const auto u = traj_U.eval(t);
    const auto i = traj_i.eval(t);
    const auto i1 = traj_i1.eval(t);
    record(SafetyConstraint::GapCU, t,
           safety_distance(limits_C, c.v) - (u.x - c.x));
    record(SafetyConstraint::GapII1, t,
           safety_distance(limits_i1, i1.v) - (i.x - i1.x));
  }
  if (!report.first) {
    const auto c = traj_C.eval(tf);
    const auto i = traj_i.eval(tf);
    const auto i1 = traj_i1.eval(tf);
    record(SafetyConstraint::TerminalCI1, tf,
           safety_distance(limits_i1, i1.v) - (c.x - i1.x));
    record(SafetyConstraint::TerminalIC, tf,
           safety_distance(limits_C, c.v) - (i.x - c.x));
  }
  return report;
}

}  // namespace coop_lane
