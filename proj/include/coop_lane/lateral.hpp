#pragma once

#include <optional>
#include <vector>

#include "coop_lane/core.hpp"

namespace coop_lane {

struct LateralState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // heading [rad]
  double phi = 0.0;    // steering angle [rad]
};

enum class Aggressiveness { Conservative, Aggressive };

struct LateralConfig {
  double L_w = 2.7;        // wheelbase [m]
  double lane_width = 3.5; // l [m]
  double v = 30.0;         // constant longitudinal speed during the phase [m/s]
  double phi_max = 0.6;    // [rad]
  double theta_max = 0.3;  // [rad]
  double rho_L = 0.5;      // steering-energy vs time weight, in [0,1]
  double T_fmax_L = 5.0;   // time normalization [s]
  double eps_v = 9.0;      // min safe gap for the lateral start [m]
  Aggressiveness aggressiveness = Aggressiveness::Conservative;

  void validate() const;
};

struct LateralTrajectory {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<LateralState> states;  // states.size() = steps + 1
  bool phi_clamped = false;

  double duration() const { return dt * (static_cast<double>(states.size()) - 1.0); }
  const LateralState& terminal() const { return states.back(); }
};

// Fixed-step RK4 integration of the kinematic steering model
//   x' = v cos(theta), y' = v sin(theta), theta' = v tan(phi)/L_w, phi' = omega
// with omega piecewise constant per step. phi leaving [-phi_max, phi_max] is
// clamped and flagged.
LateralTrajectory integrate_lateral(const LateralState& s0,
                                    const std::vector<double>& omega, double dt,
                                    const LateralConfig& config);

struct LateralSolution {
  std::vector<double> omega;  // steering-rate samples
  double dt = 0.0;
  double t_f_L = 0.0;
  double objective = 0.0;
  LateralTrajectory trajectory;
};

// Numeric lateral OCP: antisymmetric bang-off-bang steering-rate profile with
// shooting on the amplitude and an outer search over the phase duration.
// Terminal conditions: |y - l| <= 1e-3, |theta| <= 1e-3, |phi| <= 1e-3.
std::optional<LateralSolution> solve_lateral(const LateralConfig& config);

struct SafeTimes {
  double tau_i = 0.0;
  double tau_i1 = 0.0;
  double tau_U = 0.0;
};

// Earliest times at which the gap to each neighbor reaches eps_v (grid scan
// plus bisection refinement; saturates at tf when never reached).
SafeTimes safe_times(const LongitudinalSolution& traj_C,
                     const LongitudinalSolution& traj_i,
                     const LongitudinalSolution& traj_i1,
                     const LongitudinalSolution& traj_U, double eps_v);

double lateral_start_time(const SafeTimes& taus, double tf_star,
                          Aggressiveness aggressiveness);

}  // namespace coop_lane
