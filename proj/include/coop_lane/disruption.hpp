#pragma once

#include "coop_lane/core.hpp"

namespace coop_lane {

struct DisruptionParams {
  double gamma = 0.8;   // position-vs-speed weight, in [0,1]
  double zeta_C = 0.5;  // triplet weights, sum to 1
  double zeta_i = 0.0;
  double zeta_i1 = 0.5;
  double D_th = 0.15;

  void validate() const;
};

// Squared deviation from undisrupted uniform motion: (x(t) - [x0 + v0*(t-t0)])^2.
double position_disruption(double x_t, double x0, double v0, double t, double t0);

// Largest position deviation achievable over [t0, t] under maximum braking,
// saturating at v_min (ideal distance minus the minimum-distance trajectory).
double max_position_disruption(double v0, double t, double t0,
                               const VehicleLimits& limits);

// (v(t) - v_flow)^2.
double speed_disruption(double v_t, double v_flow);

// Normalized disruption of one vehicle at time t relative to its undisrupted
// reference. Defined as 0 at t = t0.
double vehicle_disruption(double x_t, double v_t, double t, double x0, double v0,
                          double t0, double v_flow, const DisruptionParams& params,
                          const VehicleLimits& limits);

// The speed component of vehicle_disruption alone, normalized the same way.
// Used for the maneuvering vehicle itself, whose lane-change deviation from
// uniform motion happens on the slow lane and cannot displace fast-lane
// traffic; only its merge speed can.
double speed_only_disruption(double v_t, double v_flow, const DisruptionParams& params,
                             const VehicleLimits& limits);

// zeta_C*D_C + zeta_i*D_i + zeta_{i+1}*D_{i+1}.
double total_disruption(double D_C, double D_i, double D_i1,
                        const DisruptionParams& params);

}  // namespace coop_lane
