#include "coop_lane/disruption.hpp"

#include <algorithm>
#include <cmath>

namespace coop_lane {

void DisruptionParams::validate() const {
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("DisruptionParams: gamma in [0,1]");
  }
  if (zeta_C < 0.0 || zeta_i < 0.0 || zeta_i1 < 0.0) {
    throw std::invalid_argument("DisruptionParams: zeta weights >= 0");
  }
  if (std::abs(zeta_C + zeta_i + zeta_i1 - 1.0) > 1e-9) {
    throw std::invalid_argument("DisruptionParams: zeta weights must sum to 1");
  }
  if (D_th < 0.0) throw std::invalid_argument("DisruptionParams: D_th >= 0");
}

double position_disruption(double x_t, double x0, double v0, double t, double t0) {
  const double ideal = x0 + v0 * (t - t0);
  const double d = x_t - ideal;
  return d * d;
}

double max_position_disruption(double v0, double t, double t0,
                               const VehicleLimits& limits) {
  const double dt = t - t0;
  if (dt <= 0.0) return 0.0;
  if (limits.u_min * dt + v0 >= limits.v_min) {
    return -0.5 * limits.u_min * dt * dt;
  }
  // Braking reaches v_min before t: ideal distance minus decel + cruise distance.
  const double t_dec = (limits.v_min - v0) / limits.u_min;
  const double d_dec = (limits.v_min * limits.v_min - v0 * v0) / (2.0 * limits.u_min);
  const double d_cruise = limits.v_min * (dt - t_dec);
  return v0 * dt - (d_dec + d_cruise);
}

double speed_disruption(double v_t, double v_flow) {
  const double d = v_t - v_flow;
  return d * d;
}

double vehicle_disruption(double x_t, double v_t, double t, double x0, double v0,
                          double t0, double v_flow, const DisruptionParams& params,
                          const VehicleLimits& limits) {
  params.validate();
  if (t <= t0) return 0.0;  // no elapsed time, no disruption
  const double lo = limits.v_min - v_flow;
  const double hi = limits.v_max - v_flow;
  const double v_norm = std::max(lo * lo, hi * hi);
  if (v_norm <= 0.0) {
    throw std::domain_error("vehicle_disruption: degenerate speed normalizer");
  }
  const double d_xmax = max_position_disruption(v0, t, t0, limits);
  const double d_x = position_disruption(x_t, x0, v0, t, t0);
  const double d_v = speed_disruption(v_t, v_flow);
  const double pos_term = d_xmax > 0.0 ? params.gamma * d_x / (d_xmax * d_xmax) : 0.0;
  return pos_term + (1.0 - params.gamma) * d_v / v_norm;
}

double speed_only_disruption(double v_t, double v_flow, const DisruptionParams& params,
                             const VehicleLimits& limits) {
  params.validate();
  const double lo = limits.v_min - v_flow;
  const double hi = limits.v_max - v_flow;
  const double v_norm = std::max(lo * lo, hi * hi);
  if (v_norm <= 0.0) {
    throw std::domain_error("speed_only_disruption: degenerate speed normalizer");
  }
  return (1.0 - params.gamma) * speed_disruption(v_t, v_flow) / v_norm;
}

double total_disruption(double D_C, double D_i, double D_i1,
                        const DisruptionParams& params) {
  return params.zeta_C * D_C + params.zeta_i * D_i + params.zeta_i1 * D_i1;
}

}  // namespace coop_lane
