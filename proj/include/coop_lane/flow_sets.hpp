#pragma once

#include <optional>
#include <vector>

#include "coop_lane/core.hpp"

namespace coop_lane {

struct FlowParams {
  double L_f = 50.0;        // forward window from U [m]
  double L_r = 80.0;        // rearward window from C [m]
  double omega = 0.3;       // weight on the observed average speed
  double v_max_road = 35.0; // max allowable road speed [m/s]
  double T_max = 12.0;      // max maneuver time [s]
  // Alternative construction from the Remark: membership if the projection
  // under either extreme acceleration falls inside the window.
  bool extreme_projection_mode = false;

  void validate() const;
};

// Candidate cooperative set, ordered front to rear. Index 0 is i+ and the
// last index is i-, either of which may be a virtual sentinel at +/-kSentinelX.
struct CandidateSet {
  std::vector<VehicleState> states;  // snapshot states at t0 (sentinels use +/-kSentinelX)
  std::vector<double> projected_x;   // positions projected to T_max, same order
  bool virtual_front = false;
  bool virtual_rear = false;

  int size() const { return static_cast<int>(states.size()); }
  bool is_virtual(int index) const {
    return (index == 0 && virtual_front) || (index == size() - 1 && virtual_rear);
  }
  int real_count() const {
    return size() - (virtual_front ? 1 : 0) - (virtual_rear ? 1 : 0);
  }
};

// Builds the fixed overestimated candidate set. All motion is projected at
// constant speed (C at v_min to overestimate the rear window, U at v_U); a
// vehicle is a member iff its projection falls inside
// [x_C(t) - L_r, x_U(t) + L_f] for some t in [0, T_max], so both vehicles
// near C now and vehicles that reach it late in the horizon qualify. The
// nearest vehicles outside the window are appended as i+ / i-, virtual when
// absent.
CandidateSet build_candidate_set(const std::vector<VehicleState>& fast_lane,
                                 double xC_t0, double vC_min, double xU_t0,
                                 double vU, const FlowParams& params);

// Arithmetic mean speed of the non-virtual members; empty when only sentinels
// are present (caller falls back to v_max_road).
std::optional<double> average_speed(const CandidateSet& set);

// omega * v_avg + (1 - omega) * v_max_road; v_max_road when unobservable.
double flow_speed(const CandidateSet& set, const FlowParams& params);

}  // namespace coop_lane
