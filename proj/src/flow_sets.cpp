#include "coop_lane/flow_sets.hpp"

#include <algorithm>
#include <cmath>

namespace coop_lane {

void FlowParams::validate() const {
  if (L_f < 0.0 || L_r < 0.0) throw std::invalid_argument("FlowParams: L_f, L_r >= 0");
  if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("FlowParams: omega in [0,1]");
  if (T_max <= 0.0) throw std::invalid_argument("FlowParams: T_max > 0");
}

namespace {

// Window membership over the whole horizon: there is some t in [0, T_max]
// with x_C(t0) + v_min*t - L_r <= x_i(t0) + v_i*t <= x_U(t0) + v_U*t + L_f.
// Projecting only to T_max would drop every vehicle that passes the window
// earlier, which is exactly where the short-horizon cooperators sit.
bool window_overlap(const VehicleState& s, double xC_t0, double vC_min, double xU_t0,
                    double vU, const FlowParams& params, double v_proj) {
  double t_lo = 0.0, t_hi = params.T_max;
  const auto clip = [&](double coef, double rhs) {
    // coef * t >= rhs on [t_lo, t_hi]
    if (std::abs(coef) < 1e-12) {
      if (rhs > 0.0) t_lo = 1.0, t_hi = 0.0;
    } else if (coef > 0.0) {
      t_lo = std::max(t_lo, rhs / coef);
    } else {
      t_hi = std::min(t_hi, rhs / coef);
    }
  };
  // (v_proj - vC_min) t >= (xC - L_r) - x_i
  clip(v_proj - vC_min, (xC_t0 - params.L_r) - s.x);
  // (vU - v_proj) t >= x_i - (xU + L_f)
  clip(vU - v_proj, s.x - (xU_t0 + params.L_f));
  return t_lo <= t_hi + 1e-12;
}

}  // namespace

CandidateSet build_candidate_set(const std::vector<VehicleState>& fast_lane,
                                 double xC_t0, double vC_min, double xU_t0,
                                 double vU, const FlowParams& params) {
  params.validate();
  const double T = params.T_max;

  struct Entry {
    VehicleState state;
    double proj;
  };
  std::vector<Entry> members, outside;
  for (const VehicleState& s : fast_lane) {
    if (s.lane != Lane::Fast) continue;
    const double proj = s.x + s.v * T;
    bool inside = window_overlap(s, xC_t0, vC_min, xU_t0, vU, params, s.v);
    if (params.extreme_projection_mode && !inside) {
      // Remark construction: membership under either extreme speed profile.
      for (double v_ext : {std::min(35.0, s.v + 3.3 * T), std::max(0.0, s.v - 7.0 * T)}) {
        inside = inside ||
                 window_overlap(s, xC_t0, vC_min, xU_t0, vU, params, 0.5 * (s.v + v_ext));
      }
    }
    (inside ? members : outside).push_back({s, proj});
  }
  std::sort(members.begin(), members.end(), [](const Entry& a, const Entry& b) {
    return a.state.x > b.state.x;
  });
  const double front_x = members.empty() ? xC_t0 : members.front().state.x;
  const double rear_x = members.empty() ? xC_t0 : members.back().state.x;

  CandidateSet set;
  const Entry* ahead = nullptr;
  const Entry* behind = nullptr;
  for (const Entry& e : outside) {
    if (e.state.x > front_x) {
      if (ahead == nullptr || e.state.x < ahead->state.x) ahead = &e;
    } else if (e.state.x < rear_x) {
      if (behind == nullptr || e.state.x > behind->state.x) behind = &e;
    }
  }
  if (ahead == nullptr) {
    set.virtual_front = true;
    set.states.push_back(VehicleState{-1, kSentinelX, 0.0, Lane::Fast});
    set.projected_x.push_back(kSentinelX);
  } else {
    set.states.push_back(ahead->state);
    set.projected_x.push_back(ahead->proj);
  }
  for (const Entry& e : members) {
    set.states.push_back(e.state);
    set.projected_x.push_back(e.proj);
  }
  if (behind == nullptr) {
    set.virtual_rear = true;
    set.states.push_back(VehicleState{-2, -kSentinelX, 0.0, Lane::Fast});
    set.projected_x.push_back(-kSentinelX);
  } else {
    set.states.push_back(behind->state);
    set.projected_x.push_back(behind->proj);
  }
  return set;
}

std::optional<double> average_speed(const CandidateSet& set) {
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < set.size(); ++k) {
    if (set.is_virtual(k)) continue;
    sum += set.states[static_cast<size_t>(k)].v;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

double flow_speed(const CandidateSet& set, const FlowParams& params) {
  const auto avg = average_speed(set);
  if (!avg) return params.v_max_road;
  return params.omega * *avg + (1.0 - params.omega) * params.v_max_road;
}

}  // namespace coop_lane
