#include "coop_lane/lateral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coop_lane {

void LateralConfig::validate() const {
  if (lane_width < 0.0) throw std::invalid_argument("LateralConfig: lane_width >= 0");
  if (v <= 0.0) throw std::invalid_argument("LateralConfig: v > 0");
  if (rho_L < 0.0 || rho_L > 1.0) throw std::invalid_argument("LateralConfig: rho_L in [0,1]");
  if (phi_max <= 0.0 || theta_max <= 0.0 || L_w <= 0.0 || T_fmax_L <= 0.0) {
    throw std::invalid_argument("LateralConfig: positive phi_max, theta_max, L_w, T_fmax_L");
  }
}

namespace {

struct Deriv {
  double x, y, theta, phi;
};

Deriv rhs(const LateralState& s, double omega, double v, double L_w) {
  return {v * std::cos(s.theta), v * std::sin(s.theta),
          v * std::tan(s.phi) / L_w, omega};
}

}  // namespace

LateralTrajectory integrate_lateral(const LateralState& s0,
                                    const std::vector<double>& omega, double dt,
                                    const LateralConfig& config) {
  if (dt <= 0.0) throw std::invalid_argument("integrate_lateral: dt > 0");
  LateralTrajectory traj;
  traj.dt = dt;
  traj.states.reserve(omega.size() + 1);
  traj.states.push_back(s0);
  LateralState s = s0;
  for (double w : omega) {
    const Deriv k1 = rhs(s, w, config.v, config.L_w);
    LateralState m;
    m.x = s.x + 0.5 * dt * k1.x;
    m.y = s.y + 0.5 * dt * k1.y;
    m.theta = s.theta + 0.5 * dt * k1.theta;
    m.phi = s.phi + 0.5 * dt * k1.phi;
    const Deriv k2 = rhs(m, w, config.v, config.L_w);
    m.x = s.x + 0.5 * dt * k2.x;
    m.y = s.y + 0.5 * dt * k2.y;
    m.theta = s.theta + 0.5 * dt * k2.theta;
    m.phi = s.phi + 0.5 * dt * k2.phi;
    const Deriv k3 = rhs(m, w, config.v, config.L_w);
    m.x = s.x + dt * k3.x;
    m.y = s.y + dt * k3.y;
    m.theta = s.theta + dt * k3.theta;
    m.phi = s.phi + dt * k3.phi;
    const Deriv k4 = rhs(m, w, config.v, config.L_w);
    s.x += dt / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    s.y += dt / 6.0 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
    s.theta += dt / 6.0 * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta);
    s.phi += dt / 6.0 * (k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi);
    if (std::abs(s.phi) > config.phi_max) {
      s.phi = std::clamp(s.phi, -config.phi_max, config.phi_max);
      traj.phi_clamped = true;
    }
    traj.states.push_back(s);
  }
  return traj;
}

namespace {

constexpr int kLateralSteps = 400;  // divisible by 4

std::vector<double> bang_off_bang(int n, int m, double amp) {
  std::vector<double> w(static_cast<size_t>(n), 0.0);
  const int half = n / 2;
  for (int k = 0; k < m; ++k) w[static_cast<size_t>(k)] = amp;
  for (int k = half - m; k < half + m; ++k) w[static_cast<size_t>(k)] = -amp;
  for (int k = n - m; k < n; ++k) w[static_cast<size_t>(k)] = amp;
  return w;
}

double profile_objective(const LateralConfig& cfg, const LateralTrajectory& traj,
                         double T) {
  const double w_phi = cfg.rho_L / (cfg.phi_max * cfg.phi_max);
  const double w_T = (1.0 - cfg.rho_L) / cfg.T_fmax_L;
  double steer = 0.0;
  for (size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const double p1 = traj.states[k].phi, p2 = traj.states[k + 1].phi;
    steer += 0.5 * (p1 * p1 + p2 * p2) * 0.5 * traj.dt;
  }
  return w_phi * steer + w_T * T;
}

double max_abs_theta(const LateralTrajectory& traj) {
  double m = 0.0;
  for (const auto& s : traj.states) m = std::max(m, std::abs(s.theta));
  return m;
}

}  // namespace

std::optional<LateralSolution> solve_lateral(const LateralConfig& config) {
  config.validate();
  if (config.lane_width <= 1e-12) {
    LateralSolution sol;
    sol.t_f_L = 0.0;
    sol.dt = 0.0;
    sol.trajectory.states.push_back(LateralState{});
    return sol;
  }

  const int n = kLateralSteps;
  const auto shoot = [&](double T, int m, double amp) {
    const double dt = T / n;
    return integrate_lateral(LateralState{}, bang_off_bang(n, m, amp), dt, config);
  };

  // For a given duration T, find the profile meeting y(T) = l, preferring the
  // feasible ramp fraction with the lowest objective.
  const auto solve_T = [&](double T) -> std::optional<LateralSolution> {
    std::optional<LateralSolution> best;
    for (int m : {n / 16, n / 10, n / 8, n / 5, n / 4}) {
      const double t_r = T * m / n;
      const double amp_hi = 0.999 * config.phi_max / t_r;
      const auto y_of = [&](double amp) { return shoot(T, m, amp).terminal().y; };
      if (y_of(amp_hi) < config.lane_width) continue;  // cannot cross within phi_max
      double lo = 0.0, hi = amp_hi;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (y_of(mid) < config.lane_width ? lo : hi) = mid;
      }
      const double amp = 0.5 * (lo + hi);
      LateralTrajectory traj = shoot(T, m, amp);
      if (std::abs(traj.terminal().y - config.lane_width) > 1e-3) continue;
      if (std::abs(traj.terminal().theta) > 1e-3) continue;
      if (std::abs(traj.terminal().phi) > 1e-3) continue;
      if (max_abs_theta(traj) > config.theta_max) continue;
      if (traj.phi_clamped) continue;
      LateralSolution sol;
      sol.omega = bang_off_bang(n, m, amp);
      sol.dt = T / n;
      sol.t_f_L = T;
      sol.trajectory = std::move(traj);
      sol.objective = profile_objective(config, sol.trajectory, T);
      if (!best || sol.objective < best->objective) best = std::move(sol);
    }
    return best;
  };

  // Coarse scan over the duration, then golden refinement.
  const double T_lo = 0.2;
  const double T_hi = std::max(2.0, 4.0 * config.T_fmax_L);
  std::optional<LateralSolution> best;
  double best_T = 0.0;
  for (int k = 0; k < 24; ++k) {
    const double T = T_lo + (T_hi - T_lo) * k / 23.0;
    auto sol = solve_T(T);
    if (sol && (!best || sol->objective < best->objective)) {
      best_T = T;
      best = std::move(sol);
    }
  }
  if (!best) return std::nullopt;
  const double span = (T_hi - T_lo) / 23.0;
  double a = std::max(T_lo, best_T - span), b = std::min(T_hi, best_T + span);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  const auto score = [&](double T) {
    auto sol = solve_T(T);
    return sol ? sol->objective : std::numeric_limits<double>::infinity();
  };
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = score(c), fd = score(d);
  for (int it = 0; it < 30 && (b - a) > 1e-3; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = score(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = score(d);
    }
  }
  if (auto refined = solve_T(0.5 * (a + b))) {
    if (refined->objective < best->objective) best = std::move(refined);
  }
  return best;
}

namespace {

// min{t : gap(t) >= eps_v}, gap given as a callable; saturates at tf.
double first_safe_time(const std::function<double(double)>& gap, double t0, double tf,
                       double eps_v) {
  if (gap(t0) >= eps_v) return t0;
  const int n = std::max(1, static_cast<int>(std::ceil((tf - t0) / kSafetyGridDt)));
  double prev = t0;
  for (int k = 1; k <= n; ++k) {
    const double t = std::min(tf, t0 + kSafetyGridDt * k);
    if (gap(t) >= eps_v) {
      double lo = prev, hi = t;
      for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) >= eps_v ? hi : lo) = mid;
      }
      return hi;
    }
    prev = t;
  }
  return tf;
}

}  // namespace

SafeTimes safe_times(const LongitudinalSolution& traj_C,
                     const LongitudinalSolution& traj_i,
                     const LongitudinalSolution& traj_i1,
                     const LongitudinalSolution& traj_U, double eps_v) {
  const double t0 = traj_C.t0;
  const double tf = traj_C.tf;
  SafeTimes taus;
  taus.tau_i = first_safe_time(
      [&](double t) { return traj_i.eval(t).x - traj_C.eval(t).x; }, t0, tf, eps_v);
  taus.tau_i1 = first_safe_time(
      [&](double t) { return traj_C.eval(t).x - traj_i1.eval(t).x; }, t0, tf, eps_v);
  taus.tau_U = first_safe_time(
      [&](double t) { return traj_U.eval(t).x - traj_C.eval(t).x; }, t0, tf, eps_v);
  return taus;
}

double lateral_start_time(const SafeTimes& taus, double tf_star,
                          Aggressiveness aggressiveness) {
  if (aggressiveness == Aggressiveness::Conservative) return tf_star;
  return std::max({taus.tau_i, taus.tau_i1, taus.tau_U});
}

}  // namespace coop_lane
