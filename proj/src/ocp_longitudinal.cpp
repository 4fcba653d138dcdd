#include "coop_lane/ocp_longitudinal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coop_lane/numerics.hpp"

namespace coop_lane {

void CWeights::validate() const {
  if (w_u <= 0.0) throw std::invalid_argument("CWeights: w_u must be > 0");
  if (w_t < 0.0 || w_v < 0.0) throw std::invalid_argument("CWeights: weights >= 0");
}

double TrackingWeights::beta(const VehicleLimits& limits) const {
  const double u2 = std::max(limits.u_min * limits.u_min, limits.u_max * limits.u_max);
  return alpha_v * u2 / (1.0 - alpha_v);
}

void TrackingWeights::validate() const {
  if (alpha_v <= 0.0 || alpha_v >= 1.0) {
    throw std::invalid_argument("TrackingWeights: alpha_v in (0,1)");
  }
}

const char* to_string(InfeasibleReason reason) {
  switch (reason) {
    case InfeasibleReason::None: return "none";
    case InfeasibleReason::Time: return "time";
    case InfeasibleReason::NoRoot: return "no-root";
    case InfeasibleReason::Precondition: return "precondition";
    case InfeasibleReason::EntrySafety: return "entry-safety";
    case InfeasibleReason::TerminalGap: return "terminal-gap";
    case InfeasibleReason::TerminalSpeed: return "terminal-speed";
  }
  return "?";
}

namespace {

constexpr double kSign = 1e-9;  // slack for the appendix sign conditions

struct Candidate {
  std::vector<Arc> arcs;  // times normalized to t0 = 0
  double tf = 0.0;        // duration
  double xT = 0.0;
  double vT = 0.0;
  double energy = 0.0;
  CaseLabel label = CaseLabel::Unconstrained;
  bool terminal_equality = false;
};

double arc_energy(const Arc& a) {
  const double dt = a.t_end - a.t_start;
  const double u1 = a.u0;
  const double u2 = a.u0 + a.jerk * dt;
  return dt * (u1 * u1 + u1 * u2 + u2 * u2) / 6.0;
}

// Appends one arc with control u(s) = c0 + j*s (s local), advancing (x, v).
void push_arc(std::vector<Arc>& arcs, double& x, double& v, double s0, double s1,
              double c0, double j) {
  if (s1 - s0 <= 1e-12) return;
  Arc a;
  a.kind = std::abs(j) > 1e-12
               ? ArcKind::PolynomialControl
               : (std::abs(c0) > 1e-12 ? ArcKind::ConstantControl : ArcKind::ConstantSpeed);
  a.t_start = s0;
  a.t_end = s1;
  a.x0 = x;
  a.v0 = v;
  a.u0 = c0;
  a.jerk = j;
  x = a.x_at(s1);
  v = a.v_at(s1);
  arcs.push_back(a);
}

// Exact piecewise integration of u(t) = clamp(a*t + b, u_min, u_max) over
// [0, T], with optional v_min/v_max boundary rides (u = 0 while the nominal
// control keeps pushing into the bound).
struct BuildResult {
  std::vector<Arc> arcs;
  double xT = 0.0;
  double vT = 0.0;
  bool rode_vmin = false;
  bool rode_vmax = false;
  bool clamped_min = false;
  bool clamped_max = false;
};

BuildResult build_clamped_affine(double T, double x0, double v0, double a, double b,
                                 const VehicleLimits& lim, bool ride_speed_bounds) {
  BuildResult out;
  double x = x0, v = v0;

  std::vector<double> knots = {0.0, T};
  if (std::abs(a) > 1e-12) {
    for (double bound : {lim.u_min, lim.u_max}) {
      const double t = (bound - b) / a;
      if (t > 1e-12 && t < T - 1e-12) knots.push_back(t);
    }
  }
  std::sort(knots.begin(), knots.end());

  const auto nominal = [&](double t) { return std::clamp(a * t + b, lim.u_min, lim.u_max); };

  bool riding = false;
  double ride_bound = 0.0;
  for (size_t seg = 0; seg + 1 < knots.size(); ++seg) {
    double s = knots[seg];
    const double s_end = knots[seg + 1];
    if (s_end - s <= 1e-12) continue;
    const double mid = 0.5 * (s + s_end);
    const double raw = a * mid + b;
    const bool const_min = raw <= lim.u_min + 1e-12 && std::abs(a) > 1e-12;
    const bool const_max = raw >= lim.u_max - 1e-12 && std::abs(a) > 1e-12;
    double c0, j;
    if (std::abs(a) <= 1e-12) {
      c0 = std::clamp(b, lim.u_min, lim.u_max);
      j = 0.0;
      if (b < lim.u_min || b > lim.u_max) (b < lim.u_min ? out.clamped_min : out.clamped_max) = true;
    } else if (const_min) {
      c0 = lim.u_min;
      j = 0.0;
      out.clamped_min = true;
    } else if (const_max) {
      c0 = lim.u_max;
      j = 0.0;
      out.clamped_max = true;
    } else {
      c0 = a * s + b;
      j = a;
    }

    while (s < s_end - 1e-12) {
      const double useg0 = c0 + (std::abs(j) > 1e-12 ? 0.0 : 0.0);
      (void)useg0;
      const double u_here = (j == 0.0) ? c0 : a * s + b;
      if (riding) {
        // Ride until the nominal control pushes away from the bound.
        const bool at_min = ride_bound == lim.v_min;
        double leave = s_end;
        const double un = nominal(s);
        const bool leaving_now = at_min ? un > 1e-12 : un < -1e-12;
        if (!leaving_now && std::abs(a) > 1e-12) {
          const double tz = -b / a;  // nominal zero crossing
          if (tz > s && tz < s_end) leave = tz;
        } else if (leaving_now) {
          leave = s;
        }
        if (leave > s) {
          push_arc(out.arcs, x, v, s, leave, 0.0, 0.0);
          s = leave;
        }
        if (s < s_end - 1e-12) {
          const double un2 = nominal(s + 1e-12);
          if ((at_min && un2 > 1e-12) || (!at_min && un2 < -1e-12)) {
            riding = false;
            continue;
          }
          // Still pinned for the rest of this segment.
          push_arc(out.arcs, x, v, s, s_end, 0.0, 0.0);
          s = s_end;
        }
        continue;
      }

      // Earliest v-bound crossing in (s, s_end] moving into the bound.
      double cross = s_end;
      double bound_hit = 0.0;
      if (ride_speed_bounds) {
        for (double bound : {lim.v_min, lim.v_max}) {
          // v(sigma) = v + u_here*sigma + 0.5*j*sigma^2, sigma = t - s.
          const double A = 0.5 * j, B = u_here, C = v - bound;
          double roots[2];
          int nr = 0;
          if (std::abs(A) < 1e-14) {
            if (std::abs(B) > 1e-14) roots[nr++] = -C / B;
          } else {
            const double disc = B * B - 4 * A * C;
            if (disc >= 0.0) {
              const double sq = std::sqrt(disc);
              roots[nr++] = (-B - sq) / (2 * A);
              roots[nr++] = (-B + sq) / (2 * A);
            }
          }
          for (int r = 0; r < nr; ++r) {
            const double sigma = roots[r];
            if (sigma <= 1e-10 || s + sigma >= cross) continue;
            const double vdot = B + j * sigma;
            const bool into = (bound == lim.v_min) ? vdot < -1e-12 : vdot > 1e-12;
            if (into) {
              cross = s + sigma;
              bound_hit = bound;
            }
          }
        }
      }
      if (cross >= s_end - 1e-12) {
        push_arc(out.arcs, x, v, s, s_end, u_here, j);
        s = s_end;
      } else {
        push_arc(out.arcs, x, v, s, cross, u_here, j);
        s = cross;
        v = bound_hit;  // snap exactly onto the bound
        riding = true;
        ride_bound = bound_hit;
        (bound_hit == lim.v_min ? out.rode_vmin : out.rode_vmax) = true;
      }
    }
  }
  out.xT = x;
  out.vT = v;
  if (out.arcs.empty()) push_arc(out.arcs, x, v, 0.0, std::max(T, 0.0), 0.0, 0.0);
  return out;
}

double total_energy(const std::vector<Arc>& arcs) {
  double e = 0.0;
  for (const Arc& a : arcs) e += arc_energy(a);
  return e;
}

bool bounds_ok(const std::vector<Arc>& arcs, const VehicleLimits& lim, double tol = kTol) {
  for (const Arc& a : arcs) {
    for (double t : {a.t_start, a.t_end}) {
      const double u = a.u_at(t);
      if (u < lim.u_min - tol || u > lim.u_max + tol) return false;
    }
    std::vector<double> vts = {a.t_start, a.t_end};
    if (std::abs(a.jerk) > 1e-12) {
      const double t = a.t_start - a.u0 / a.jerk;
      if (t > a.t_start && t < a.t_end) vts.push_back(t);
    }
    for (double t : vts) {
      const double v = a.v_at(t);
      if (v < lim.v_min - tol || v > lim.v_max + tol) return false;
    }
  }
  return true;
}

// Running gap against a constant-speed leader: lead_x(t) - x(t) >= phi*v + eps.
bool gap_ok(const std::vector<Arc>& arcs, double lead_x0, double lead_v, double phi,
            double eps, double tol = kTol) {
  for (const Arc& a : arcs) {
    const int n = std::max(1, static_cast<int>(std::ceil((a.t_end - a.t_start) / kSafetyGridDt)));
    for (int k = 0; k <= n; ++k) {
      const double t = a.t_start + (a.t_end - a.t_start) * k / n;
      const double slack = (lead_x0 + lead_v * t) - a.x_at(t) - (phi * a.v_at(t) + eps);
      if (slack < -tol) return false;
    }
  }
  return true;
}

LongitudinalSolution finalize(const Candidate& cand, double t0, double objective) {
  LongitudinalSolution sol;
  sol.t0 = t0;
  sol.tf = t0 + cand.tf;
  sol.arcs = cand.arcs;
  for (Arc& a : sol.arcs) {
    a.t_start += t0;
    a.t_end += t0;
  }
  if (sol.arcs.empty()) {
    Arc a;
    a.kind = ArcKind::ConstantSpeed;
    a.t_start = sol.t0;
    a.t_end = sol.tf;
    a.x0 = cand.xT;
    a.v0 = cand.vT;
    sol.arcs.push_back(a);
  }
  sol.terminal_x = cand.xT;
  sol.terminal_v = cand.vT;
  sol.case_label = cand.label;
  sol.objective_value = objective;
  return sol;
}

std::vector<Eigen::VectorXd> make_seeds(std::initializer_list<std::vector<double>> rows) {
  std::vector<Eigen::VectorXd> seeds;
  for (const auto& row : rows) {
    Eigen::VectorXd s(static_cast<int>(row.size()));
    for (size_t i = 0; i < row.size(); ++i) s[static_cast<int>(i)] = row[i];
    seeds.push_back(s);
  }
  return seeds;
}

struct TerminalPos {
  enum class Sense { MinX, MaxX };
  Sense sense;
  double P = 0.0;  // x(T) >= / <= P - q*v(T)
  double q = 0.0;
};

struct LeadSpec {
  double x0 = 0.0;
  double v = 0.0;
  double phi = 0.0;
  double eps = 0.0;
};

struct FixedSpec {
  double T = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  double w = 0.0;  // terminal speed weight (beta)
  double v_ref = 0.0;
  VehicleLimits lim;
  std::optional<TerminalPos> pos;
  std::optional<double> v_th;
  std::optional<LeadSpec> lead;
};

struct FixedCandidate {
  std::vector<Arc> arcs;
  double xT = 0.0, vT = 0.0;
  double J = 0.0;
  bool equality = false;
};

bool pos_satisfied(const FixedSpec& s, double xT, double vT, double tol = kTol) {
  if (!s.pos) return true;
  const double bound = s.pos->P - s.pos->q * vT;
  return s.pos->sense == TerminalPos::Sense::MinX ? xT >= bound - tol
                                                  : xT <= bound + tol;
}

bool lead_satisfied(const FixedSpec& s, const std::vector<Arc>& arcs) {
  if (!s.lead) return true;
  return gap_ok(arcs, s.lead->x0, s.lead->v, s.lead->phi, s.lead->eps);
}

double fixed_objective(const FixedSpec& s, const std::vector<Arc>& arcs, double vT) {
  return s.w * (vT - s.v_ref) * (vT - s.v_ref) + total_energy(arcs);
}

std::optional<FixedCandidate> fixed_from_affine(const FixedSpec& s, double a, double b,
                                                bool equality, bool rides = true) {
  BuildResult br = build_clamped_affine(s.T, s.x0, s.v0, a, b, s.lim, rides);
  FixedCandidate cand;
  cand.arcs = std::move(br.arcs);
  cand.xT = br.xT;
  cand.vT = br.vT;
  cand.equality = equality;
  cand.J = fixed_objective(s, cand.arcs, cand.vT);
  if (!bounds_ok(cand.arcs, s.lim)) return std::nullopt;
  return cand;
}

// Two-equation active-set solve: a terminal position equality plus the
// costate relation, control clamped affine in time. Solved both with and
// without speed-bound riding (a ride changes the costate structure, so the
// pure-affine root is tried as well and bounds-checked honestly).
void fixed_equality_on(const FixedSpec& s, const TerminalPos& pos,
                       std::vector<FixedCandidate>& out) {
  const double q = pos.q;
  for (bool rides : {true, false}) {
    const auto residual = [&](const Eigen::VectorXd& z) {
      BuildResult br = build_clamped_affine(s.T, s.x0, s.v0, z[0], z[1], s.lim, rides);
      Eigen::VectorXd r(2);
      r[0] = (z[0] * s.T + z[1]) + 2.0 * s.w * (br.vT - s.v_ref) + z[0] * q;
      r[1] = br.xT - (pos.P - q * br.vT);
      return r;
    };
    std::vector<Eigen::VectorXd> seeds;
    for (double a : {-4.0, -2.0, -0.5, 0.0, 0.5, 2.0, 4.0}) {
      for (double b : {-8.0, -3.0, 0.0, 3.0, 8.0}) {
        Eigen::VectorXd z(2);
        z << a, b;
        seeds.push_back(z);
      }
    }
    NewtonConfig cfg;
    cfg.tol_residual = 1e-9;
    for (const auto& root : newton_solve_multi(residual, seeds, cfg)) {
      if (auto cand = fixed_from_affine(s, root[0], root[1], true, rides)) {
        out.push_back(*cand);
      }
    }
  }
}

// Both terminal equalities active: v(T) = v_th and the position equality.
void fixed_double_equality(const FixedSpec& s, std::vector<FixedCandidate>& out) {
  if (!s.pos || !s.v_th) return;
  const double q = s.pos->q;
  for (bool rides : {true, false}) {
    const auto residual = [&](const Eigen::VectorXd& z) {
      BuildResult br = build_clamped_affine(s.T, s.x0, s.v0, z[0], z[1], s.lim, rides);
      Eigen::VectorXd r(2);
      r[0] = br.vT - *s.v_th;
      r[1] = br.xT - (s.pos->P - q * br.vT);
      return r;
    };
    auto seeds = make_seeds({{1.0, -3.0}, {2.0, -5.0}, {0.5, -1.0}, {-0.5, 0.5}});
    NewtonConfig cfg;
    cfg.tol_residual = 1e-9;
    for (const auto& root : newton_solve_multi(residual, seeds, cfg)) {
      if (auto cand = fixed_from_affine(s, root[0], root[1], true, rides)) {
        out.push_back(*cand);
      }
    }
  }
}

// Largest constant control that keeps the leader gap satisfied; covers the
// grazing case where the unconstrained control barely violates the
// constraint.
std::optional<FixedCandidate> fixed_const_lead_limited(const FixedSpec& s,
                                                       double u_unconstrained) {
  if (!s.lead) return std::nullopt;
  const auto feasible_u = [&](double u) {
    BuildResult br = build_clamped_affine(s.T, s.x0, s.v0, 0.0, u, s.lim, true);
    return gap_ok(br.arcs, s.lead->x0, s.lead->v, s.lead->phi, s.lead->eps, 1e-9);
  };
  double lo = s.lim.u_min;
  double hi = std::clamp(u_unconstrained, s.lim.u_min, s.lim.u_max);
  if (feasible_u(hi)) return std::nullopt;  // unconstrained already clean
  if (!feasible_u(lo)) return std::nullopt; // even full braking grazes: ride instead
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible_u(mid) ? lo : hi) = mid;
  }
  return fixed_from_affine(s, 0.0, lo, false);
}

// Leader-riding candidate for CAV i: affine approach, tangential contact at
// t_c (v = v_lead, gap = delta), then track the leader to T. The contact time
// is searched on a coarse grid.
std::optional<FixedCandidate> fixed_leader_ride(const FixedSpec& s) {
  if (!s.lead) return std::nullopt;
  const double delta = s.lead->phi * s.lead->v + s.lead->eps;
  const auto try_contact = [&](double tc) -> std::optional<FixedCandidate> {
    const auto residual = [&](const Eigen::VectorXd& z) {
      BuildResult br = build_clamped_affine(tc, s.x0, s.v0, z[0], z[1], s.lim, true);
      Eigen::VectorXd r(2);
      r[0] = br.vT - s.lead->v;
      r[1] = (s.lead->x0 + s.lead->v * tc) - br.xT - delta;
      return r;
    };
    auto seeds = make_seeds({{1.0, 1.0}, {-1.0, 2.0}, {0.5, -0.5}});
    std::optional<FixedCandidate> best;
    for (const auto& root : newton_solve_multi(residual, seeds)) {
      BuildResult pre = build_clamped_affine(tc, s.x0, s.v0, root[0], root[1], s.lim, true);
      FixedCandidate cand;
      cand.arcs = pre.arcs;
      double x = pre.xT, v = pre.vT;
      push_arc(cand.arcs, x, v, tc, s.T, 0.0, 0.0);
      cand.xT = x;
      cand.vT = v;
      cand.J = fixed_objective(s, cand.arcs, cand.vT);
      if (!bounds_ok(cand.arcs, s.lim)) continue;
      if (!best || cand.J < best->J) best = cand;
    }
    return best;
  };
  std::optional<FixedCandidate> best;
  double best_tc = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double tc = s.T * k / 21.0;
    auto cand = try_contact(tc);
    if (cand && (!best || cand->J < best->J)) {
      best = cand;
      best_tc = tc;
    }
  }
  if (best) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::max(1e-3, best_tc - s.T / 21.0);
    double b = std::min(s.T - 1e-6, best_tc + s.T / 21.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    const auto score = [&](double tc) {
      auto cand = try_contact(tc);
      if (cand && cand->J < best->J) {
        best = cand;
      }
      return cand ? cand->J : 1e30;
    };
    double fc = score(c), fd = score(d);
    for (int it = 0; it < 25 && (b - a) > 1e-5; ++it) {
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
  }
  return best;
}

// Speed-bound riding extremal for a terminal position equality: ramp to the
// bound tangentially (u = 0 at entry), ride it, exit tangentially with the
// same control slope (the position multiplier keeps lambda_x constant across
// the junctions). Optional control-clamp lead-in and tail.
void fixed_vbound_ride(const FixedSpec& s, const TerminalPos& pos, double bound,
                       std::vector<FixedCandidate>& out) {
  const double q = pos.q;
  const auto assemble = [&](double a, double t_z, double t_e,
                            double* entry_err) -> std::optional<FixedCandidate> {
    if (!(t_z > 1e-6 && t_e >= t_z - 1e-9 && t_e < s.T - 1e-6)) return std::nullopt;
    if ((bound == s.lim.v_max && a >= -1e-12) || (bound == s.lim.v_min && a <= 1e-12)) {
      return std::nullopt;
    }
    FixedCandidate cand;
    double x = s.x0, v = s.v0;
    // Pre phase: optional clamp lead-in, then the tangential ramp u = a(t - t_z).
    const double u0_ramp = -a * t_z;
    const double clamp_pre = a < 0.0 ? s.lim.u_max : s.lim.u_min;
    if ((a < 0.0 && u0_ramp > s.lim.u_max) || (a > 0.0 && u0_ramp < s.lim.u_min)) {
      const double tau0 = t_z + clamp_pre / a;
      if (tau0 <= 1e-9) return std::nullopt;
      push_arc(cand.arcs, x, v, 0.0, tau0, clamp_pre, 0.0);
      push_arc(cand.arcs, x, v, tau0, t_z, clamp_pre, a);
    } else {
      push_arc(cand.arcs, x, v, 0.0, t_z, u0_ramp, a);
    }
    if (entry_err) *entry_err = v - bound;
    v = bound;
    push_arc(cand.arcs, x, v, t_z, t_e, 0.0, 0.0);
    // Exit ramp with the same slope; clamp at the far control bound if hit.
    const double clamp_post = a < 0.0 ? s.lim.u_min : s.lim.u_max;
    const double t_hit = t_e + clamp_post / a;
    if (t_hit > t_e && t_hit < s.T) {
      push_arc(cand.arcs, x, v, t_e, t_hit, 0.0, a);
      push_arc(cand.arcs, x, v, t_hit, s.T, clamp_post, 0.0);
    } else {
      push_arc(cand.arcs, x, v, t_e, s.T, 0.0, a);
    }
    cand.xT = x;
    cand.vT = v;
    cand.equality = true;
    cand.J = fixed_objective(s, cand.arcs, cand.vT);
    return cand;
  };
  const auto residual = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd r(3);
    double entry_err = 0.0;
    auto cand = assemble(z[0], z[1], z[2], &entry_err);
    if (!cand) {
      r.setConstant(1e6);
      return r;
    }
    r[0] = entry_err;
    const double uf = z[0] * (s.T - z[2]);
    r[1] = uf + 2.0 * s.w * (cand->vT - s.v_ref) + z[0] * q;
    r[2] = cand->xT + q * cand->vT - pos.P;
    return r;
  };
  std::vector<Eigen::VectorXd> seeds;
  for (double a : bound == s.lim.v_max ? std::initializer_list<double>{-0.8, -2.5, -5.0}
                                       : std::initializer_list<double>{0.8, 2.5, 5.0}) {
    for (double fz : {0.25, 0.45}) {
      for (double fe : {0.55, 0.8}) {
        Eigen::VectorXd z(3);
        z << a, fz * s.T, fe * s.T;
        seeds.push_back(z);
      }
    }
  }
  NewtonConfig cfg;
  cfg.tol_residual = 1e-9;
  for (const auto& root : newton_solve_multi(residual, seeds, cfg)) {
    double entry_err = 0.0;
    auto cand = assemble(root[0], root[1], root[2], &entry_err);
    if (!cand || std::abs(entry_err) > 1e-7) continue;
    if (!bounds_ok(cand->arcs, s.lim)) continue;
    out.push_back(*cand);
  }
}

CaseLabel fixed_label(const FixedCandidate& cand, const VehicleLimits& lim) {
  if (cand.equality) return CaseLabel::TerminalSafetyEquality;
  bool has_min = false, has_max = false, has_vmin = false;
  for (const Arc& a : cand.arcs) {
    if (a.kind == ArcKind::ConstantControl) {
      if (std::abs(a.u0 - lim.u_min) < 1e-9) has_min = true;
      if (std::abs(a.u0 - lim.u_max) < 1e-9) has_max = true;
    }
    if (a.kind == ArcKind::ConstantSpeed && std::abs(a.v0 - lim.v_min) < 1e-9) {
      has_vmin = true;
    }
  }
  if (has_vmin) {
    if (has_min && has_max) return CaseLabel::UminVminUmaxArcs;
    if (has_min) return CaseLabel::UminVminArcs;
    if (has_max) return CaseLabel::UmaxVminArcs;
    return CaseLabel::VminArc;
  }
  if (has_min && has_max) return CaseLabel::UminUmaxArcs;
  if (has_min) return CaseLabel::UminArc;
  if (has_max) return CaseLabel::UmaxArc;
  return CaseLabel::Unconstrained;
}

SolveOutcome solve_fixed_time(const FixedSpec& s, double t0) {
  // Degenerate horizon: nothing to control.
  if (s.T <= 1e-9) {
    if (!pos_satisfied(s, s.x0, s.v0) || (s.v_th && s.v0 < *s.v_th - kTol)) {
      return {std::nullopt, s.v_th && s.v0 < *s.v_th - kTol
                                ? InfeasibleReason::TerminalSpeed
                                : InfeasibleReason::TerminalGap};
    }
    Candidate cand;
    cand.tf = 0.0;
    cand.xT = s.x0;
    cand.vT = s.v0;
    Arc a;
    a.kind = ArcKind::ConstantSpeed;
    a.t_start = 0.0;
    a.t_end = 0.0;
    a.x0 = s.x0;
    a.v0 = s.v0;
    cand.arcs.push_back(a);
    SolveOutcome out;
    out.solution = finalize(cand, t0, s.w * (s.v0 - s.v_ref) * (s.v0 - s.v_ref));
    return out;
  }

  // Reachability pre-checks give sharper infeasibility reasons.
  if (s.pos && s.pos->sense == TerminalPos::Sense::MinX) {
    BuildResult most = build_clamped_affine(s.T, s.x0, s.v0, 0.0, s.lim.u_max, s.lim, true);
    double x_best = most.xT, v_best = most.vT;
    if (s.lead) {
      // Never closer than the leader allows.
      const double cap =
          (s.lead->x0 + s.lead->v * s.T) - (s.lead->phi * v_best + s.lead->eps);
      x_best = std::min(x_best, cap);
    }
    if (x_best < (s.pos->P - s.pos->q * v_best) - kTol) {
      return {std::nullopt, InfeasibleReason::TerminalGap};
    }
  }
  if (s.pos && s.pos->sense == TerminalPos::Sense::MaxX && s.v_th) {
    // Least terminal position with v(T) >= v_th: brake hard, then accelerate
    // back up to v_th arriving exactly at T.
    const double vth = *s.v_th;
    if (vth > s.v0 + s.lim.u_max * s.T + kTol) {
      return {std::nullopt, InfeasibleReason::TerminalSpeed};
    }
    double td = (vth - s.v0 - s.lim.u_max * s.T) / (s.lim.u_min - s.lim.u_max);
    td = std::clamp(td, 0.0, s.T);
    double v_lo = s.v0 + s.lim.u_min * td;
    double x_min;
    if (v_lo >= s.lim.v_min) {
      const double ta = s.T - td;
      x_min = s.x0 + s.v0 * td + 0.5 * s.lim.u_min * td * td + v_lo * ta +
              0.5 * s.lim.u_max * ta * ta;
    } else {
      const double t1 = (s.lim.v_min - s.v0) / s.lim.u_min;
      const double ta = (vth - s.lim.v_min) / s.lim.u_max;
      const double tr = std::max(0.0, s.T - t1 - ta);
      x_min = s.x0 + s.v0 * t1 + 0.5 * s.lim.u_min * t1 * t1 + s.lim.v_min * tr +
              s.lim.v_min * ta + 0.5 * s.lim.u_max * ta * ta;
      v_lo = s.lim.v_min;
    }
    if (x_min > (s.pos->P - s.pos->q * vth) + kTol) {
      return {std::nullopt, InfeasibleReason::TerminalSpeed};
    }
  }

  std::vector<FixedCandidate> candidates;

  // Unconstrained constant control (clamped).
  double u_unconstrained = 0.0;
  {
    const double u_int = 2.0 * s.w * (s.v_ref - s.v0) / (1.0 + 2.0 * s.w * s.T);
    u_unconstrained = std::clamp(u_int, s.lim.u_min, s.lim.u_max);
    if (auto cand = fixed_from_affine(s, 0.0, u_unconstrained, false)) {
      candidates.push_back(*cand);
    }
  }
  if (auto cand = fixed_const_lead_limited(s, u_unconstrained)) {
    candidates.push_back(*cand);
  }
  if (s.pos) {
    fixed_equality_on(s, *s.pos, candidates);
    fixed_vbound_ride(s, *s.pos, s.lim.v_max, candidates);
    fixed_vbound_ride(s, *s.pos, s.lim.v_min, candidates);
  }
  if (s.lead) {
    // The leader gap can also bind exactly at the terminal time.
    const TerminalPos lead_terminal{TerminalPos::Sense::MaxX,
                                    s.lead->x0 + s.lead->v * s.T - s.lead->eps,
                                    s.lead->phi};
    fixed_equality_on(s, lead_terminal, candidates);
  }
  if (s.v_th) {
    const double u = std::clamp((*s.v_th - s.v0) / s.T, s.lim.u_min, s.lim.u_max);
    if (auto cand = fixed_from_affine(s, 0.0, u, false)) candidates.push_back(*cand);
    fixed_double_equality(s, candidates);
  }
  if (s.lead) {
    if (auto cand = fixed_leader_ride(s)) candidates.push_back(*cand);
  }

  const FixedCandidate* best = nullptr;
  for (const FixedCandidate& cand : candidates) {
    if (!pos_satisfied(s, cand.xT, cand.vT)) continue;
    if (s.v_th && cand.vT < *s.v_th - kTol) continue;
    if (!lead_satisfied(s, cand.arcs)) continue;
    if (!best || cand.J < best->J) best = &cand;
  }
  if (!best) return {std::nullopt, InfeasibleReason::NoRoot};

  Candidate cand;
  cand.arcs = best->arcs;
  cand.tf = s.T;
  cand.xT = best->xT;
  cand.vT = best->vT;
  cand.label = fixed_label(*best, s.lim);
  SolveOutcome out;
  out.solution = finalize(cand, t0, best->J);
  return out;
}


// ---------------------------------------------------------------------------
// Free-terminal-time candidates for CAV C (t normalized so t0 = 0).
// ---------------------------------------------------------------------------

struct CContext {
  double x0, v0, xu0, vu, v_flow, T_max, at, av;
  VehicleLimits lim;
};

void add_candidate(std::vector<Candidate>& out, Candidate c) { out.push_back(std::move(c)); }

// Constant-control solutions of the transversality condition, clipped to the
// control bounds when sqrt(2*alpha_t) exceeds them.
void candidates_constant(const CContext& c, std::vector<Candidate>& out, bool& hit_tmax) {
  const double ub = std::sqrt(2.0 * c.at);
  for (int dir : {+1, -1}) {
    double u, vT;
    CaseLabel label = CaseLabel::Unconstrained;
    if (dir > 0) {
      u = ub;
      if (u > c.lim.u_max) {
        u = c.lim.u_max;
        label = CaseLabel::UmaxArc;
      }
      vT = c.v_flow - (c.at + 0.5 * u * u) / (c.av * u);
    } else {
      u = -ub;
      if (u < c.lim.u_min) {
        u = c.lim.u_min;
        label = CaseLabel::UminArc;
      }
      vT = c.v_flow - (c.at + 0.5 * u * u) / (c.av * u);
    }
    const double tf = (vT - c.v0) / u;
    if (!(tf > 1e-9)) continue;
    if (tf > c.T_max + kSign) {
      hit_tmax = true;
      continue;
    }
    Candidate cand;
    double x = c.x0, v = c.v0;
    push_arc(cand.arcs, x, v, 0.0, tf, u, 0.0);
    cand.tf = tf;
    cand.xT = x;
    cand.vT = v;
    cand.energy = total_energy(cand.arcs);
    cand.label = label;
    add_candidate(out, cand);
  }
}

// Constant control riding to the first safety-boundary crossing: the terminal
// time is pinned by the equality, not by transversality (the terminal-gap
// multiplier absorbs it).
void candidates_boundary_pinned(const CContext& c, std::vector<Candidate>& out,
                                bool& hit_tmax) {
  for (double u : {c.lim.u_max, c.lim.u_min}) {
    // gap(t) - delta(v(t)) = 0 as a quadratic in t.
    const double A = -0.5 * u;
    const double B = c.vu - c.v0 - c.lim.phi * u;
    const double Cq = (c.xu0 - c.x0) - c.lim.phi * c.v0 - c.lim.eps;
    double roots[2];
    int nr = 0;
    if (std::abs(A) < 1e-14) {
      if (std::abs(B) > 1e-14) roots[nr++] = -Cq / B;
    } else {
      const double disc = B * B - 4.0 * A * Cq;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      roots[nr++] = (-B - sq) / (2.0 * A);
      roots[nr++] = (-B + sq) / (2.0 * A);
    }
    double tf = -1.0;
    for (int r = 0; r < nr; ++r) {
      if (roots[r] > 1e-6 && (tf < 0.0 || roots[r] < tf)) tf = roots[r];
    }
    if (tf <= 0.0) continue;
    if (tf > c.T_max + kSign) {
      hit_tmax = true;
      continue;
    }
    Candidate cand;
    double x = c.x0, v = c.v0;
    push_arc(cand.arcs, x, v, 0.0, tf, u, 0.0);
    cand.tf = tf;
    cand.xT = x;
    cand.vT = v;
    cand.energy = total_energy(cand.arcs);
    cand.label = u > 0.0 ? CaseLabel::UmaxArc : CaseLabel::UminArc;
    cand.terminal_equality = true;
    add_candidate(out, cand);
  }
}

// Zero-duration boundary solution: legitimate when C already travels at the
// flow speed and merely changes lanes.
void candidate_zero(const CContext& c, std::vector<Candidate>& out) {
  Candidate cand;
  cand.tf = 0.0;
  cand.xT = c.x0;
  cand.vT = c.v0;
  Arc a;
  a.kind = ArcKind::ConstantSpeed;
  a.t_start = 0.0;
  a.t_end = 0.0;
  a.x0 = c.x0;
  a.v0 = c.v0;
  cand.arcs.push_back(a);
  cand.label = CaseLabel::Unconstrained;
  add_candidate(out, cand);
}

double delta_of(const VehicleLimits& lim, double v) { return lim.phi * v + lim.eps; }

// Terminal-safety-equality, single affine arc (the unconstrained six-equation
// system reduced to the unknowns (a, b, tf)).
void candidates_equality_affine(const CContext& c, std::vector<Candidate>& out,
                                bool& hit_tmax) {
  const auto residual = [&](const Eigen::VectorXd& z) {
    const double a = z[0], b = z[1], tf = z[2];
    const double vT = c.v0 + b * tf + 0.5 * a * tf * tf;
    const double xT = c.x0 + c.v0 * tf + 0.5 * b * tf * tf + a * tf * tf * tf / 6.0;
    Eigen::VectorXd r(3);
    // Terminal costate carries the headway slope of delta(v(tf)).
    r[0] = a * tf + b - (c.av * (c.v_flow - vT) - a * c.lim.phi);
    r[1] = c.at + a * vT - 0.5 * (a * tf + b) * (a * tf + b);
    r[2] = xT - (c.xu0 + c.vu * tf - delta_of(c.lim, vT));
    return r;
  };
  std::vector<Eigen::VectorXd> seeds;
  for (double tf : {1.0, 3.0, 6.0, 10.0, c.T_max}) {
    for (double a0 : {0.3, 2.0}) {
      Eigen::VectorXd s(3);
      s << a0, -1.0, tf;
      seeds.push_back(s);
    }
  }
  for (const auto& root : newton_solve_multi(residual, seeds)) {
    const double a = root[0], b = root[1], tf = root[2];
    if (!(tf > 1e-4)) continue;
    if (a < -kSign || b > kSign) continue;  // sign conditions
    if (tf > c.T_max + kSign) {
      hit_tmax = true;
      continue;
    }
    Candidate cand;
    double x = c.x0, v = c.v0;
    push_arc(cand.arcs, x, v, 0.0, tf, b, a);
    cand.tf = tf;
    cand.xT = x;
    cand.vT = v;
    cand.energy = total_energy(cand.arcs);
    cand.label = CaseLabel::TerminalSafetyEquality;
    cand.terminal_equality = true;
    add_candidate(out, cand);
  }
}

// Terminal equality with a u_max arc at the end: affine ramp on [0, t1],
// saturated control afterwards.
void candidates_equality_umax(const CContext& c, std::vector<Candidate>& out,
                              bool& hit_tmax) {
  const double um = c.lim.u_max;
  const auto residual = [&](const Eigen::VectorXd& z) {
    const double a = z[0], b = z[1], t1 = z[2], tf = z[3];
    const double v1 = c.v0 + b * t1 + 0.5 * a * t1 * t1;
    const double x1 = c.x0 + c.v0 * t1 + 0.5 * b * t1 * t1 + a * t1 * t1 * t1 / 6.0;
    const double tau = tf - t1;
    const double vT = v1 + um * tau;
    const double xT = x1 + v1 * tau + 0.5 * um * tau * tau;
    const double uf = a * tf + b;  // formal costate extension
    Eigen::VectorXd r(4);
    r[0] = a * t1 + b - um;
    r[1] = uf - (c.av * (c.v_flow - vT) - a * c.lim.phi);
    r[2] = 0.5 * um * um + c.at + a * vT - uf * um;
    r[3] = xT - (c.xu0 + c.vu * tf - delta_of(c.lim, vT));
    return r;
  };
  std::vector<Eigen::VectorXd> seeds;
  for (double tf : {1.5, 3.0, 6.0, 10.0}) {
    Eigen::VectorXd s(4);
    s << 2.0, -1.0, 0.4 * tf, tf;
    seeds.push_back(s);
  }
  for (const auto& root : newton_solve_multi(residual, seeds)) {
    const double a = root[0], b = root[1], t1 = root[2], tf = root[3];
    if (!(t1 > 1e-6 && tf > t1 + 1e-6)) continue;
    if (a < -kSign || b > kSign) continue;
    if (tf > c.T_max + kSign) {
      hit_tmax = true;
      continue;
    }
    Candidate cand;
    double x = c.x0, v = c.v0;
    push_arc(cand.arcs, x, v, 0.0, t1, b, a);
    push_arc(cand.arcs, x, v, t1, tf, um, 0.0);
    cand.tf = tf;
    cand.xT = x;
    cand.vT = v;
    cand.energy = total_energy(cand.arcs);
    cand.label = CaseLabel::UmaxArc;
    cand.terminal_equality = true;
    add_candidate(out, cand);
  }
}

// Terminal equality with a u_min arc at the start.
void candidates_equality_umin(const CContext& c, std::vector<Candidate>& out,
                              bool& hit_tmax) {
  const double um = c.lim.u_min;
  const auto residual = [&](const Eigen::VectorXd& z) {
    const double a = z[0], b = z[1], t2 = z[2], tf = z[3];
    const double v2 = c.v0 + um * t2;
    const double x2 = c.x0 + c.v0 * t2 + 0.5 * um * t2 * t2;
    const double tau = tf - t2;
    const double vT = v2 + um * tau + 0.5 * a * tau * tau;
    const double xT = x2 + v2 * tau + 0.5 * um * tau * tau + a * tau * tau * tau / 6.0;
    const double uf = a * tf + b;
    Eigen::VectorXd r(4);
    r[0] = a * t2 + b - um;
    r[1] = uf - (c.av * (c.v_flow - vT) - a * c.lim.phi);
    r[2] = c.at + a * vT - 0.5 * uf * uf;
    r[3] = xT - (c.xu0 + c.vu * tf - delta_of(c.lim, vT));
    return r;
  };
  std::vector<Eigen::VectorXd> seeds;
  for (double tf : {2.0, 4.0, 7.0, 11.0}) {
    Eigen::VectorXd s(4);
    s << 2.0, um - 0.5, 0.3 * tf, tf;
    seeds.push_back(s);
  }
  for (const auto& root : newton_solve_multi(residual, seeds)) {
    const double a = root[0], t2 = root[2], tf = root[3];
    if (!(t2 > 1e-6 && tf > t2 + 1e-6)) continue;
    if (a < -kSign) continue;
    if (tf > c.T_max + kSign) {
      hit_tmax = true;
      continue;
    }
    Candidate cand;
    double x = c.x0, v = c.v0;
    push_arc(cand.arcs, x, v, 0.0, t2, um, 0.0);
    push_arc(cand.arcs, x, v, t2, tf, um, a);
    cand.tf = tf;
    cand.xT = x;
    cand.vT = v;
    cand.energy = total_energy(cand.arcs);
    cand.label = CaseLabel::UminArc;
    cand.terminal_equality = true;
    add_candidate(out, cand);
  }
}

// Terminal equality with u_min entry and u_max exit arcs.
void candidates_equality_umin_umax(const CContext& c, std::vector<Candidate>& out,
                                   bool& hit_tmax) {
  const double lo = c.lim.u_min, hi = c.lim.u_max;
  const auto residual = [&](const Eigen::VectorXd& z) {
    const double a = z[0], t1 = z[1], t2 = z[2], tf = z[3];
    const double b = lo - a * t1;
    const double v1 = c.v0 + lo * t1;
    const double x1 = c.x0 + c.v0 * t1 + 0.5 * lo * t1 * t1;
    const double m = t2 - t1;
    const double v2 = v1 + lo * m + 0.5 * a * m * m;
    const double x2 = x1 + v1 * m + 0.5 * lo * m * m + a * m * m * m / 6.0;
    const double tau = tf - t2;
    const double vT = v2 + hi * tau;
    const double xT = x2 + v2 * tau + 0.5 * hi * tau * tau;
    const double uf = a * tf + b;
    Eigen::VectorXd r(4);
    r[0] = a * t2 + b - hi;
    r[1] = uf - (c.av * (c.v_flow - vT) - a * c.lim.phi);
    r[2] = 0.5 * hi * hi + c.at + a * vT - uf * hi;
    r[3] = xT - (c.xu0 + c.vu * tf - delta_of(c.lim, vT));
    return r;
  };
  std::vector<Eigen::VectorXd> seeds;
  for (double tf : {3.0, 6.0, 10.0}) {
    Eigen::VectorXd s(4);
    s << 3.0, 0.2 * tf, 0.7 * tf, tf;
    seeds.push_back(s);
  }
  for (const auto& root : newton_solve_multi(residual, seeds)) {
    const double a = root[0], t1 = root[1], t2 = root[2], tf = root[3];
    if (!(t1 > 1e-6 && t2 > t1 + 1e-6 && tf > t2 + 1e-6) || a <= 0.0) continue;
    if (tf > c.T_max + kSign) {
      hit_tmax = true;
      continue;
    }
    Candidate cand;
    double x = c.x0, v = c.v0;
    push_arc(cand.arcs, x, v, 0.0, t1, lo, 0.0);
    push_arc(cand.arcs, x, v, t1, t2, lo, a);
    push_arc(cand.arcs, x, v, t2, tf, hi, 0.0);
    cand.tf = tf;
    cand.xT = x;
    cand.vT = v;
    cand.energy = total_energy(cand.arcs);
    cand.label = CaseLabel::UminUmaxArcs;
    cand.terminal_equality = true;
    add_candidate(out, cand);
  }
}

// Pre-phase reaching (v_min, u = 0) tangentially at time t1. Returns false if
// t1 is too short even under full braking.
bool vmin_pre_phase(const CContext& c, double t1, std::vector<Arc>& arcs, double& x1,
                    bool& used_umin) {
  const double drop = c.v0 - c.lim.v_min;
  if (drop < 1e-9) return false;
  const double t_min = drop / (-c.lim.u_min);
  const double t_ramp = 2.0 * drop / (-c.lim.u_min);
  if (t1 <= t_min + 1e-9) return false;
  double x = c.x0, v = c.v0;
  if (t1 >= t_ramp) {
    const double s = 2.0 * drop / (t1 * t1);
    push_arc(arcs, x, v, 0.0, t1, -s * t1, s);
    used_umin = false;
  } else {
    const double s = c.lim.u_min * c.lim.u_min /
                     (2.0 * (c.lim.v_min - c.v0 - c.lim.u_min * t1));
    const double tau0 = t1 + c.lim.u_min / s;
    if (!(s > 0.0) || tau0 < -1e-9) return false;
    push_arc(arcs, x, v, 0.0, std::max(0.0, tau0), c.lim.u_min, 0.0);
    push_arc(arcs, x, v, std::max(0.0, tau0), t1, c.lim.u_min, s);
    used_umin = true;
  }
  x1 = x;
  return true;
}

// Minimum-speed-arc candidates: ramp down to v_min by t1, ride, then an
// accelerating exit ramp (possibly saturating at u_max) or ride to tf. The
// entry time t1 is searched over a coarse grid plus golden refinement.
void candidates_vmin(const CContext& c, std::vector<Candidate>& out, bool& hit_tmax) {
  const double drop = c.v0 - c.lim.v_min;
  if (drop < 0.5) return;
  const double t_min = drop / (-c.lim.u_min);

  const auto eval_t1 = [&](double t1) -> std::optional<Candidate> {
    std::vector<Arc> pre;
    double x1 = 0.0;
    bool used_umin = false;
    if (!vmin_pre_phase(c, t1, pre, x1, used_umin)) return std::nullopt;
    std::optional<Candidate> best;
    const auto consider = [&](Candidate cand) {
      if (cand.tf > c.T_max + kSign) {
        hit_tmax = true;
        return;
      }
      cand.energy = total_energy(cand.arcs);
      const double J = c.at * cand.tf +
                       0.5 * c.av * (cand.vT - c.v_flow) * (cand.vT - c.v_flow) +
                       cand.energy;
      if (!best || J < c.at * best->tf +
                          0.5 * c.av * (best->vT - c.v_flow) * (best->vT - c.v_flow) +
                          best->energy) {
        best = std::move(cand);
      }
    };

    // (a) ride v_min until tf, terminal equality pinning tf.
    if (std::abs(c.lim.v_min - c.vu) > 1e-9) {
      const double tf = (c.xu0 - delta_of(c.lim, c.lim.v_min) - x1 + c.lim.v_min * t1) /
                        (c.lim.v_min - c.vu);
      if (tf >= t1 - 1e-9 && tf <= c.T_max + kSign) {
        Candidate cand;
        cand.arcs = pre;
        double x = x1, v = c.lim.v_min;
        push_arc(cand.arcs, x, v, t1, std::max(tf, t1), 0.0, 0.0);
        cand.tf = std::max(tf, t1);
        cand.xT = x;
        cand.vT = c.lim.v_min;
        cand.label = used_umin ? CaseLabel::UminVminArcs : CaseLabel::VminArc;
        cand.terminal_equality = true;
        consider(std::move(cand));
      }
    }

    // (b) exit ramp u = s2*(t - t2), unknowns (s2, t2, tf).
    {
      const auto residual = [&](const Eigen::VectorXd& z) {
        const double s2 = z[0], t2 = z[1], tf = z[2];
        const double tau = tf - t2;
        const double vT = c.lim.v_min + 0.5 * s2 * tau * tau;
        const double xT = x1 + c.lim.v_min * (t2 - t1) + c.lim.v_min * tau +
                          s2 * tau * tau * tau / 6.0;
        Eigen::VectorXd r(3);
        r[0] = s2 * tau - (c.av * (c.v_flow - vT) - s2 * c.lim.phi);
        r[1] = c.at + s2 * vT - 0.5 * (s2 * tau) * (s2 * tau);
        r[2] = xT - (c.xu0 + c.vu * tf - delta_of(c.lim, vT));
        return r;
      };
      auto seeds = make_seeds({{1.0, t1 + 0.5, t1 + 3.0},
                               {0.5, t1 + 2.0, t1 + 6.0},
                               {2.0, t1 + 0.1, t1 + 2.0}});
      for (const auto& root : newton_solve_multi(residual, seeds)) {
        const double s2 = root[0], t2 = root[1], tf = root[2];
        if (!(s2 > 0.0 && t2 >= t1 - 1e-9 && tf > t2 + 1e-6)) continue;
        Candidate cand;
        cand.arcs = pre;
        double x = x1, v = c.lim.v_min;
        push_arc(cand.arcs, x, v, t1, std::max(t2, t1), 0.0, 0.0);
        push_arc(cand.arcs, x, v, std::max(t2, t1), tf, 0.0, s2);
        cand.tf = tf;
        cand.xT = x;
        cand.vT = v;
        cand.label = used_umin ? CaseLabel::UminVminArcs : CaseLabel::VminArc;
        cand.terminal_equality = true;
        consider(std::move(cand));
      }
    }

    // (c) exit ramp saturating at u_max before tf.
    {
      const double hi = c.lim.u_max;
      const auto residual = [&](const Eigen::VectorXd& z) {
        const double s2 = z[0], t2 = z[1], tf = z[2];
        const double t3 = t2 + hi / s2;
        const double v3 = c.lim.v_min + 0.5 * hi * hi / s2;
        const double x3 = x1 + c.lim.v_min * (t3 - t1) + s2 * std::pow(hi / s2, 3) / 6.0;
        const double tau = tf - t3;
        const double vT = v3 + hi * tau;
        const double xT = x3 + v3 * tau + 0.5 * hi * tau * tau;
        Eigen::VectorXd r(3);
        r[0] = s2 * (tf - t2) - (c.av * (c.v_flow - vT) - s2 * c.lim.phi);
        r[1] = 0.5 * hi * hi + c.at + s2 * vT - s2 * (tf - t2) * hi;
        r[2] = xT - (c.xu0 + c.vu * tf - delta_of(c.lim, vT));
        return r;
      };
      auto seeds = make_seeds({{1.0, t1 + 0.5, t1 + 5.0}, {2.5, t1 + 0.2, t1 + 3.0}});
      for (const auto& root : newton_solve_multi(residual, seeds)) {
        const double s2 = root[0], t2 = root[1], tf = root[2];
        if (!(s2 > 0.0 && t2 >= t1 - 1e-9)) continue;
        const double t3 = t2 + hi / s2;
        if (!(t3 < tf - 1e-6)) continue;
        Candidate cand;
        cand.arcs = pre;
        double x = x1, v = c.lim.v_min;
        push_arc(cand.arcs, x, v, t1, std::max(t2, t1), 0.0, 0.0);
        push_arc(cand.arcs, x, v, std::max(t2, t1), t3, 0.0, s2);
        push_arc(cand.arcs, x, v, t3, tf, hi, 0.0);
        cand.tf = tf;
        cand.xT = x;
        cand.vT = v;
        cand.label = used_umin ? CaseLabel::UminVminUmaxArcs : CaseLabel::UmaxVminArcs;
        cand.terminal_equality = true;
        consider(std::move(cand));
      }
    }
    return best;
  };

  // Coarse scan over the entry time, then keep the best few.
  const double lo = t_min + 1e-3;
  const double hi = std::min(c.T_max - 0.05, t_min + 8.0);
  if (hi <= lo) return;
  std::optional<Candidate> best;
  double best_J = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 24; ++k) {
    const double t1 = lo + (hi - lo) * k / 23.0;
    auto cand = eval_t1(t1);
    if (!cand) continue;
    const double J = c.at * cand->tf +
                     0.5 * c.av * (cand->vT - c.v_flow) * (cand->vT - c.v_flow) +
                     cand->energy;
    if (J < best_J) {
      best_J = J;
      best = std::move(cand);
    }
  }
  if (best) add_candidate(out, *best);
}

}  // namespace

// Fallback sweep over the terminal time: each fixed-T subproblem reuses the
// tracking machinery (terminal-gap active set, clamps, rides); the free-time
// optimality condition is replaced by a scan plus golden refinement of
// J(T) = alpha_t T + J_fixed(T). Catches optima whose arc structure the
// explicit equation systems miss.
void candidates_fixed_scan(const CContext& c, std::vector<Candidate>& out,
                           bool& hit_tmax) {
  (void)hit_tmax;
  const auto solve_T = [&](double T) -> std::optional<Candidate> {
    FixedSpec s;
    s.T = T;
    s.x0 = c.x0;
    s.v0 = c.v0;
    s.w = 0.5 * c.av;
    s.v_ref = c.v_flow;
    s.lim = c.lim;
    s.pos = TerminalPos{TerminalPos::Sense::MaxX, c.xu0 + c.vu * T - c.lim.eps,
                        c.lim.phi};
    s.lead = LeadSpec{c.xu0, c.vu, c.lim.phi, c.lim.eps};
    const SolveOutcome fixed = solve_fixed_time(s, 0.0);
    if (!fixed.ok()) return std::nullopt;
    const LongitudinalSolution& sol = fixed.value();
    Candidate cand;
    cand.arcs = sol.arcs;
    cand.tf = T;
    cand.xT = sol.terminal_x;
    cand.vT = sol.terminal_v;
    cand.energy = total_energy(cand.arcs);
    cand.label = sol.case_label;
    cand.terminal_equality = sol.case_label == CaseLabel::TerminalSafetyEquality;
    return cand;
  };
  const auto J_of = [&](const Candidate& cand) {
    return c.at * cand.tf +
           0.5 * c.av * (cand.vT - c.v_flow) * (cand.vT - c.v_flow) + cand.energy;
  };
  std::optional<Candidate> best;
  double best_T = 0.0;
  const double lo = 0.1, hi = c.T_max;
  for (int k = 0; k < 36; ++k) {
    const double T = lo + (hi - lo) * k / 35.0;
    auto cand = solve_T(T);
    if (cand && (!best || J_of(*cand) < J_of(*best))) {
      best = cand;
      best_T = T;
    }
  }
  if (!best) return;
  const double span = (hi - lo) / 35.0;
  double a = std::max(lo, best_T - span), b = std::min(hi, best_T + span);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  const auto score = [&](double T) {
    auto cand = solve_T(T);
    if (cand && J_of(*cand) < J_of(*best)) best = cand;
    return cand ? J_of(*cand) : 1e30;
  };
  double cc = b - gr * (b - a), dd = a + gr * (b - a);
  double fc = score(cc), fd = score(dd);
  for (int it = 0; it < 30 && (b - a) > 1e-4; ++it) {
    if (fc < fd) {
      b = dd;
      dd = cc;
      fd = fc;
      cc = b - gr * (b - a);
      fc = score(cc);
    } else {
      a = cc;
      cc = dd;
      fc = fd;
      dd = a + gr * (b - a);
      fd = score(dd);
    }
  }
  add_candidate(out, *best);
}

SolveOutcome solve_cav_c(const CavCProblem& problem, const CWeights& weights) {
  weights.validate();
  problem.limits.validate();
  if (problem.vU >= problem.v_flow) {
    return {std::nullopt, InfeasibleReason::Precondition};
  }
  const double gap0 = problem.xU0 - problem.xC0;
  if (gap0 < safety_distance(problem.limits, problem.vC0) - kTol) {
    return {std::nullopt, InfeasibleReason::EntrySafety};
  }

  CContext c{problem.xC0, problem.vC0, problem.xU0, problem.vU,
             problem.v_flow, problem.T_max, weights.alpha_t(), weights.alpha_v(),
             problem.limits};

  std::vector<Candidate> candidates;
  bool hit_tmax = false;
  candidates_constant(c, candidates, hit_tmax);
  candidates_boundary_pinned(c, candidates, hit_tmax);
  candidate_zero(c, candidates);
  candidates_equality_affine(c, candidates, hit_tmax);
  candidates_equality_umax(c, candidates, hit_tmax);
  candidates_equality_umin(c, candidates, hit_tmax);
  candidates_equality_umin_umax(c, candidates, hit_tmax);
  candidates_vmin(c, candidates, hit_tmax);
  candidates_fixed_scan(c, candidates, hit_tmax);

  const Candidate* best = nullptr;
  double best_J = std::numeric_limits<double>::infinity();
  for (const Candidate& cand : candidates) {
    if (!bounds_ok(cand.arcs, problem.limits)) continue;
    if (!gap_ok(cand.arcs, problem.xU0, problem.vU, problem.limits.phi,
                problem.limits.eps)) {
      continue;
    }
    const double J = c.at * cand.tf +
                     0.5 * c.av * (cand.vT - c.v_flow) * (cand.vT - c.v_flow) +
                     cand.energy;
    if (J < best_J) {
      best_J = J;
      best = &cand;
    }
  }
  if (!best) {
    return {std::nullopt,
            hit_tmax ? InfeasibleReason::Time : InfeasibleReason::NoRoot};
  }
  SolveOutcome outcome;
  outcome.solution = finalize(*best, problem.t0, best_J);
  return outcome;
}

SolveOutcome solve_cav_c_relaxed(const CavCProblem& problem, double tf_fixed,
                                 const TrackingWeights& weights) {
  weights.validate();
  problem.limits.validate();
  if (tf_fixed <= problem.t0) {
    throw std::invalid_argument("solve_cav_c_relaxed: tf_fixed must exceed t0");
  }
  const double gap0 = problem.xU0 - problem.xC0;
  if (gap0 < safety_distance(problem.limits, problem.vC0) - kTol) {
    return {std::nullopt, InfeasibleReason::EntrySafety};
  }
  FixedSpec s;
  s.T = tf_fixed - problem.t0;
  s.x0 = problem.xC0;
  s.v0 = problem.vC0;
  s.w = weights.beta(problem.limits);
  s.v_ref = problem.v_flow;
  s.lim = problem.limits;
  s.pos = TerminalPos{TerminalPos::Sense::MaxX,
                      problem.xU0 + problem.vU * s.T - problem.limits.eps,
                      problem.limits.phi};
  s.lead = LeadSpec{problem.xU0 - problem.vU * problem.t0 + problem.vU * problem.t0,
                    problem.vU, problem.limits.phi, problem.limits.eps};
  s.lead->x0 = problem.xU0;  // leader position at t0 (normalized time zero)
  return solve_fixed_time(s, problem.t0);
}

SolveOutcome solve_tracking_i(const FixedTimeProblem& problem,
                              const std::optional<LeaderRef>& leader, double xC_tf,
                              double vC_tf, const VehicleLimits& limits_C,
                              const TrackingWeights& weights) {
  weights.validate();
  problem.limits.validate();
  if (problem.tf < problem.t0) {
    throw std::invalid_argument("solve_tracking_i: tf must be >= t0");
  }
  FixedSpec s;
  s.T = problem.tf - problem.t0;
  s.x0 = problem.x0;
  s.v0 = problem.v0;
  s.w = weights.beta(problem.limits);
  s.v_ref = problem.v_flow;
  s.lim = problem.limits;
  s.pos = TerminalPos{TerminalPos::Sense::MinX,
                      xC_tf + safety_distance(limits_C, vC_tf), 0.0};
  if (leader) {
    s.lead = LeadSpec{leader->x0, leader->v, problem.limits.phi, problem.limits.eps};
  }
  return solve_fixed_time(s, problem.t0);
}

SolveOutcome solve_tracking_i1(const FixedTimeProblem& problem, double xC_tf,
                               double vC_tf, const TrackingWeights& weights) {
  (void)vC_tf;
  weights.validate();
  problem.limits.validate();
  if (problem.tf < problem.t0) {
    throw std::invalid_argument("solve_tracking_i1: tf must be >= t0");
  }
  FixedSpec s;
  s.T = problem.tf - problem.t0;
  s.x0 = problem.x0;
  s.v0 = problem.v0;
  s.w = weights.beta(problem.limits);
  s.v_ref = problem.v_flow;
  s.lim = problem.limits;
  // x(T) <= xC(tf) - (phi*v(T) + eps), own headway parameters.
  s.pos = TerminalPos{TerminalPos::Sense::MaxX, xC_tf - problem.limits.eps,
                      problem.limits.phi};
  s.v_th = weights.v_th;
  return solve_fixed_time(s, problem.t0);
}

}  // namespace coop_lane
