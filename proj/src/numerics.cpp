#include "coop_lane/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coop_lane {

NewtonResult newton_solve(const ResidualFn& residual, const Eigen::VectorXd& seed,
                          const NewtonConfig& config) {
  NewtonResult result;
  Eigen::VectorXd x = seed;
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd r = residual(x);
  for (int iter = 0; iter < config.max_iters; ++iter) {
    result.iters = iter;
    const double rn = r.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(rn)) return result;
    if (rn <= config.tol_residual) {
      result.root = x;
      result.converged = true;
      return result;
    }
    Eigen::MatrixXd J(n, n);
    for (int j = 0; j < n; ++j) {
      const double h = config.fd_step * std::max(1.0, std::abs(x[j]));
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      J.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
    }
    const Eigen::VectorXd step = J.fullPivLu().solve(-r);
    if (!step.allFinite()) return result;
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < config.max_backtracks; ++bt) {
      const Eigen::VectorXd xn = x + lambda * step;
      const Eigen::VectorXd rnv = residual(xn);
      if (rnv.allFinite() && rnv.lpNorm<Eigen::Infinity>() < rn) {
        x = xn;
        r = rnv;
        accepted = true;
        break;
      }
      lambda *= config.damping;
    }
    if (!accepted) return result;
  }
  if (r.lpNorm<Eigen::Infinity>() <= config.tol_residual) {
    result.root = x;
    result.converged = true;
  }
  return result;
}

std::vector<Eigen::VectorXd> newton_solve_multi(const ResidualFn& residual,
                                                const std::vector<Eigen::VectorXd>& seeds,
                                                const NewtonConfig& config,
                                                double root_separation) {
  std::vector<Eigen::VectorXd> roots;
  for (const auto& seed : seeds) {
    const NewtonResult r = newton_solve(residual, seed, config);
    if (!r.converged) continue;
    bool fresh = true;
    for (const auto& known : roots) {
      if ((known - r.root).lpNorm<Eigen::Infinity>() <= root_separation) {
        fresh = false;
        break;
      }
    }
    if (fresh) roots.push_back(r.root);
  }
  return roots;
}

namespace {

struct PenaltyEval {
  double merit = 0.0;      // objective + penalties
  double objective = 0.0;  // true objective (time term included)
  double max_violation = 0.0;
};

// Forward simulation plus analytic gradient of the penalized objective.
// Dynamics: x_{k+1} = x_k + v_k dt + u_k dt^2/2, v_{k+1} = v_k + u_k dt.
PenaltyEval evaluate(const OcpSpec& spec, double T, const std::vector<double>& u,
                     double rho, std::vector<double>* grad) {
  const int n = static_cast<int>(u.size());
  const double dt = T / n;
  std::vector<double> xs(static_cast<size_t>(n) + 1), vs(static_cast<size_t>(n) + 1);
  xs[0] = spec.x0;
  vs[0] = spec.v0;
  for (int k = 0; k < n; ++k) {
    xs[k + 1] = xs[k] + vs[k] * dt + 0.5 * u[k] * dt * dt;
    vs[k + 1] = vs[k] + u[k] * dt;
  }

  PenaltyEval out;
  double energy = 0.0;
  for (int k = 0; k < n; ++k) energy += 0.5 * u[k] * u[k] * dt;
  const double dvT = vs[n] - spec.v_ref;
  out.objective = spec.term_speed_weight * dvT * dvT + energy + spec.time_weight * T;

  // Per-step penalty derivatives w.r.t. x_k and v_k (k = 1..n).
  std::vector<double> px(static_cast<size_t>(n) + 1, 0.0),
      pv(static_cast<size_t>(n) + 1, 0.0);
  double penalty = 0.0;
  const auto add_viol = [&](double viol) {
    penalty += rho * viol * viol;
    out.max_violation = std::max(out.max_violation, viol);
  };
  for (int k = 1; k <= n; ++k) {
    const double t = dt * k;
    for (const RunningGap& g : spec.gaps) {
      const double slack = (g.lead_x0 + g.lead_v * t - xs[k]) - (g.phi * vs[k] + g.eps);
      if (slack < 0.0) {
        add_viol(-slack);
        px[k] += rho * 2.0 * (-slack);
        pv[k] += rho * 2.0 * (-slack) * g.phi;
      }
    }
    if (vs[k] < spec.v_min) {
      const double viol = spec.v_min - vs[k];
      add_viol(viol);
      pv[k] += rho * 2.0 * (-viol);
    }
    if (vs[k] > spec.v_max) {
      const double viol = vs[k] - spec.v_max;
      add_viol(viol);
      pv[k] += rho * 2.0 * viol;
    }
  }
  for (const TerminalAffine& c : spec.terminal) {
    const double viol = c.ax * xs[n] + c.av * vs[n] - c.rhs;
    if (viol > 0.0) {
      add_viol(viol);
      px[n] += rho * 2.0 * viol * c.ax;
      pv[n] += rho * 2.0 * viol * c.av;
    }
  }
  out.merit = out.objective + penalty;

  if (grad) {
    grad->assign(static_cast<size_t>(n), 0.0);
    // Adjoint sweep: lx_k = dMerit/dx_k, lv_k = dMerit/dv_k (totals).
    double lx = px[n];
    double lv = pv[n] + 2.0 * spec.term_speed_weight * dvT;
    for (int k = n - 1; k >= 0; --k) {
      (*grad)[k] = u[k] * dt + lx * 0.5 * dt * dt + lv * dt;
      lv = lv + lx * dt + ((k >= 1) ? pv[k] : 0.0);
      lx = lx + ((k >= 1) ? px[k] : 0.0);
    }
  }
  return out;
}

// Monotone accelerated projected gradient (FISTA with restart on stall) on
// the penalized objective for one penalty weight.
PenaltyEval minimize_penalized(const OcpSpec& spec, double T, std::vector<double>& u,
                               double rho, int iters) {
  const size_t n = u.size();
  std::vector<double> y = u, u_prev = u, grad(n), trial(n);
  double theta = 1.0;
  double step = 0.05;
  int restarts = 0;
  PenaltyEval cur = evaluate(spec, T, u, rho, nullptr);
  for (int it = 0; it < iters; ++it) {
    evaluate(spec, T, y, rho, &grad);
    bool accepted = false;
    for (int bt = 0; bt < 45 && !accepted; ++bt) {
      for (size_t k = 0; k < n; ++k) {
        trial[k] = std::clamp(y[k] - step * grad[k], spec.u_min, spec.u_max);
      }
      const PenaltyEval et = evaluate(spec, T, trial, rho, nullptr);
      if (et.merit < cur.merit - 1e-13) {
        u_prev.swap(u);
        u = trial;
        const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
        const double mom = (theta - 1.0) / theta_next;
        theta = theta_next;
        for (size_t k = 0; k < n; ++k) {
          y[k] = std::clamp(u[k] + mom * (u[k] - u_prev[k]), spec.u_min, spec.u_max);
        }
        cur = et;
        accepted = true;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) {
      const bool at_base = y == u;
      if (at_base || ++restarts > 4) break;
      theta = 1.0;
      y = u;
      step = std::max(step, 1e-6);
    }
  }
  return evaluate(spec, T, u, rho, nullptr);
}

OracleResult solve_fixed(const OcpSpec& spec, double T, const TranscriptionConfig& cfg,
                         int n_steps) {
  OracleResult result;
  result.tf = spec.t0 + T;

  // Two deterministic starts: coasting, and constant tracking control.
  std::vector<std::vector<double>> starts;
  starts.emplace_back(static_cast<size_t>(n_steps), 0.0);
  const double u_track =
      std::clamp((spec.v_ref - spec.v0) / T, spec.u_min, spec.u_max);
  starts.emplace_back(static_cast<size_t>(n_steps), u_track);

  double best_score = std::numeric_limits<double>::infinity();
  for (auto& u : starts) {
    std::vector<double> round_objectives;
    double rho = cfg.rho0;
    PenaltyEval cur{};
    while (true) {
      cur = minimize_penalized(spec, T, u, rho, cfg.inner_iters);
      round_objectives.push_back(cur.objective);
      if (cur.max_violation <= cfg.viol_tol) break;
      rho *= cfg.rho_growth;
      if (rho > cfg.rho_max) break;
    }
    const bool feasible = cur.max_violation <= 10.0 * cfg.viol_tol;
    const double score = feasible ? cur.objective : 1e15 + cur.max_violation;
    if (score < best_score) {
      best_score = score;
      result.objective = cur.objective;
      result.max_violation = cur.max_violation;
      result.feasible = feasible;
      result.u = u;
      result.round_objectives = std::move(round_objectives);
    }
  }
  return result;
}

}  // namespace

OracleResult transcription_oracle(const OcpSpec& spec, const TranscriptionConfig& cfg) {
  if (spec.fixed_tf) {
    const double T = *spec.fixed_tf - spec.t0;
    if (T <= 0.0) {
      // Degenerate horizon: objective reduces to the terminal cost at t0.
      OracleResult r;
      r.tf = spec.t0;
      const double dv = spec.v0 - spec.v_ref;
      r.objective = spec.term_speed_weight * dv * dv;
      double viol = 0.0;
      for (const TerminalAffine& c : spec.terminal) {
        viol = std::max(viol, c.ax * spec.x0 + c.av * spec.v0 - c.rhs);
      }
      r.max_violation = viol;
      r.feasible = viol <= 10.0 * cfg.viol_tol;
      return r;
    }
    return solve_fixed(spec, T, cfg, cfg.n_steps);
  }

  // Free terminal time: coarse scan, then golden-section refinement at a
  // reduced step count, then a final high-resolution solve.
  const int n_coarse = std::max(100, cfg.n_steps / 2);
  const auto score = [&](double T) {
    OracleResult r = solve_fixed(spec, T, cfg, n_coarse);
    return r.feasible ? r.objective : 1e18 + r.max_violation;
  };
  const double lo = std::max(1e-3, spec.free_lo);
  const double hi = std::max(lo + 1e-3, spec.free_hi);
  double best_T = lo, best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.coarse_points; ++k) {
    const double T = lo + (hi - lo) * k / (cfg.coarse_points - 1);
    const double val = score(T);
    if (val < best_val) {
      best_val = val;
      best_T = T;
    }
  }
  const double span = (hi - lo) / (cfg.coarse_points - 1);
  double a = std::max(lo, best_T - span), b = std::min(hi, best_T + span);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = score(c), fd = score(d);
  for (int it = 0; it < cfg.golden_iters && (b - a) > 1e-4; ++it) {
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
  const double T_star = 0.5 * (a + b);
  OracleResult result = solve_fixed(spec, T_star, cfg, cfg.n_steps);
  result.tf = spec.t0 + T_star;
  return result;
}

}  // namespace coop_lane
