#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace coop_lane {

struct NewtonConfig {
  double tol_residual = 1e-10;
  int max_iters = 100;
  double damping = 0.5;  // backtracking factor
  int max_backtracks = 40;
  double fd_step = 1e-6;  // central-difference Jacobian, scaled by max(1,|x|)
};

struct NewtonResult {
  Eigen::VectorXd root;
  bool converged = false;
  int iters = 0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Damped Newton with a central finite-difference Jacobian.
NewtonResult newton_solve(const ResidualFn& residual, const Eigen::VectorXd& seed,
                          const NewtonConfig& config = {});

// Runs newton_solve from every seed and returns the distinct converged roots
// (infinity-norm separation > root_separation).
std::vector<Eigen::VectorXd> newton_solve_multi(const ResidualFn& residual,
                                                const std::vector<Eigen::VectorXd>& seeds,
                                                const NewtonConfig& config = {},
                                                double root_separation = 1e-6);

// ---------------------------------------------------------------------------
// Direct-transcription oracle for the longitudinal OCPs. Deliberately simple
// (piecewise-constant control, projected gradient, quadratic penalties) so its
// correctness is auditable; it is the independent optimum every analytical
// solver is tested against.
// ---------------------------------------------------------------------------

// Running constraint lead_x0 + lead_v*(t - t0) - x(t) >= phi*v(t) + eps.
struct RunningGap {
  double lead_x0 = 0.0;
  double lead_v = 0.0;
  double phi = 0.0;
  double eps = 0.0;
};

// Terminal constraint ax*x(T) + av*v(T) <= rhs.
struct TerminalAffine {
  double ax = 0.0;
  double av = 0.0;
  double rhs = 0.0;
};

struct OcpSpec {
  double t0 = 0.0;
  double x0 = 0.0;
  double v0 = 0.0;
  double u_min = -7.0;
  double u_max = 3.3;
  double v_min = 10.0;
  double v_max = 35.0;
  double term_speed_weight = 0.0;  // w * (v(T) - v_ref)^2
  double v_ref = 0.0;
  double time_weight = 0.0;  // alpha_t * (T - t0), relevant for free-T only
  std::vector<RunningGap> gaps;
  std::vector<TerminalAffine> terminal;
  std::optional<double> fixed_tf;  // absolute; free horizon search when absent
  double free_lo = 0.05;           // search bracket (durations)
  double free_hi = 12.0;
};

struct TranscriptionConfig {
  int n_steps = 500;
  double rho0 = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e10;
  double viol_tol = 1e-4;
  int inner_iters = 700;
  int coarse_points = 16;  // free-tf outer search
  int golden_iters = 40;
};

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  double tf = 0.0;  // absolute terminal time
  double max_violation = 0.0;
  std::vector<double> u;                 // piecewise-constant control
  std::vector<double> round_objectives;  // objective after each penalty round
};

OracleResult transcription_oracle(const OcpSpec& spec,
                                  const TranscriptionConfig& config = {});

}  // namespace coop_lane
