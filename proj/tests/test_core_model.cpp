#include <doctest.h>

#include <cmath>
#include <random>

#include "coop_lane/core.hpp"

using namespace coop_lane;

namespace {

LongitudinalSolution single_arc(double t0, double tf, double x0, double v0, double u0,
                                double jerk) {
  LongitudinalSolution sol;
  sol.t0 = t0;
  sol.tf = tf;
  Arc a;
  a.kind = std::abs(jerk) > 0 ? ArcKind::PolynomialControl : ArcKind::ConstantControl;
  a.t_start = t0;
  a.t_end = tf;
  a.x0 = x0;
  a.v0 = v0;
  a.u0 = u0;
  a.jerk = jerk;
  sol.arcs.push_back(a);
  sol.terminal_x = a.x_at(tf);
  sol.terminal_v = a.v_at(tf);
  return sol;
}

}  // namespace

TEST_CASE("safety_distance evaluates phi*v + eps") {
  VehicleLimits lim;
  lim.phi = 1.8;
  lim.eps = 1.5;
  CHECK(safety_distance(lim, 0.0) == doctest::Approx(1.5));
  CHECK(safety_distance(lim, 10.0) == doctest::Approx(19.5));
  lim.phi = 0.6;
  CHECK(safety_distance(lim, 30.0) == doctest::Approx(19.5));
  CHECK_THROWS_AS(safety_distance(lim, -1.0), std::domain_error);
}

TEST_CASE("safety_distance is affine in v") {
  VehicleLimits lim;
  lim.phi = 0.73;
  lim.eps = 2.1;
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> speed(0.0, 35.0);
  std::uniform_real_distribution<double> mix(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double v1 = speed(rng), v2 = speed(rng), a = mix(rng);
    const double lhs = safety_distance(lim, a * v1 + (1 - a) * v2);
    const double rhs = a * safety_distance(lim, v1) + (1 - a) * safety_distance(lim, v2);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("eval_trajectory on a constant-control arc") {
  const auto sol = single_arc(0.0, 2.0, 0.0, 10.0, 2.0, 0.0);
  const auto s = eval_trajectory(sol, 1.0);
  CHECK(s.x == doctest::Approx(11.0));
  CHECK(s.v == doctest::Approx(12.0));
  CHECK(s.u == doctest::Approx(2.0));
  const auto s0 = eval_trajectory(sol, 0.0);
  CHECK(s0.x == doctest::Approx(0.0));
  CHECK(s0.v == doctest::Approx(10.0));
  CHECK_THROWS_AS(eval_trajectory(sol, 2.5), std::out_of_range);
  CHECK_THROWS_AS(eval_trajectory(sol, -0.5), std::out_of_range);
}

TEST_CASE("eval_trajectory on a cubic-position arc matches hand evaluation") {
  // u = 0.6 t - 1, v = 0.3 t^2 - t + 10, x = 0.1 t^3 - 0.5 t^2 + 10 t.
  const auto sol = single_arc(0.0, 3.0, 0.0, 10.0, -1.0, 0.6);
  const auto s = eval_trajectory(sol, 2.0);
  CHECK(s.x == doctest::Approx(18.8).epsilon(1e-12));
  CHECK(s.v == doctest::Approx(9.2).epsilon(1e-12));
  CHECK(s.u == doctest::Approx(0.2).epsilon(1e-12));

  // Cross-check by integrating u(t) numerically.
  const int n = 20000;
  double x = 0.0, v = 10.0;
  const double dt = 2.0 / n;
  for (int k = 0; k < n; ++k) {
    const double u = 0.6 * (k + 0.5) * dt - 1.0;
    x += v * dt + 0.5 * u * dt * dt;
    v += u * dt;
  }
  CHECK(x == doctest::Approx(18.8).epsilon(1e-6));
  CHECK(v == doctest::Approx(9.2).epsilon(1e-6));
}

TEST_CASE("eval_trajectory picks the later arc at a boundary") {
  LongitudinalSolution sol;
  sol.t0 = 0.0;
  sol.tf = 2.0;
  Arc a1;
  a1.t_start = 0.0;
  a1.t_end = 1.0;
  a1.x0 = 0.0;
  a1.v0 = 10.0;
  a1.u0 = 1.0;
  Arc a2;
  a2.t_start = 1.0;
  a2.t_end = 2.0;
  a2.x0 = a1.x_at(1.0);
  a2.v0 = a1.v_at(1.0);
  a2.u0 = -2.0;
  sol.arcs = {a1, a2};
  CHECK(sol.eval(1.0).u == doctest::Approx(-2.0));
}

TEST_CASE("eval_trajectory is Lipschitz in t") {
  const auto sol = single_arc(0.0, 5.0, 0.0, 20.0, -1.0, 0.5);
  const double v_max = 35.0;
  for (double t = 0.0; t < 4.99; t += 0.037) {
    const double h = 0.009;
    const double dx = std::abs(sol.eval(t + h).x - sol.eval(t).x);
    CHECK(dx <= (v_max + 1.0) * h);
  }
}

TEST_CASE("check_safety_constraints: parked vehicles far apart are clean") {
  VehicleLimits lim;
  lim.phi = 1.8;
  lim.eps = 1.5;
  const auto traj_i = LongitudinalSolution::constant_speed(0.0, 5.0, 300.0, 0.0);
  const auto traj_C = LongitudinalSolution::constant_speed(0.0, 5.0, 100.0, 0.0);
  const auto traj_U = LongitudinalSolution::constant_speed(0.0, 5.0, 200.0, 0.0);
  const auto traj_i1 = LongitudinalSolution::constant_speed(0.0, 5.0, 0.0, 0.0);
  const auto report = check_safety_constraints(traj_C, traj_U, traj_i, traj_i1, lim, lim);
  CHECK(report.clean());
}

TEST_CASE("check_safety_constraints reports the first gap violation") {
  VehicleLimits lim;
  lim.phi = 1.8;
  lim.eps = 1.5;
  // x_U - x_C = 10 with v_C = 10: delta = 19.5, violated by 9.5 from t0 on.
  const auto traj_C = LongitudinalSolution::constant_speed(0.0, 3.0, 0.0, 10.0);
  const auto traj_U = LongitudinalSolution::constant_speed(0.0, 3.0, 10.0, 10.0);
  const auto traj_i = LongitudinalSolution::constant_speed(0.0, 3.0, 500.0, 10.0);
  const auto traj_i1 = LongitudinalSolution::constant_speed(0.0, 3.0, -500.0, 10.0);
  const auto report = check_safety_constraints(traj_C, traj_U, traj_i, traj_i1, lim, lim);
  REQUIRE(!report.clean());
  CHECK(report.first->which == SafetyConstraint::GapCU);
  CHECK(report.first->t == doctest::Approx(0.0));
  CHECK(report.first->deficit == doctest::Approx(9.5));
}

TEST_CASE("check_safety_constraints rejects mismatched horizons") {
  VehicleLimits lim;
  const auto a = LongitudinalSolution::constant_speed(0.0, 3.0, 0.0, 10.0);
  const auto b = LongitudinalSolution::constant_speed(0.0, 4.0, 100.0, 10.0);
  CHECK_THROWS_AS(check_safety_constraints(a, b, a, a, lim, lim),
                  std::invalid_argument);
}

TEST_CASE("VehicleLimits validation") {
  VehicleLimits lim;
  CHECK_NOTHROW(lim.validate());
  lim.u_min = 1.0;
  CHECK_THROWS_AS(lim.validate(), std::invalid_argument);
  lim = VehicleLimits{};
  lim.v_min = -2.0;
  CHECK_THROWS_AS(lim.validate(), std::invalid_argument);
  lim = VehicleLimits{};
  lim.eps = 0.0;
  CHECK_THROWS_AS(lim.validate(), std::invalid_argument);
}
