// Times the candidate-pair evaluation loop in its serial and OpenMP-parallel
// forms on synthetic dense snapshots, plus a batch of oracle solves.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "coop_lane/numerics.hpp"
#include "coop_lane/planner.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace coop_lane;
using Clock = std::chrono::steady_clock;

namespace {

ManeuverProblem dense_snapshot(int n_fast, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-8.0, 8.0);
  std::uniform_real_distribution<double> speed(29.0, 34.0);
  ManeuverProblem p;
  p.t0 = 0.0;
  p.C = ManeuverVehicle{VehicleState{0, 0.0, 20.0, Lane::Slow}, VehicleLimits{}};
  p.U = VehicleState{1, 60.0, 16.0, Lane::Slow};
  for (int k = 0; k < n_fast; ++k) {
    const double x = -350.0 + 40.0 * k + jitter(rng);
    p.fast_lane.push_back(
        ManeuverVehicle{VehicleState{100 + k, x, speed(rng), Lane::Fast}, VehicleLimits{}});
  }
  return p;
}

double time_plan(const ManeuverProblem& p, PlannerConfig cfg, bool parallel) {
  cfg.parallel_pairs = parallel;
  const auto start = Clock::now();
  const ManeuverPlan plan = plan_maneuver(p, cfg);
  const auto stop = Clock::now();
  std::printf("  status=%s pairs=%zu D=%.4f\n", to_string(plan.status),
              plan.pair_table.size(), plan.D_value);
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

double time_oracle_batch(int n, bool parallel) {
  std::vector<OcpSpec> specs(static_cast<size_t>(n));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> v0(18.0, 28.0);
  for (auto& spec : specs) {
    spec.v0 = v0(rng);
    spec.term_speed_weight = 49.0;
    spec.v_ref = 31.0;
    spec.fixed_tf = 5.0;
    spec.terminal.push_back(TerminalAffine{1.0, 0.6, spec.v0 * 5.0 + 30.0});
  }
  std::vector<double> objectives(specs.size());
  const auto start = Clock::now();
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < n; ++k) {
      objectives[static_cast<size_t>(k)] =
          transcription_oracle(specs[static_cast<size_t>(k)]).objective;
    }
  } else {
    for (int k = 0; k < n; ++k) {
      objectives[static_cast<size_t>(k)] =
          transcription_oracle(specs[static_cast<size_t>(k)]).objective;
    }
  }
  const auto stop = Clock::now();
  double sum = 0.0;
  for (double o : objectives) sum += o;
  std::printf("  sum=%.4f\n", sum);
  return std::chrono::duration<double, std::milli>(stop - start).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled\n");
#endif

  PlannerConfig cfg;
  cfg.disruption.D_th = 1e9;  // evaluate every pair fully
  for (int n_fast : {40, 120}) {
    const ManeuverProblem p = dense_snapshot(n_fast, 3);
    std::printf("plan_maneuver, %d fast-lane vehicles\n", n_fast);
    const double serial_ms = time_plan(p, cfg, false);
    const double parallel_ms = time_plan(p, cfg, true);
    std::printf("  serial   %8.2f ms\n", serial_ms);
    std::printf("  parallel %8.2f ms  (speedup %.2fx)\n", parallel_ms,
                serial_ms / parallel_ms);
  }

  std::printf("oracle batch, 24 fixed-time instances\n");
  const double serial_ms = time_oracle_batch(24, false);
  const double parallel_ms = time_oracle_batch(24, true);
  std::printf("  serial   %8.2f ms\n", serial_ms);
  std::printf("  parallel %8.2f ms  (speedup %.2fx)\n", parallel_ms,
              serial_ms / parallel_ms);
  return 0;
}
