// Command-line front end: single-maneuver solves, snapshot planning, full
// scenario simulation and parameter sweeps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "coop_lane/config_io.hpp"
#include "coop_lane/numerics.hpp"
#include "coop_lane/ocp_longitudinal.hpp"
#include "coop_lane/planner.hpp"
#include "coop_lane/sim_harness.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace coop_lane;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitAborted = 3;
constexpr int kExitViolations = 4;
constexpr int kExitUsage = 64;
constexpr int kExitParse = 65;

bool log_enabled() {
  const char* level = std::getenv("COOP_LANE_LOG");
  return level != nullptr && std::string(level) != "off" && std::string(level) != "";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[coop_lane] " << msg << "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

struct SolveCArgs {
  double gap = 50.0, v_c = 23.0, v_u = 16.0, v_flow = 30.0;
  double w_t = 0.55, w_v = 0.50, w_u = 0.02;
  double phi = 0.6, eps = 1.5;
  double u_min = -7.0, u_max = 3.3, v_min = 10.0, v_max = 35.0;
  double t_max = 12.0;
  bool oracle = false;
  std::string out;
};

int cmd_solve_c(const SolveCArgs& args) {
  CavCProblem problem;
  problem.t0 = 0.0;
  problem.xC0 = 0.0;
  problem.vC0 = args.v_c;
  problem.xU0 = args.gap;
  problem.vU = args.v_u;
  problem.v_flow = args.v_flow;
  problem.T_max = args.t_max;
  problem.limits = VehicleLimits{args.u_min, args.u_max, args.v_min,
                                 args.v_max, args.phi,  args.eps};
  const CWeights weights{args.w_t, args.w_v, args.w_u};
  const SolveOutcome outcome = solve_cav_c(problem, weights);
  if (!outcome.ok()) {
    std::printf("infeasible reason=%s\n", to_string(outcome.reason));
    return kExitInfeasible;
  }
  const LongitudinalSolution& sol = outcome.value();
  std::printf("tf %.4f s\n", sol.tf - sol.t0);
  std::printf("terminal_v %.4f m/s\n", sol.terminal_v);
  std::printf("terminal_x %.4f m\n", sol.terminal_x);
  std::printf("case %s\n", to_string(sol.case_label));
  std::printf("objective %.6f\n", sol.objective_value);
  if (args.oracle) {
    OcpSpec spec;
    spec.v0 = args.v_c;
    spec.u_min = args.u_min;
    spec.u_max = args.u_max;
    spec.v_min = args.v_min;
    spec.v_max = args.v_max;
    spec.term_speed_weight = 0.5 * weights.alpha_v();
    spec.v_ref = args.v_flow;
    spec.time_weight = weights.alpha_t();
    spec.gaps.push_back(RunningGap{args.gap, args.v_u, args.phi, args.eps});
    spec.free_hi = args.t_max;
    const OracleResult oracle = transcription_oracle(spec);
    const double gap_rel =
        std::abs(sol.objective_value - oracle.objective) /
        std::max(1e-9, oracle.objective);
    std::printf("oracle_objective %.6f\n", oracle.objective);
    std::printf("oracle_tf %.4f\n", oracle.tf);
    std::printf("oracle_gap %.4f%%\n", 100.0 * gap_rel);
  }
  const std::string csv = solution_to_csv(sol);
  if (args.out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_file(args.out, csv);
  }
  return kExitOk;
}

int cmd_plan(const std::string& snapshot_path, const std::string& out_dir) {
  PlanInput input;
  try {
    input = plan_input_from_json_file(snapshot_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  }
  const ManeuverPlan plan = plan_maneuver(input.problem, input.scenario.planner);

  std::string table = "front_index,front_id,rear_id,feasible,reason,tf,relaxations,D,D_C,D_i,D_i1\n";
  for (const PairEvaluation& e : plan.pair_table) {
    const auto id_of = [&](int index) {
      return plan.set.is_virtual(index)
                 ? std::string("virtual")
                 : std::to_string(plan.set.states[static_cast<size_t>(index)].id);
    };
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%d,%s,%.4f,%d,%.6f,%.6f,%.6f,%.6f\n",
                  e.front_index, id_of(e.front_index).c_str(),
                  id_of(e.front_index + 1).c_str(), e.feasible ? 1 : 0,
                  to_string(e.reason), e.tf_used, e.relaxations_used, e.D, e.D_C,
                  e.D_i, e.D_i1);
    table += buf;
  }
  std::printf("status %s\n", to_string(plan.status));
  std::printf("v_flow %.4f\n", plan.v_flow);
  if (plan.status != PlanStatus::Aborted) {
    std::printf("pair_front_index %d\n", plan.pair_front);
    std::printf("tf %.4f\n", plan.tf_final - input.problem.t0);
    std::printf("relaxations %d\n", plan.relaxations_used);
    std::printf("D %.6f\n", plan.D_value);
    std::printf("t0L %.4f\n", plan.t0L - input.problem.t0);
  } else {
    std::printf("abort_reason %s\n", to_string(plan.abort_reason));
  }
  std::fputs(table.c_str(), stdout);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/pairs.csv", table);
    if (plan.traj_C) write_file(out_dir + "/traj_C.csv", solution_to_csv(*plan.traj_C));
    if (plan.traj_i) write_file(out_dir + "/traj_i.csv", solution_to_csv(*plan.traj_i));
    if (plan.traj_i1) write_file(out_dir + "/traj_i1.csv", solution_to_csv(*plan.traj_i1));
  }
  return plan.status == PlanStatus::Aborted ? kExitAborted : kExitOk;
}

int run_one_scenario(Scenario scenario, const std::string& out_dir) {
  const SimResult result = run_scenario(scenario, true);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/metrics.json", metrics_to_json(result.metrics));
    write_file(out_dir + "/trajectories.csv", trajectory_to_csv(result.trajectory));
    write_file(out_dir + "/events.log", events_to_text(result.events));
  }
  std::fputs(metrics_to_json(result.metrics).c_str(), stdout);
  return result.metrics.safety_violations == 0 ? kExitOk : kExitViolations;
}

int cmd_simulate(const std::string& config_path, long seed, const std::string& out_dir) {
  Scenario scenario;
  try {
    scenario = config_path.empty() ? Scenario{} : scenario_from_json_file(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  }
  if (seed >= 0) scenario.seed = static_cast<std::uint64_t>(seed);
  log_line("simulate seed=" + std::to_string(scenario.seed));
  return run_one_scenario(scenario, out_dir);
}

int cmd_sweep(const std::string& grid_path, const std::string& out_dir) {
  nlohmann::json grid;
  try {
    std::ifstream in(grid_path);
    if (!in) throw std::runtime_error("cannot open " + grid_path);
    grid = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  }

  struct Point {
    std::string name;
    nlohmann::json config;
  };
  std::vector<Point> points;
  std::vector<long> seeds;
  try {
    const nlohmann::json base =
        grid.contains("config") ? grid.at("config") : nlohmann::json::object();
    if (grid.contains("seeds")) {
      for (const auto& s : grid.at("seeds")) seeds.push_back(s.get<long>());
    } else {
      seeds.push_back(1);
    }
    const auto pointer_of = [](std::string dotted) {
      std::string p = "/";
      for (char& c : dotted) {
        if (c == '.') c = '/';
      }
      return nlohmann::json::json_pointer(p + dotted);
    };
    if (grid.contains("parameter")) {
      const std::string param = grid.at("parameter").get<std::string>();
      for (const auto& value : grid.at("values")) {
        nlohmann::json cfg = base;
        cfg[pointer_of(param)] = value;
        points.push_back({param + "=" + value.dump(), cfg});
      }
    } else if (grid.contains("points")) {
      for (const auto& p : grid.at("points")) {
        nlohmann::json cfg = base;
        for (const auto& item : p.at("overrides").items()) {
          cfg[pointer_of(item.key())] = item.value();
        }
        points.push_back({p.value("name", cfg.dump()), cfg});
      }
    } else {
      points.push_back({"base", base});
    }
    // Validate configs up front so bad grids fail before the runs start.
    for (const Point& p : points) (void)scenario_from_json_text(p.config.dump());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  }

  struct Row {
    std::string name;
    long seed;
    SimMetrics metrics;
  };
  const int total = static_cast<int>(points.size() * seeds.size());
  std::vector<Row> rows(static_cast<size_t>(total));
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < total; ++k) {
    const Point& p = points[static_cast<size_t>(k) / seeds.size()];
    const long seed = seeds[static_cast<size_t>(k) % seeds.size()];
    Scenario sc = scenario_from_json_text(p.config.dump());
    sc.seed = static_cast<std::uint64_t>(seed);
    const SimResult r = run_scenario(sc, false);
    rows[static_cast<size_t>(k)] = {p.name, seed, r.metrics};
  }

  std::string csv =
      "point,seed,throughput_veh_h,completed_maneuvers,aborted_maneuvers,"
      "maneuver_time_mean,maneuver_time_std,travel_time_mean,safety_violations\n";
  bool any_violation = false;
  for (const Row& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%ld,%.2f,%d,%d,%.4f,%.4f,%.4f,%d\n",
                  r.name.c_str(), r.seed, r.metrics.throughput_veh_h,
                  r.metrics.completed_maneuvers, r.metrics.aborted_maneuvers,
                  r.metrics.maneuver_time_mean, r.metrics.maneuver_time_std,
                  r.metrics.travel_time_mean, r.metrics.safety_violations);
    csv += buf;
    any_violation = any_violation || r.metrics.safety_violations > 0;
  }
  std::fputs(csv.c_str(), stdout);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/sweep.csv", csv);
  }
  return any_violation ? kExitViolations : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cooperative lane-change maneuver planner and simulator"};
  app.require_subcommand(1);

  SolveCArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve-c", "solve the maneuver OCP for one CAV");
  solve->add_option("--gap", solve_args.gap, "initial gap to U [m]");
  solve->add_option("--v-c", solve_args.v_c, "initial speed of C [m/s]");
  solve->add_option("--v-u", solve_args.v_u, "speed of U [m/s]");
  solve->add_option("--v-flow", solve_args.v_flow, "target flow speed [m/s]");
  solve->add_option("--w-t", solve_args.w_t);
  solve->add_option("--w-v", solve_args.w_v);
  solve->add_option("--w-u", solve_args.w_u);
  solve->add_option("--phi", solve_args.phi, "headway [s]");
  solve->add_option("--eps", solve_args.eps, "standstill gap [m]");
  solve->add_option("--u-min", solve_args.u_min);
  solve->add_option("--u-max", solve_args.u_max);
  solve->add_option("--v-min", solve_args.v_min);
  solve->add_option("--v-max", solve_args.v_max);
  solve->add_option("--t-max", solve_args.t_max);
  solve->add_flag("--oracle", solve_args.oracle, "cross-check against the numeric oracle");
  solve->add_option("--out", solve_args.out, "trajectory CSV path");

  std::string snapshot_path, out_dir, config_path, grid_path;
  long seed = -1;
  CLI::App* plan = app.add_subcommand("plan", "plan one maneuver from a snapshot file");
  plan->add_option("--snapshot", snapshot_path, "snapshot JSON")->required();
  plan->add_option("--out", out_dir, "output directory");

  CLI::App* simulate = app.add_subcommand("simulate", "run a scenario");
  simulate->add_option("--config", config_path, "scenario JSON");
  simulate->add_option("--seed", seed, "seed override");
  simulate->add_option("--out", out_dir, "output directory");

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
  sweep->add_option("--grid", grid_path, "grid JSON")->required();
  sweep->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (solve->parsed()) return cmd_solve_c(solve_args);
    if (plan->parsed()) return cmd_plan(snapshot_path, out_dir);
    if (simulate->parsed()) return cmd_simulate(config_path, seed, out_dir);
    if (sweep->parsed()) return cmd_sweep(grid_path, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
