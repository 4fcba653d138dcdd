#include "coop_lane/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace coop_lane {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw std::invalid_argument("config: " + where + " must be an object");
  }
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw std::invalid_argument("config: unknown key '" + item.key() + "' in " +
                                  where);
    }
  }
}

template <typename T>
void load(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void load_limits(const json& j, VehicleLimits& lim) {
  require_keys(j, "limits", {"u_min", "u_max", "v_min", "v_max", "phi", "eps"});
  load(j, "u_min", lim.u_min);
  load(j, "u_max", lim.u_max);
  load(j, "v_min", lim.v_min);
  load(j, "v_max", lim.v_max);
  load(j, "phi", lim.phi);
  load(j, "eps", lim.eps);
}

void load_planner(const json& j, PlannerConfig& cfg) {
  require_keys(j, "planner",
               {"lambda_tf", "max_relaxations", "d_start", "T_max", "weights",
                "tracking", "flow", "disruption", "aggressiveness", "eps_v",
                "allow_selfish_fallback", "parallel_pairs"});
  load(j, "lambda_tf", cfg.lambda_tf);
  load(j, "max_relaxations", cfg.max_relaxations);
  load(j, "d_start", cfg.d_start);
  load(j, "T_max", cfg.T_max);
  load(j, "eps_v", cfg.eps_v);
  load(j, "allow_selfish_fallback", cfg.allow_selfish_fallback);
  load(j, "parallel_pairs", cfg.parallel_pairs);
  if (j.contains("aggressiveness")) {
    const std::string a = j.at("aggressiveness").get<std::string>();
    if (a == "conservative") {
      cfg.aggressiveness = Aggressiveness::Conservative;
    } else if (a == "aggressive") {
      cfg.aggressiveness = Aggressiveness::Aggressive;
    } else {
      throw std::invalid_argument("config: aggressiveness must be conservative|aggressive");
    }
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    require_keys(w, "planner.weights", {"w_t", "w_v", "w_u"});
    load(w, "w_t", cfg.c_weights.w_t);
    load(w, "w_v", cfg.c_weights.w_v);
    load(w, "w_u", cfg.c_weights.w_u);
  }
  if (j.contains("tracking")) {
    const json& w = j.at("tracking");
    require_keys(w, "planner.tracking", {"alpha_v", "v_th"});
    load(w, "alpha_v", cfg.tracking.alpha_v);
    load(w, "v_th", cfg.tracking.v_th);
  }
  if (j.contains("flow")) {
    const json& f = j.at("flow");
    require_keys(f, "planner.flow",
                 {"L_f", "L_r", "omega", "v_max_road", "extreme_projection_mode"});
    load(f, "L_f", cfg.flow.L_f);
    load(f, "L_r", cfg.flow.L_r);
    load(f, "omega", cfg.flow.omega);
    load(f, "v_max_road", cfg.flow.v_max_road);
    load(f, "extreme_projection_mode", cfg.flow.extreme_projection_mode);
  }
  if (j.contains("disruption")) {
    const json& d = j.at("disruption");
    require_keys(d, "planner.disruption",
                 {"gamma", "zeta_C", "zeta_i", "zeta_i1", "D_th"});
    load(d, "gamma", cfg.disruption.gamma);
    load(d, "zeta_C", cfg.disruption.zeta_C);
    load(d, "zeta_i", cfg.disruption.zeta_i);
    load(d, "zeta_i1", cfg.disruption.zeta_i1);
    load(d, "D_th", cfg.disruption.D_th);
  }
}

void load_lateral(const json& j, LateralConfig& cfg) {
  require_keys(j, "lateral",
               {"L_w", "lane_width", "phi_max", "theta_max", "rho_L", "T_fmax_L",
                "eps_v"});
  load(j, "L_w", cfg.L_w);
  load(j, "lane_width", cfg.lane_width);
  load(j, "phi_max", cfg.phi_max);
  load(j, "theta_max", cfg.theta_max);
  load(j, "rho_L", cfg.rho_L);
  load(j, "T_fmax_L", cfg.T_fmax_L);
  load(j, "eps_v", cfg.eps_v);
}

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  require_keys(j, "scenario",
               {"segment_length", "traffic_rate_veh_h", "slow_rate_veh_h",
                "sim_duration_s", "measurement_window_s", "warmup_s", "seed", "dt",
                "v_U", "xU_start", "fast_desired_speed", "headway_mean",
                "headway_std", "headway_min", "d_start_mean", "d_start_std",
                "d_start_min", "retry_cooldown_s", "limits", "planner", "lateral"});
  load(j, "segment_length", sc.segment_length);
  load(j, "traffic_rate_veh_h", sc.traffic_rate_veh_h);
  load(j, "slow_rate_veh_h", sc.slow_rate_veh_h);
  load(j, "sim_duration_s", sc.sim_duration_s);
  load(j, "measurement_window_s", sc.measurement_window_s);
  load(j, "warmup_s", sc.warmup_s);
  load(j, "seed", sc.seed);
  load(j, "dt", sc.dt);
  load(j, "v_U", sc.v_U);
  load(j, "xU_start", sc.xU_start);
  load(j, "fast_desired_speed", sc.fast_desired_speed);
  load(j, "headway_mean", sc.headway_mean);
  load(j, "headway_std", sc.headway_std);
  load(j, "headway_min", sc.headway_min);
  load(j, "d_start_mean", sc.d_start_mean);
  load(j, "d_start_std", sc.d_start_std);
  load(j, "d_start_min", sc.d_start_min);
  load(j, "retry_cooldown_s", sc.retry_cooldown_s);
  if (j.contains("limits")) load_limits(j.at("limits"), sc.base_limits);
  if (j.contains("planner")) load_planner(j.at("planner"), sc.planner);
  if (j.contains("lateral")) load_lateral(j.at("lateral"), sc.lateral);
  // One aggressiveness knob: the planner's choice drives the lateral phase.
  sc.lateral.aggressiveness = sc.planner.aggressiveness;
  return sc;
}

json parse_text(const std::string& text) {
  return text.empty() ? json::object() : json::parse(text);
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  return scenario_from_json(parse_text(text));
}

Scenario scenario_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

PlanInput plan_input_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("snapshot: cannot open " + path);
  json j = json::parse(in);
  require_keys(j, "snapshot", {"t0", "C", "U", "fast_lane", "config"});
  PlanInput input;
  if (j.contains("config")) input.scenario = scenario_from_json(j.at("config"));
  input.problem.t0 = j.value("t0", 0.0);

  const auto load_vehicle = [&](const json& v, const std::string& where, Lane lane) {
    require_keys(v, where, {"id", "x", "v", "phi", "eps"});
    ManeuverVehicle mv;
    mv.state.id = v.value("id", 0);
    mv.state.x = v.at("x").get<double>();
    mv.state.v = v.at("v").get<double>();
    mv.state.lane = lane;
    mv.limits = input.scenario.base_limits;
    if (v.contains("phi")) mv.limits.phi = v.at("phi").get<double>();
    if (v.contains("eps")) mv.limits.eps = v.at("eps").get<double>();
    return mv;
  };

  if (!j.contains("C") || !j.contains("U")) {
    throw std::invalid_argument("snapshot: requires C and U");
  }
  input.problem.C = load_vehicle(j.at("C"), "snapshot.C", Lane::Slow);
  input.problem.U = load_vehicle(j.at("U"), "snapshot.U", Lane::Slow).state;
  if (j.contains("fast_lane")) {
    int next_id = 100;
    for (const json& v : j.at("fast_lane")) {
      ManeuverVehicle mv = load_vehicle(v, "snapshot.fast_lane[]", Lane::Fast);
      if (mv.state.id == 0) mv.state.id = next_id++;
      input.problem.fast_lane.push_back(mv);
    }
  }
  return input;
}

std::string metrics_to_json(const SimMetrics& metrics) {
  json j;
  j["throughput_veh_h"] = metrics.throughput_veh_h;
  j["completed_maneuvers"] = metrics.completed_maneuvers;
  j["aborted_maneuvers"] = metrics.aborted_maneuvers;
  j["maneuver_time_mean"] = metrics.maneuver_time_mean;
  j["maneuver_time_std"] = metrics.maneuver_time_std;
  j["travel_time_mean"] = metrics.travel_time_mean;
  j["safety_violations"] = metrics.safety_violations;
  j["disruptions"] = metrics.disruptions;
  return j.dump(2) + "\n";
}

std::string trajectory_to_csv(const std::vector<TrajectoryRow>& rows) {
  std::ostringstream out;
  out << "t,id,lane,x,v,u,phase\n";
  char buf[160];
  for (const TrajectoryRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.3f,%d,%s,%.4f,%.4f,%.4f,%s\n", r.t, r.id,
                  r.lane == Lane::Fast ? "fast" : "slow", r.x, r.v, r.u,
                  to_string(r.phase));
    out << buf;
  }
  return out.str();
}

std::string events_to_text(const std::vector<SimEvent>& events) {
  std::ostringstream out;
  char buf[64];
  for (const SimEvent& e : events) {
    std::snprintf(buf, sizeof(buf), "%.3f", e.t);
    out << buf << ',' << e.event << ',' << e.detail << '\n';
  }
  return out.str();
}

std::string solution_to_csv(const LongitudinalSolution& sol, double sample_dt) {
  std::ostringstream out;
  out << "t,x,v,u\n";
  char buf[128];
  const int n = std::max(1, static_cast<int>(std::ceil((sol.tf - sol.t0) / sample_dt)));
  for (int k = 0; k <= n; ++k) {
    const double t = std::min(sol.tf, sol.t0 + sample_dt * k);
    const auto s = sol.eval(t);
    std::snprintf(buf, sizeof(buf), "%.4f,%.6f,%.6f,%.6f\n", t, s.x, s.v, s.u);
    out << buf;
  }
  return out.str();
}

}  // namespace coop_lane
