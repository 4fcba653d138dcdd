#include <doctest.h>

#include <algorithm>
#include <random>

#include "coop_lane/flow_sets.hpp"

using namespace coop_lane;

namespace {

std::vector<VehicleState> make_fast(const std::vector<std::pair<double, double>>& xv) {
  std::vector<VehicleState> out;
  int id = 10;
  for (const auto& [x, v] : xv) out.push_back({id++, x, v, Lane::Fast});
  return out;
}

// Brute-force membership oracle: scan the moving window over a fine time grid.
std::vector<int> interval_members(const std::vector<VehicleState>& fast, double xC,
                                  double vC_min, double xU, double vU,
                                  const FlowParams& params) {
  std::vector<int> ids;
  for (const auto& s : fast) {
    bool inside = false;
    for (double t = 0.0; t <= params.T_max + 1e-12 && !inside; t += 1e-3) {
      const double x = s.x + s.v * t;
      inside = x >= xC + vC_min * t - params.L_r && x <= xU + vU * t + params.L_f;
    }
    if (inside) ids.push_back(s.id);
  }
  return ids;
}

}  // namespace

TEST_CASE("empty fast lane yields the two virtual sentinels") {
  FlowParams params;
  const auto set = build_candidate_set({}, 0.0, 10.0, 50.0, 16.0, params);
  CHECK(set.size() == 2);
  CHECK(set.virtual_front);
  CHECK(set.virtual_rear);
  CHECK(set.states.front().x == doctest::Approx(kSentinelX));
  CHECK(set.states.back().x == doctest::Approx(-kSentinelX));
  CHECK(set.real_count() == 0);
}

TEST_CASE("membership matches the interval predicate") {
  // Window construction with zero speeds makes positions projections.
  FlowParams params;
  params.L_f = 100.0;
  params.L_r = 50.0;
  params.T_max = 1.0;
  const auto fast = make_fast({{500.0, 0.0}, {300.0, 0.0}, {100.0, 0.0}});
  // x_C = 100 - v_min*T ... choose inputs so window = [50, 400].
  // lo = xC + v_min*T - L_r = 50 -> xC + v_min = 100; hi = xU + vU*T + L_f = 400.
  const auto set = build_candidate_set(fast, 90.0, 10.0, 295.0, 5.0, params);
  // Projections are {500, 300, 100}; window [50, 400] keeps 300 and 100,
  // with 500 the nearest vehicle ahead of the window.
  REQUIRE(set.size() == 4);
  CHECK(!set.virtual_front);
  CHECK(set.states[0].x == doctest::Approx(500.0));
  CHECK(set.states[1].x == doctest::Approx(300.0));
  CHECK(set.states[2].x == doctest::Approx(100.0));
  CHECK(set.virtual_rear);
}

TEST_CASE("randomized membership equals the brute-force interval oracle") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> pos(-400.0, 600.0);
  std::uniform_real_distribution<double> speed(20.0, 34.0);
  FlowParams params;  // L_f = 50, L_r = 80 defaults
  params.T_max = 12.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> xv;
    const int n = static_cast<int>(rng() % 8);
    for (int k = 0; k < n; ++k) xv.push_back({pos(rng), speed(rng)});
    const auto fast = make_fast(xv);
    const double xC = 0.0, vC_min = 10.0, xU = 60.0, vU = 16.0;
    const auto set = build_candidate_set(fast, xC, vC_min, xU, vU, params);

    auto expected = interval_members(fast, xC, vC_min, xU, vU, params);
    std::vector<int> got;
    for (int k = 0; k < set.size(); ++k) {
      if (!set.is_virtual(k) && k > 0 && k < set.size() - 1) {
        got.push_back(set.states[static_cast<size_t>(k)].id);
      }
    }
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    CHECK(got == expected);

    // Ordering invariant on snapshot positions, front to rear.
    for (int k = 0; k + 1 < set.size(); ++k) {
      CHECK(set.states[static_cast<size_t>(k)].x >
            set.states[static_cast<size_t>(k + 1)].x);
    }
  }
}

TEST_CASE("enlarging the window never removes a member") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> pos(-500.0, 700.0);
  std::uniform_real_distribution<double> speed(20.0, 34.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, double>> xv;
    for (int k = 0; k < 6; ++k) xv.push_back({pos(rng), speed(rng)});
    const auto fast = make_fast(xv);
    FlowParams small;
    small.L_f = 30.0;
    small.L_r = 40.0;
    FlowParams big = small;
    big.L_f = 90.0;
    big.L_r = 140.0;
    const auto set_small = build_candidate_set(fast, 0.0, 10.0, 60.0, 16.0, small);
    const auto set_big = build_candidate_set(fast, 0.0, 10.0, 60.0, 16.0, big);
    for (int k = 1; k + 1 < set_small.size(); ++k) {
      const int id = set_small.states[static_cast<size_t>(k)].id;
      bool found = false;
      for (int j = 1; j + 1 < set_big.size(); ++j) {
        found = found || set_big.states[static_cast<size_t>(j)].id == id;
      }
      CHECK(found);
    }
  }
}

TEST_CASE("average_speed") {
  FlowParams params;
  params.L_f = 1000.0;
  params.L_r = 1000.0;
  const auto one = build_candidate_set(make_fast({{10.0, 30.0}}), 0.0, 10.0, 50.0,
                                       16.0, params);
  CHECK(average_speed(one).value() == doctest::Approx(30.0));
  const auto three = build_candidate_set(
      make_fast({{10.0, 28.0}, {5.0, 30.0}, {0.0, 32.0}}), 0.0, 10.0, 50.0, 16.0,
      params);
  CHECK(average_speed(three).value() == doctest::Approx(30.0));
  const auto two = build_candidate_set(make_fast({{10.0, 16.0}, {5.0, 34.0}}), 0.0,
                                       10.0, 50.0, 16.0, params);
  CHECK(average_speed(two).value() == doctest::Approx(25.0));
  const auto none = build_candidate_set({}, 0.0, 10.0, 50.0, 16.0, params);
  CHECK(!average_speed(none).has_value());
}

TEST_CASE("flow_speed is the convex combination with v_max_road") {
  FlowParams params;
  params.L_f = 1000.0;
  params.L_r = 1000.0;
  params.v_max_road = 35.0;
  const auto set = build_candidate_set(
      make_fast({{10.0, 28.0}, {5.0, 30.0}, {0.0, 32.0}}), 0.0, 10.0, 50.0, 16.0,
      params);
  params.omega = 0.0;
  CHECK(flow_speed(set, params) == doctest::Approx(35.0));
  params.omega = 1.0;
  CHECK(flow_speed(set, params) == doctest::Approx(30.0));
  params.omega = 0.3;
  CHECK(flow_speed(set, params) == doctest::Approx(0.3 * 30.0 + 0.7 * 35.0));
  // Empty observation falls back to the road maximum.
  const auto none = build_candidate_set({}, 0.0, 10.0, 50.0, 16.0, params);
  CHECK(flow_speed(none, params) == doctest::Approx(35.0));
}

TEST_CASE("flow_speed stays between the average and the road maximum") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> speed(14.0, 34.0);
  std::uniform_real_distribution<double> omega(0.0, 1.0);
  FlowParams params;
  params.L_f = 1000.0;
  params.L_r = 1000.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto set = build_candidate_set(
        make_fast({{10.0, speed(rng)}, {5.0, speed(rng)}}), 0.0, 10.0, 50.0, 16.0,
        params);
    params.omega = omega(rng);
    const double f = flow_speed(set, params);
    const double avg = average_speed(set).value();
    CHECK(f >= std::min(avg, params.v_max_road) - 1e-12);
    CHECK(f <= std::max(avg, params.v_max_road) + 1e-12);
  }
}
