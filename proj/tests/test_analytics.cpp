#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "flm/allocator.hpp"
#include "flm/analytics.hpp"
#include "support.hpp"

using namespace flm;

namespace {

RunTables one_station(int vehicles) {
  RunTables t;
  t.station_ids = {1};
  t.allocation = {vehicles};
  return t;
}

RequestRow served(int id, double km, Minutes time = 480.0) {
  return {id, RequestKind::LastMile, 1, time, Outcome::Served, 1.0, km};
}

std::vector<int> proportional(const Scenario& sc) {
  std::vector<double> demand;
  for (std::size_t s = 0; s < sc.station_count(); ++s) demand.push_back(sc.expected_flm_demand(s));
  return baseline_proportional(demand, sc.params().total_fleet, sc.params().per_station_max,
                               sc.params().per_station_min);
}

}  // namespace

TEST_CASE("fares and costs") {
  const FareParams f;
  CHECK(distance_fare(1.5, f) == 30.0);
  CHECK(distance_fare(2.0, f) == 30.0);
  CHECK(distance_fare(5.0, f) == 75.0);
  CHECK(operating_cost(50.0, f) == 302.0);
  CHECK(operating_cost(0.0, f) == 102.0);
}

TEST_CASE("trip pricing") {
  const FareParams f;
  SUBCASE("ten served requests at the flat fare") {
    auto t = one_station(1);
    for (int i = 0; i < 10; ++i) t.requests.push_back(served(i, 3.0));
    t.legs.push_back({0, 300.0, 1560.0, VehicleState::AtMetroStation, 0.0, 1});
    const auto p = profit_trip(t, f);
    CHECK(p[0].revenue == 300.0);
    CHECK(p[0].cost == 102.0);
    CHECK(p[0].per_vehicle == 198.0);
  }
  SUBCASE("nothing served leaves the fixed cost") {
    auto t = one_station(1);
    t.legs.push_back({0, 300.0, 1560.0, VehicleState::AtMetroStation, 0.0, 1});
    const auto p = profit_trip(t, f);
    CHECK(p[0].profit == -102.0);
    CHECK_FALSE(break_even_flat_fare(t, f).has_value());
  }
  SUBCASE("stations without vehicles have no per-vehicle figure") {
    const auto t = one_station(0);
    CHECK_FALSE(profit_distance(t, f)[0].per_vehicle.has_value());
  }
}

TEST_CASE("distance pricing dominates a matching flat fare") {
  const FareParams f;
  auto t = one_station(2);
  for (int i = 0; i < 8; ++i) t.requests.push_back(served(i, 2.0 + 0.5 * i));
  t.legs.push_back({0, 300.0, 400.0, VehicleState::MovingToDestination, 12.0, 1});
  t.legs.push_back({1, 300.0, 400.0, VehicleState::MovingToDestination, 7.5, 1});
  const auto d = profit_distance(t, f);
  const auto r = profit_trip(t, f);
  CHECK(d[0].profit >= r[0].profit);
  CHECK(d[0].cost == doctest::Approx(19.5 * 4.0 + 2 * 102.0));

  const auto fare = break_even_flat_fare(t, f);
  REQUIRE(fare.has_value());
  // Revenues match at the break-even fare: 8 * fare == sum of distance fares.
  double rev = 0.0;
  for (int i = 0; i < 8; ++i) rev += distance_fare(2.0 + 0.5 * i, f);
  CHECK(*fare == doctest::Approx(rev / 8.0).epsilon(1e-4));
  CHECK(*fare >= f.flat_fare);
}

TEST_CASE("lost demand matrix") {
  auto t = one_station(1);
  for (int i = 0; i < 10; ++i) {
    RequestRow r = served(i, 1.0, 8 * 60.0 + i);
    if (i < 2) {
      r.outcome = Outcome::Lost;
      r.wait = 7.0;
    }
    t.requests.push_back(r);
  }
  t.requests.push_back(served(10, 1.0, 9 * 60.0));
  const auto m = lost_demand_matrix(t);
  CHECK(m.generated[0][8] == 10);
  CHECK(m.lost[0][8] == 2);
  CHECK(LostMatrix::pct(m.lost[0][8], m.generated[0][8]) == 20.0);
  CHECK(m.station_generated[0] == 11);
  CHECK(m.station_lost[0] == 2);
  CHECK(m.hour_generated[9] == 1);
  CHECK(m.hour_lost[9] == 0);
  CHECK(LostMatrix::pct(0, 0) == 0.0);
}

TEST_CASE("utilization and parking") {
  auto t = one_station(2);
  t.legs = {{0, 300.0, 400.0, VehicleState::AtMetroStation, 0.0, 1},
            {0, 400.0, 500.0, VehicleState::MovingToDestination, 5.0, 1},
            {0, 500.0, 500.0, VehicleState::MovingToStation, 0.0, 1},
            {0, 500.0, 500.0, VehicleState::AtMetroStation, 0.0, 1},
            {1, 300.0, 500.0, VehicleState::AtMetroStation, 0.0, 1}};
  const auto u = utilization(t, 300.0, 500.0);
  CHECK(u[0] == doctest::Approx(0.25));  // vehicle 0 busy half the horizon, vehicle 1 never

  for (int m = 0; m < 5; ++m) t.parking.push_back({1, 300 + m, m % 3});
  const auto box = parking_stats(t);
  CHECK(box[0].samples == 5);
  CHECK(box[0].min == 0.0);
  CHECK(box[0].max == 2.0);
  CHECK(box[0].median == 1.0);  // sorted 0 0 1 1 2
  CHECK(box[0].q1 == 0.0);
  CHECK(box[0].q3 == 1.0);
  CHECK(percentile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(percentile({}, 0.5) == 0.0);
}

TEST_CASE("simulated runs") {
  const auto sc = test::road_world({{0.0}, {1.0, 2.0, 3.0}});
  const std::vector<int> x{2};

  SUBCASE("idle day keeps the parking series flat at the fleet size") {
    SimOptions o;
    o.enforce_bounds = false;
    const auto out = Simulation(sc, x, Mode::None, std::vector<Request>{}, o).run();
    const auto box = parking_stats(tables_from(out));
    CHECK(box[0].samples == static_cast<long long>(sc.horizon_end() - sc.horizon_start()));
    CHECK(box[0].min == 2.0);
    CHECK(box[0].max == 2.0);
    CHECK(utilization(tables_from(out), out.horizon_start, out.horizon_end)[0] == 0.0);
  }
  SUBCASE("a three-drop route is one three-passenger trip") {
    const std::vector<Request> reqs{test::lm(0, 0, 360.0), test::lm(1, 1, 360.0), test::lm(2, 2, 360.0)};
    const auto out = Simulation(sc, x, Mode::LastMile, reqs, test::quiet()).run();
    const auto t = tables_from(out);
    const auto h = sharing_distribution(t);
    CHECK(h[0] == std::map<int, long long>{{3, 1}});
    const auto km = vehicle_km(t);
    CHECK(km.actual == doctest::Approx(6.0));
    CHECK(km.counterfactual == doctest::Approx(12.0));

    const auto solo = tables_from(Simulation(sc, x, Mode::None, reqs, test::quiet()).run());
    CHECK(sharing_distribution(solo)[0] == std::map<int, long long>{{1, 3}});
    CHECK(vehicle_km(solo).actual == doctest::Approx(vehicle_km(solo).counterfactual));
  }
}

TEST_CASE("mode none: all trips single and actual km equals the counterfactual") {
  const Scenario sc(reference_inputs(1));
  const auto out = run(sc, proportional(sc), Mode::None, replication_seed(1, 0));
  const auto dir = test::scratch_dir("analytics_none");
  write_output(out, dir);
  const auto t = read_tables(dir);
  long long trips = 0;
  for (const auto& h : sharing_distribution(t)) {
    for (const auto& [n, c] : h) {
      CHECK(n == 1);
      trips += c;
    }
  }
  CHECK(trips == static_cast<long long>(t.trips.size()));
  const auto km = vehicle_km(t);
  CHECK(km.actual == doctest::Approx(km.counterfactual).epsilon(1e-6));
}

TEST_CASE("report fields match an independent recount of the exported files") {
  const Scenario sc(reference_inputs(1));
  const auto out = run(sc, proportional(sc), Mode::Joint, replication_seed(2, 0));
  const auto dir = test::scratch_dir("analytics_recount");
  write_output(out, dir);
  const auto meta = meta_from(out, sc.params().fares);
  {
    std::ofstream(dir / "run.json") << meta_json(meta).dump(2);
  }
  const auto t = read_tables(dir);
  write_report(t, read_meta(dir / "run.json"), dir);
  for (const char* f : {"report.json", "lost_matrix.csv", "utilization.csv", "parking_stats.csv", "sharing.csv",
                        "profit.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto report = build_report(t, meta);
  CHECK(report["totals"]["generated"].get<long long>() == static_cast<long long>(out.requests.size()));
  CHECK(report["totals"]["served"].get<long long>() + report["totals"]["lost"].get<long long>() ==
        report["totals"]["generated"].get<long long>());
  CHECK(report["vehicle_km"]["ratio"].get<double>() < 1.0);

  const std::string cmd =
      std::string(FLM_PYTHON) + " " + FLM_RECOUNT_SCRIPT + " " + dir.string() + " > " + (dir / "recount.txt").string();
  CHECK(std::system(cmd.c_str()) == 0);
}
