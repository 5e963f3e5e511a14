#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "flm/allocator.hpp"
#include "flm/demand.hpp"
#include "flm/error.hpp"
#include "support.hpp"

using namespace flm;

namespace {

// Independent interpolation: locate the bracketing pair by linear scan.
double interp(const LostDemandCurve& c, int x) {
  const auto& p = c.points;
  if (x <= p.front().supply) return p.front().mean;
  if (x >= p.back().supply) return p.back().mean;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (x <= p[i].supply) {
      const double t = static_cast<double>(x - p[i - 1].supply) / (p[i].supply - p[i - 1].supply);
      return p[i - 1].mean + t * (p[i].mean - p[i - 1].mean);
    }
  }
  return p.back().mean;
}

struct BruteBest {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<int> x;
};

void brute(std::span<const LostDemandCurve> curves, std::span<const SupplyBounds> b, int total, std::size_t s,
           std::vector<int>& x, int used, BruteBest& best) {
  if (s == curves.size()) {
    double obj = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) obj += interp(curves[i], x[i]);
    if (obj < best.objective - 1e-9) best = {obj, x};
    return;
  }
  for (int v = b[s].min; v <= b[s].max && used + v <= total; ++v) {
    x[s] = v;
    brute(curves, b, total, s + 1, x, used + v, best);
  }
}

LostDemandCurve random_curve(std::mt19937_64& rng, int id, int lo, int hi) {
  std::uniform_real_distribution<double> val(0.0, 50.0);
  LostDemandCurve c{id, {}};
  c.insert({lo, val(rng), 0.0, 1});
  c.insert({hi, val(rng), 0.0, 1});
  for (int k = 0; k < 3; ++k) {
    const int x = lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
    if (!c.has(x)) c.insert({x, val(rng), 0.0, 1});
  }
  return c;
}

double convex_loss(std::size_t s, int a) {
  const double scale = 40.0 + 15.0 * static_cast<double>(s);
  return scale * std::exp(-a / (4.0 + static_cast<double>(s)));
}

}  // namespace

TEST_CASE("curve interpolation") {
  LostDemandCurve c{1, {}};
  c.insert({10, 4.0, 0, 1});
  c.insert({0, 10.0, 0, 1});
  c.insert({5, 6.0, 0, 1});
  REQUIRE(c.points.size() == 3);
  CHECK(c.points[0].supply == 0);
  CHECK(c.value_at(0) == 10.0);
  CHECK(c.value_at(2) == doctest::Approx(8.4));
  CHECK(c.value_at(5) == 6.0);
  CHECK(c.value_at(8) == doctest::Approx(4.8));
  CHECK(c.value_at(20) == 4.0);
  CHECK(c.has(5));
  CHECK_FALSE(c.has(6));
}

TEST_CASE("dynamic program matches exhaustive search") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    std::vector<LostDemandCurve> curves;
    std::vector<SupplyBounds> b;
    int min_sum = 0, max_sum = 0;
    for (int s = 0; s < n; ++s) {
      const int lo = static_cast<int>(rng() % 4);
      const int hi = lo + 1 + static_cast<int>(rng() % 10);
      curves.push_back(random_curve(rng, s + 1, lo, hi));
      b.push_back({lo, hi});
      min_sum += lo;
      max_sum += hi;
    }
    const int total = min_sum + static_cast<int>(rng() % static_cast<unsigned>(max_sum - min_sum + 1));
    const auto got = solve_allocation(curves, total, b);
    std::vector<int> x(static_cast<std::size_t>(n));
    BruteBest best;
    brute(curves, b, total, 0, x, 0, best);
    CHECK(got.objective == doctest::Approx(best.objective).epsilon(1e-12));
    double recomputed = 0.0;
    for (int s = 0; s < n; ++s) {
      CHECK(got.x[static_cast<std::size_t>(s)] >= b[static_cast<std::size_t>(s)].min);
      CHECK(got.x[static_cast<std::size_t>(s)] <= b[static_cast<std::size_t>(s)].max);
      recomputed += interp(curves[static_cast<std::size_t>(s)], got.x[static_cast<std::size_t>(s)]);
    }
    CHECK(got.total() <= total);
    CHECK(recomputed == doctest::Approx(got.objective).epsilon(1e-12));
  }
}

TEST_CASE("solver tie-breaks") {
  SUBCASE("single station takes the smallest minimiser") {
    LostDemandCurve c{1, {{0, 9.0, 0, 1}, {4, 2.0, 0, 1}, {8, 2.0, 0, 1}, {10, 3.0, 0, 1}}};
    const std::vector<SupplyBounds> b{{0, 10}};
    const auto a = solve_allocation(std::span(&c, 1), 10, b);
    CHECK(a.x == std::vector<int>{4});
    CHECK(a.objective == 2.0);
  }
  SUBCASE("constant curves give the minimums") {
    std::vector<LostDemandCurve> cs;
    for (int s = 1; s <= 3; ++s) cs.push_back({s, {{1, 5.0, 0, 1}, {9, 5.0, 0, 1}}});
    const std::vector<SupplyBounds> b{{1, 9}, {2, 9}, {3, 9}};
    CHECK(solve_allocation(cs, 20, b).x == std::vector<int>{1, 2, 3});
  }
  SUBCASE("equal objectives take the lexicographically smallest vector") {
    std::vector<LostDemandCurve> cs;
    for (int s = 1; s <= 2; ++s) cs.push_back({s, {{0, 10.0, 0, 1}, {1, 0.0, 0, 1}}});
    const std::vector<SupplyBounds> b{{0, 1}, {0, 1}};
    CHECK(solve_allocation(cs, 1, b).x == std::vector<int>{0, 1});
  }
}

TEST_CASE("solver errors") {
  std::vector<LostDemandCurve> cs{{1, {{5, 1.0, 0, 1}, {10, 0.0, 0, 1}}}, {2, {{5, 1.0, 0, 1}, {10, 0.0, 0, 1}}}};
  const std::vector<SupplyBounds> b{{5, 10}, {5, 10}};
  CHECK_THROWS_AS(solve_allocation(cs, 9, b), InfeasibleError);
  const std::vector<SupplyBounds> wide{{0, 10}, {5, 10}};
  CHECK_THROWS_AS(solve_allocation(cs, 20, wide), ConfigError);
  cs[1].points.pop_back();
  CHECK_THROWS_AS(solve_allocation(cs, 20, b), ConfigError);
}

TEST_CASE("argmin is invariant to scaling the curves") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<LostDemandCurve> cs;
    std::vector<SupplyBounds> b;
    for (int s = 0; s < 4; ++s) {
      cs.push_back(random_curve(rng, s + 1, 0, 12));
      b.push_back({0, 12});
    }
    const auto base = solve_allocation(cs, 25, b);
    for (const double k : {0.25, 3.0, 1000.0}) {
      auto scaled = cs;
      for (auto& c : scaled) {
        for (auto& p : c.points) p.mean *= k;
      }
      CHECK(solve_allocation(scaled, 25, b).x == base.x);
    }
  }
}

TEST_CASE("adaptive refinement agrees with the full grid on convex curves") {
  const std::vector<int> ids{1, 2, 3, 4, 5};
  const auto grid = supply_grid(2, 30, 2);
  const std::vector<SupplyBounds> b(ids.size(), SupplyBounds{2, 30});
  const SupplyEvaluator eval = [](std::size_t s, int a) { return CurvePoint{a, convex_loss(s, a), 0.0, 1}; };
  std::vector<LostDemandCurve> full;
  for (std::size_t s = 0; s < ids.size(); ++s) {
    LostDemandCurve c{ids[s], {}};
    for (int a : grid) c.insert(eval(s, a));
    full.push_back(c);
  }
  for (const int total : {20, 40, 60, 90}) {
    CAPTURE(total);
    const auto oracle = solve_allocation(full, total, b);
    const auto res = adaptive_allocate(ids, grid, total, b, eval, 2);
    CHECK(res.allocation.x == oracle.x);
    CHECK(res.allocation.objective == doctest::Approx(oracle.objective));
    CHECK(res.evaluations < static_cast<long long>(grid.size() * ids.size()));
    CHECK(res.iterations >= 1);
  }

  const auto again = adaptive_allocate(ids, grid, 40, b, eval, 1, full);
  CHECK(again.evaluations == 0);
  CHECK(again.iterations == 1);
  CHECK(again.allocation.x == solve_allocation(full, 40, b).x);
}

TEST_CASE("adaptive refinement is deterministic across job counts") {
  const std::vector<int> ids{1, 2, 3};
  const auto grid = supply_grid(0, 20, 1);
  const std::vector<SupplyBounds> b(ids.size(), SupplyBounds{0, 20});
  const SupplyEvaluator eval = [](std::size_t s, int a) {
    return CurvePoint{a, convex_loss(s, a) + ((a * 7 + static_cast<int>(s)) % 5) * 0.3, 0.0, 1};
  };
  const auto a = adaptive_allocate(ids, grid, 25, b, eval, 1);
  const auto c = adaptive_allocate(ids, grid, 25, b, eval, 4);
  CHECK(a.allocation.x == c.allocation.x);
  CHECK(a.evaluations == c.evaluations);
}

TEST_CASE("baselines") {
  const std::vector<double> d1{100, 100, 200};
  CHECK(baseline_proportional(d1, 40, 60) == std::vector<int>{10, 10, 20});
  const std::vector<double> d2{900, 50, 50};
  CHECK(baseline_proportional(d2, 120, 60) == std::vector<int>{60, 30, 30});
  const std::vector<double> d3(4, 7.0);
  CHECK(baseline_proportional(d3, 20, 60) == std::vector<int>{5, 5, 5, 5});
  CHECK_THROWS_AS(baseline_proportional(d1, 200, 60), InfeasibleError);
  const std::vector<double> d4{1000, 1, 1};
  const auto floored = baseline_proportional(d4, 30, 60, 5);
  CHECK(floored == std::vector<int>{20, 5, 5});

  CHECK(baseline_equal(1200, 40) == std::vector<int>(40, 30));
  CHECK(baseline_equal(10, 3) == std::vector<int>{4, 3, 3});
  CHECK(baseline_equal(0, 5) == std::vector<int>(5, 0));
  CHECK(supply_grid(5, 60, 5).size() == 12);
  CHECK(supply_grid(2, 11, 4) == std::vector<int>{2, 6, 10, 11});
}

TEST_CASE("curve and allocation files round-trip") {
  const auto dir = test::scratch_dir("alloc_io");
  std::vector<LostDemandCurve> cs{{3, {{0, 12.5, 1.25, 5}, {10, 0.0, 0.0, 5}}}, {7, {{0, 4.0, 0.5, 5}, {10, 1.0, 0.2, 5}}}};
  write_curves(cs, dir / "curves.csv");
  const auto back = read_curves(dir / "curves.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].station_id == 3);
  CHECK(back[0].points[0].mean == 12.5);
  CHECK(back[0].points[0].std_error == 1.25);
  CHECK(back[1].points[1].reps == 5);

  const std::vector<int> ids{3, 7}, x{4, 9};
  write_allocation(ids, x, dir / "allocation.csv");
  CHECK(read_allocation(ids, dir / "allocation.csv") == x);
  const std::vector<int> other{3, 8};
  CHECK_THROWS(read_allocation(other, dir / "allocation.csv"));
}

TEST_CASE("simulated curve end points") {
  const Scenario sc(reference_inputs(1));
  const std::size_t s = 3;
  const std::uint64_t seed = 8;
  const auto none = evaluate_supply(sc, s, 0, 3, Mode::None, seed);
  double generated = 0.0;
  for (int r = 0; r < 3; ++r) {
    generated += static_cast<double>(generate_station_demand(sc, s, replication_seed(seed, r), nullptr).size());
  }
  CHECK(none.mean == doctest::Approx(generated / 3.0));
  CHECK(none.std_error > 0.0);
  CHECK(evaluate_supply(sc, s, 200, 2, Mode::None, seed).mean == 0.0);

  const std::vector<int> supplies{2, 10};
  const auto a = estimate_curve(sc, s, supplies, 3, Mode::Joint, seed);
  const auto b = estimate_curve(sc, s, supplies, 3, Mode::Joint, seed);
  REQUIRE(a.points.size() == 2);
  CHECK(a.points[0].mean == b.points[0].mean);
  CHECK(a.points[1].mean == b.points[1].mean);
  CHECK(a.points[0].mean >= a.points[1].mean);
}
