#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "flm/error.hpp"
#include "flm/network.hpp"
#include "support.hpp"

using namespace flm;

namespace {

RoadGraph unit_grid(int cells) {
  const LatLon lo = test::kOrigin;
  return build_grid_graph({lo, offset_km(lo, cells, cells)}, 1.0);
}

// Relaxes every edge n - 1 times; independent of the Dijkstra implementation.
std::vector<double> bellman_ford(const RoadGraph& g, NodeId source) {
  std::vector<double> d(g.node_count(), std::numeric_limits<double>::infinity());
  d[static_cast<std::size_t>(source)] = 0.0;
  for (std::size_t round = 1; round < g.node_count(); ++round) {
    bool changed = false;
    for (const auto& e : g.edges()) {
      auto& du = d[static_cast<std::size_t>(e.u)];
      auto& dv = d[static_cast<std::size_t>(e.v)];
      if (du + e.length_km < dv) {
        dv = du + e.length_km;
        changed = true;
      }
      if (dv + e.length_km < du) {
        du = dv + e.length_km;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

}  // namespace

TEST_CASE("3x3 lattice has 9 nodes and 12 edges") {
  const auto g = unit_grid(2);
  CHECK(g.node_count() == 9);
  CHECK(g.edge_count() == 12);
  CHECK(g.connected());
}

TEST_CASE("lattice distances") {
  const auto g = unit_grid(2);
  CHECK(shortest_distance(g, 0, 8) == doctest::Approx(4.0));
  CHECK(shortest_distance(g, 4, 4) == 0.0);
  CHECK(shortest_distance(g, 0, 1) == doctest::Approx(1.0));
  CHECK(shortest_distance(g, 2, 6) == shortest_distance(g, 6, 2));
}

TEST_CASE("snapping lands within half a diagonal") {
  const auto g = build_grid_graph({test::kOrigin, offset_km(test::kOrigin, 5, 5)}, 0.5);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const LatLon p = offset_km(test::kOrigin, u(rng), u(rng));
    const NodeId n = g.snap(p);
    CHECK(g.planar_km(p, g.location(n)) <= 0.5 * std::sqrt(2.0) / 2.0 + 1e-6);
  }
}

TEST_CASE("shortest paths match Bellman-Ford on a perturbed lattice") {
  auto base = unit_grid(6);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> len(0.2, 3.0);
  std::vector<RoadEdge> edges;
  for (const auto& e : base.edges()) {
    if (rng() % 7 == 0) continue;  // knock out some streets
    edges.push_back({e.u, e.v, len(rng)});
  }
  const RoadGraph g(base.nodes(), edges);
  for (NodeId s = 0; s < static_cast<NodeId>(g.node_count()); s += 5) {
    const auto oracle = bellman_ford(g, s);
    const auto got = single_source_distances(g, s);
    for (std::size_t t = 0; t < g.node_count(); ++t) {
      if (std::isinf(oracle[t])) {
        CHECK(std::isinf(got[t]));
      } else {
        CHECK(got[t] == doctest::Approx(oracle[t]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("distance oracle is a metric and agrees with direct queries") {
  const auto g = std::make_shared<const RoadGraph>(unit_grid(4));
  const DistanceOracle oracle(g, {0, 12});
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(g->node_count()) - 1);
  for (int i = 0; i < 200; ++i) {
    const NodeId a = pick(rng), b = pick(rng), c = pick(rng);
    CHECK(oracle.distance(a, b) == doctest::Approx(shortest_distance(*g, a, b)));
    CHECK(oracle.distance(a, b) == oracle.distance(b, a));
    CHECK(oracle.distance(a, c) <= oracle.distance(a, b) + oracle.distance(b, c) + 1e-9);
    CHECK((oracle.distance(a, b) == 0.0) == (a == b));
  }
}

TEST_CASE("disconnected pair raises a routing error") {
  const auto g = std::make_shared<const RoadGraph>(
      std::vector<LatLon>{test::kOrigin, offset_km(test::kOrigin, 1, 0), offset_km(test::kOrigin, 5, 0)},
      std::vector<RoadEdge>{{0, 1, 1.0}});
  CHECK_FALSE(g->connected());
  const DistanceOracle oracle(g, {0});
  CHECK_THROWS_AS(oracle.distance(0, 2), RoutingError);
  CHECK_THROWS_AS(shortest_distance(*g, 0, 2), RoutingError);
}

TEST_CASE("travel time") {
  CHECK(travel_time(21.2, 21.2) == 60.0);
  CHECK(travel_time(0.0, 21.2) == 0.0);
  CHECK(travel_time(1.06, 21.2) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("bad grids are rejected") {
  CHECK_THROWS_AS(build_grid_graph({test::kOrigin, test::kOrigin}, 1.0), ConfigError);
  CHECK_THROWS_AS(build_grid_graph({test::kOrigin, offset_km(test::kOrigin, 1, 1)}, 0.0), ConfigError);
}

TEST_CASE("graph files round-trip") {
  const auto dir = test::scratch_dir("graph");
  const auto g = unit_grid(2);
  save_graph(g, dir / "nodes.csv", dir / "edges.csv");
  const auto back = load_graph(dir / "nodes.csv", dir / "edges.csv");
  CHECK(back.node_count() == g.node_count());
  CHECK(back.edge_count() == g.edge_count());
  CHECK(shortest_distance(back, 0, 8) == doctest::Approx(4.0));
}
