#pragma once

#include <algorithm>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "flm/engine.hpp"
#include "flm/scenario.hpp"

namespace flm::test {

inline const LatLon kOrigin{12.97, 77.59};

// Stations and demand points on one straight east-west road. Positions are km
// east of kOrigin (negative is west); the road graph is the chain through all
// positions, so road distance is the difference in position.
struct RoadWorld {
  std::vector<double> stations{0.0};
  std::vector<double> points;
  std::vector<long long> population;  // defaults to 100 each
  double headway = 60.0;
};

inline ScenarioInputs road_inputs(const RoadWorld& w) {
  ScenarioInputs in;
  std::vector<double> xs;
  TrainLine line{1, {}, {}};
  for (std::size_t i = 0; i < w.stations.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    in.stations.push_back({id, "S" + std::to_string(id), offset_km(kOrigin, w.stations[i], 0.0), 1, id});
    line.station_ids.push_back(id);
    if (i > 0) line.travel.push_back(2.0);
    xs.push_back(w.stations[i]);
  }
  in.lines.push_back(line);
  in.dispatches.push_back({1, 1, 5 * 60.0});
  in.headways = HeadwayProfile({{5 * 60.0, 24 * 60.0, w.headway}});
  for (std::size_t i = 0; i < w.points.size(); ++i) {
    const long long pop = i < w.population.size() ? w.population[i] : 100;
    in.points.push_back({static_cast<int>(i) + 1, offset_km(kOrigin, w.points[i], 0.0), pop});
    xs.push_back(w.points[i]);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<LatLon> nodes;
  std::vector<RoadEdge> edges;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    nodes.push_back(offset_km(kOrigin, xs[i], 0.0));
    if (i > 0) edges.push_back({static_cast<NodeId>(i - 1), static_cast<NodeId>(i), xs[i] - xs[i - 1]});
  }
  in.graph = std::make_shared<const RoadGraph>(std::move(nodes), std::move(edges));
  in.params.total_fleet = 1000;
  in.params.per_station_min = 0;
  in.params.per_station_max = 100;
  return in;
}

inline Scenario road_world(const RoadWorld& w) { return Scenario(road_inputs(w)); }

// Index into Scenario::points() of the point with this 1-based input id.
inline int point_index(const Scenario& sc, int id) {
  const auto& pts = sc.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].id == id) return static_cast<int>(i);
  }
  throw std::out_of_range("point not retained");
}

inline Request lm(int id, int point, Minutes t, int station = 1) {
  return {id, RequestKind::LastMile, station, point, t};
}
inline Request fm(int id, int point, Minutes t, int station = 1) {
  return {id, RequestKind::FirstMile, station, point, t};
}

inline SimOptions quiet() {
  SimOptions o;
  o.enforce_bounds = false;
  o.sample_parking = false;
  return o;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("flm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace flm::test
