#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flm/geo.hpp"
#include "flm/network.hpp"

namespace flm {

using Minutes = double;

inline constexpr int kHoursPerDay = 24;

struct Station {
  int id = 0;
  std::string name;
  LatLon location;
  int line = 0;
  int sequence = 0;
};

// Piecewise-constant headway by time of day. Bands are half-open [start, end).
struct HeadwayBand {
  Minutes start = 0;
  Minutes end = 0;
  Minutes headway = 0;
};

class HeadwayProfile {
 public:
  HeadwayProfile() = default;
  explicit HeadwayProfile(std::vector<HeadwayBand> bands);

  // Headway in force at `t`, or nullopt when no band covers it.
  std::optional<Minutes> at(Minutes t) const;
  // Throws ConfigError if [start, end) is not covered without gaps.
  void require_cover(Minutes start, Minutes end) const;
  const std::vector<HeadwayBand>& bands() const noexcept { return bands_; }

 private:
  std::vector<HeadwayBand> bands_;
};

// A line's stations in running order and the train travel time between
// consecutive stations (size = stations - 1).
struct TrainLine {
  int id = 0;
  std::vector<int> station_ids;
  std::vector<Minutes> travel;
};

// Trains leave the reference station at `origin_seq` (first or last station of
// the line) starting at `first_departure`, spaced by the headway profile.
struct Dispatch {
  int line = 0;
  int origin_seq = 0;
  Minutes first_departure = 0;
};

struct TrainRun {
  int id = 0;
  int line = 0;
  std::vector<std::pair<int, Minutes>> arrivals;  // (station id, time)
};

struct Timetable {
  std::vector<TrainRun> runs;
  Minutes window_start = 0;
  Minutes window_end = 0;

  // (time, run id) of every train calling at `station_id`, sorted by time.
  std::vector<std::pair<Minutes, int>> arrivals_at(int station_id) const;
};

Timetable build_timetable(std::span<const TrainLine> lines, std::span<const Dispatch> dispatches,
                          const HeadwayProfile& headways, Minutes window_start, Minutes window_end);

enum class DistanceMetric { Haversine, Road };

struct RawPoint {
  int id = 0;
  LatLon location;
  long long population = 0;
};

struct DemandPoint {
  int id = 0;
  LatLon location;
  long long population = 0;
  int station_id = 0;
  double distance_km = 0.0;
};

struct VoronoiResult {
  std::vector<DemandPoint> points;  // sorted by id
  int dropped_walk = 0;        // closer than the walking radius
  int dropped_other_mode = 0;  // farther than the service radius
};

struct ServiceBand {
  double min_km = 0.5;
  double max_km = 5.0;
};

// Assigns each point to its nearest station and keeps it only if that distance
// is inside `band`. Ties go to the station listed first. The road metric needs
// `oracle` and the graph nodes the stations and points snap to.
VoronoiResult assign_voronoi(std::span<const Station> stations, std::span<const RawPoint> points,
                             DistanceMetric metric, ServiceBand band = {},
                             const DistanceOracle* oracle = nullptr);

struct FareParams {
  double base_fare = 30.0;      // alpha
  double per_km_rate = 15.0;    // beta
  double base_distance = 2.0;   // km covered by the base fare
  double flat_fare = 30.0;
  double fuel_price = 100.0;    // per litre
  double mileage = 25.0;        // km per litre
  double fixed_cost = 102.0;    // per vehicle per day
};

struct ScenarioParams {
  Minutes max_waiting_time = 7.0;
  Minutes max_detour_time = 7.0;
  double vehicle_speed = 21.2;  // km/h
  int vehicle_capacity = 3;
  double flm_share = 0.10;
  int total_fleet = 1200;
  int per_station_min = 5;
  int per_station_max = 60;
  Minutes dwell_time = 0.5;
  Minutes service_start = 5 * 60;
  Minutes service_end = 24 * 60;
  Minutes horizon_tail = 120;
  double road_spacing = 0.5;  // km, synthetic lattice when no graph file is given
  DistanceMetric voronoi_metric = DistanceMetric::Haversine;
  ServiceBand band;
  FareParams fares;
  std::uint64_t seed = 0;  // seed the scenario was synthesized with, if any

  void validate() const;
};

// key=value text; '#' starts a comment. Unknown keys are errors.
ScenarioParams parse_params(const std::filesystem::path& file);
void write_params(const ScenarioParams& params, const std::filesystem::path& file);

struct HourlyCounts {
  long long entries = 0;
  long long exits = 0;
};

struct DemandRow {
  int station_id = 0;
  int hour = 0;
  long long entries = 0;
  long long exits = 0;
};

// Everything needed to build a Scenario; also the on-disk file set.
struct ScenarioInputs {
  std::vector<Station> stations;
  std::vector<TrainLine> lines;
  std::vector<Dispatch> dispatches;
  HeadwayProfile headways;
  std::vector<DemandRow> demand;
  std::vector<RawPoint> points;
  ScenarioParams params;
  std::shared_ptr<const RoadGraph> graph;  // null: lattice over the scenario extent
};

// Immutable simulation world. Safe to share between concurrent runs.
class Scenario {
 public:
  explicit Scenario(ScenarioInputs inputs);

  const std::vector<Station>& stations() const noexcept { return inputs_.stations; }
  std::size_t station_count() const noexcept { return inputs_.stations.size(); }
  // Index of `station_id` in stations(); throws ConfigError if unknown.
  std::size_t station_index(int station_id) const;

  const Timetable& timetable() const noexcept { return timetable_; }
  // Train calls at a station, by station index.
  const std::vector<std::pair<Minutes, int>>& train_calls(std::size_t station) const {
    return calls_.at(station);
  }
  int trains_in_hour(std::size_t station, int hour) const;

  const std::vector<DemandPoint>& points() const noexcept { return points_; }
  // Demand points (indices into points()) served by a station.
  const std::vector<int>& station_points(std::size_t station) const { return by_station_.at(station); }
  const HourlyCounts& counts(std::size_t station, int hour) const;
  // Expected FLM requests per day: sum over hours of (entries + exits) * flm share.
  double expected_flm_demand(std::size_t station) const;

  NodeId station_node(std::size_t station) const { return station_node_.at(station); }
  NodeId point_node(int point_index) const { return point_node_.at(static_cast<std::size_t>(point_index)); }
  const DistanceOracle& oracle() const noexcept { return *oracle_; }
  const RoadGraph& graph() const noexcept { return *graph_; }

  const ScenarioParams& params() const noexcept { return inputs_.params; }
  const ScenarioInputs& inputs() const noexcept { return inputs_; }
  const VoronoiResult& voronoi_tally() const noexcept { return tally_; }
  std::uint64_t seed() const noexcept { return inputs_.params.seed; }

  Minutes horizon_start() const noexcept { return inputs_.params.service_start; }
  Minutes horizon_end() const noexcept {
    return inputs_.params.service_end + inputs_.params.horizon_tail;
  }

 private:
  ScenarioInputs inputs_;
  Timetable timetable_;
  std::vector<std::vector<std::pair<Minutes, int>>> calls_;
  std::shared_ptr<const RoadGraph> graph_;
  std::shared_ptr<const DistanceOracle> oracle_;
  std::vector<NodeId> station_node_;
  std::vector<NodeId> point_node_;
  std::vector<DemandPoint> points_;
  std::vector<std::vector<int>> by_station_;
  std::vector<std::array<HourlyCounts, kHoursPerDay>> counts_;
  VoronoiResult tally_;
};

struct SynthOptions {
  int n_lines = 2;
  int stations_per_line = 20;
  int points_per_station = 15;
  double demand_scale = 1.0;
  std::uint64_t seed = 1;
};

// Desk-scale synthetic world: straight lines crossing at a common centre with
// 1 km station spacing, population points scattered around each station, and
// AM/PM-peaked hourly entry/exit counts. Deterministic in `seed`.
ScenarioInputs synthesize_inputs(const SynthOptions& options);
Scenario synthesize_scenario(const SynthOptions& options);

// Reference scenario: the synthetic world with fleet parameters sized to its
// demand (used by the acceptance suite and `--synth` defaults).
ScenarioInputs reference_inputs(std::uint64_t seed = 1);

// File set: stations.geojson, lines.csv, dispatch.csv, headways.csv,
// demand.csv, points.csv, params.txt, optional nodes.csv + edges.csv.
ScenarioInputs load_inputs(const std::filesystem::path& dir);
Scenario load_scenario(const std::filesystem::path& dir);
void save_inputs(const ScenarioInputs& inputs, const std::filesystem::path& dir);

}  // namespace flm
