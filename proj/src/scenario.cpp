#include "flm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>
#include <set>

#include "flm/error.hpp"

namespace flm {

HeadwayProfile::HeadwayProfile(std::vector<HeadwayBand> bands) : bands_(std::move(bands)) {
  std::sort(bands_.begin(), bands_.end(),
            [](const HeadwayBand& a, const HeadwayBand& b) { return a.start < b.start; });
  for (const auto& b : bands_) {
    if (!(b.headway > 0.0)) {
      throw ConfigError(fmt::format("non-positive headway {} in band starting at {}", b.headway, b.start));
    }
    if (!(b.end > b.start)) throw ConfigError(fmt::format("empty headway band at {}", b.start));
  }
  for (std::size_t i = 1; i < bands_.size(); ++i) {
    if (bands_[i].start < bands_[i - 1].end) {
      throw ConfigError(fmt::format("overlapping headway bands at {}", bands_[i].start));
    }
  }
}

std::optional<Minutes> HeadwayProfile::at(Minutes t) const {
  for (const auto& b : bands_) {
    if (t >= b.start && t < b.end) return b.headway;
  }
  return std::nullopt;
}

void HeadwayProfile::require_cover(Minutes start, Minutes end) const {
  Minutes covered = start;
  for (const auto& b : bands_) {
    if (b.end <= covered) continue;
    if (b.start > covered) break;
    covered = b.end;
    if (covered >= end) return;
  }
  if (covered < end) {
    throw ConfigError(fmt::format("headway profile has a gap at minute {}", covered));
  }
}

std::vector<std::pair<Minutes, int>> Timetable::arrivals_at(int station_id) const {
  std::vector<std::pair<Minutes, int>> out;
  for (const auto& run : runs) {
    for (const auto& [sid, t] : run.arrivals) {
      if (sid == station_id) out.emplace_back(t, run.id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Timetable build_timetable(std::span<const TrainLine> lines, std::span<const Dispatch> dispatches,
                          const HeadwayProfile& headways, Minutes window_start, Minutes window_end) {
  if (!(window_end > window_start)) throw ConfigError("empty service window");
  headways.require_cover(window_start, window_end);
  Timetable tt;
  tt.window_start = window_start;
  tt.window_end = window_end;
  int next_run = 0;
  for (const auto& d : dispatches) {
    const auto line = std::find_if(lines.begin(), lines.end(), [&](const TrainLine& l) { return l.id == d.line; });
    if (line == lines.end()) throw ConfigError(fmt::format("dispatch references unknown line {}", d.line));
    const auto n = static_cast<int>(line->station_ids.size());
    if (n == 0) throw ConfigError(fmt::format("line {} has no stations", d.line));
    if (static_cast<int>(line->travel.size()) != n - 1) {
      throw ConfigError(fmt::format("line {} needs {} travel times", d.line, n - 1));
    }
    for (Minutes m : line->travel) {
      if (!(m > 0.0)) throw ConfigError(fmt::format("line {} has a non-positive travel time", d.line));
    }
    bool forward;
    if (d.origin_seq == 1) {
      forward = true;
    } else if (d.origin_seq == n) {
      forward = false;
    } else {
      throw ConfigError(fmt::format("dispatch on line {} must start at a terminal (seq 1 or {})", d.line, n));
    }
    if (n == 1) forward = true;
    if (d.first_departure < window_start) {
      throw ConfigError(fmt::format("first departure on line {} precedes the service window", d.line));
    }

    for (Minutes t = d.first_departure; t < window_end;) {
      TrainRun run{next_run++, d.line, {}};
      Minutes at = t;
      for (int k = 0; k < n; ++k) {
        const int idx = forward ? k : n - 1 - k;
        if (k > 0) at += line->travel[static_cast<std::size_t>(forward ? idx - 1 : idx)];
        if (at >= window_end) break;
        run.arrivals.emplace_back(line->station_ids[static_cast<std::size_t>(idx)], at);
      }
      tt.runs.push_back(std::move(run));
      const auto h = headways.at(t);
      if (!h) throw ConfigError(fmt::format("no headway defined at minute {}", t));
      t += *h;
    }
  }
  return tt;
}

VoronoiResult assign_voronoi(std::span<const Station> stations, std::span<const RawPoint> points,
                             DistanceMetric metric, ServiceBand band, const DistanceOracle* oracle) {
  if (stations.empty()) throw ConfigError("Voronoi assignment needs at least one station");
  if (metric == DistanceMetric::Road && oracle == nullptr) {
    throw ConfigError("road-network Voronoi metric needs a distance oracle");
  }
  std::vector<NodeId> station_nodes;
  if (metric == DistanceMetric::Road) {
    for (const auto& s : stations) station_nodes.push_back(oracle->graph().snap(s.location));
  }

  VoronoiResult out;
  for (const auto& p : points) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const NodeId pn = metric == DistanceMetric::Road ? oracle->graph().snap(p.location) : -1;
    for (std::size_t i = 0; i < stations.size(); ++i) {
      const double d = metric == DistanceMetric::Haversine ? haversine_km(stations[i].location, p.location)
                                                           : oracle->distance(station_nodes[i], pn);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best_d < band.min_km) {
      ++out.dropped_walk;
    } else if (best_d > band.max_km) {
      ++out.dropped_other_mode;
    } else {
      out.points.push_back({p.id, p.location, p.population, stations[best].id, best_d});
    }
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const DemandPoint& a, const DemandPoint& b) { return a.id < b.id; });
  return out;
}

void ScenarioParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(max_waiting_time > 0, "maxWaitingTime must be positive");
  require(max_detour_time > 0, "maxDetourTime must be positive");
  require(vehicle_speed > 0, "vehicleSpeed must be positive");
  require(vehicle_capacity >= 1, "vehicleCapacity must be at least 1");
  require(flm_share > 0 && flm_share <= 1, "flmShare must be in (0, 1]");
  require(total_fleet >= 0, "totalFleet must be non-negative");
  require(per_station_min >= 0, "perStationMin must be non-negative");
  require(per_station_min <= per_station_max, "perStationMin must not exceed perStationMax");
  require(dwell_time >= 0, "dwellTime must be non-negative");
  require(service_end > service_start, "serviceEnd must follow serviceStart");
  require(service_start >= 0 && service_end <= kHoursPerDay * 60, "service window must lie within one day");
  require(horizon_tail >= 0, "horizonTail must be non-negative");
  require(road_spacing > 0, "roadSpacing must be positive");
  require(band.min_km >= 0 && band.max_km > band.min_km, "walkRadius must be below serviceRadius");
  require(fares.base_fare > 0 && fares.per_km_rate > 0 && fares.base_distance > 0 && fares.flat_fare > 0 &&
              fares.fuel_price > 0 && fares.mileage > 0 && fares.fixed_cost > 0,
          "fare and cost constants must be positive");
}

Scenario::Scenario(ScenarioInputs inputs) : inputs_(std::move(inputs)) {
  const auto& params = inputs_.params;
  params.validate();
  if (inputs_.stations.empty()) throw ConfigError("scenario has no stations");

  std::set<int> ids;
  std::map<int, std::set<int>> seqs;
  for (const auto& s : inputs_.stations) {
    if (!ids.insert(s.id).second) throw ConfigError(fmt::format("duplicate station id {}", s.id));
    if (!seqs[s.line].insert(s.sequence).second) {
      throw ConfigError(fmt::format("duplicate sequence {} on line {}", s.sequence, s.line));
    }
  }
  for (const auto& line : inputs_.lines) {
    for (int sid : line.station_ids) station_index(sid);
  }

  timetable_ = build_timetable(inputs_.lines, inputs_.dispatches, inputs_.headways, params.service_start,
                               params.service_end);
  calls_.resize(inputs_.stations.size());
  for (const auto& run : timetable_.runs) {
    for (const auto& [sid, t] : run.arrivals) calls_[station_index(sid)].emplace_back(t, run.id);
  }
  for (auto& c : calls_) std::sort(c.begin(), c.end());

  graph_ = inputs_.graph;
  if (!graph_) {
    LatLon lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    LatLon hi{-lo.lat, -lo.lon};
    auto extend = [&](LatLon p) {
      lo = {std::min(lo.lat, p.lat), std::min(lo.lon, p.lon)};
      hi = {std::max(hi.lat, p.lat), std::max(hi.lon, p.lon)};
    };
    for (const auto& s : inputs_.stations) extend(s.location);
    for (const auto& p : inputs_.points) extend(p.location);
    const LatLon pad_lo = offset_km(lo, -params.road_spacing, -params.road_spacing);
    const LatLon pad_hi = offset_km(hi, params.road_spacing, params.road_spacing);
    graph_ = std::make_shared<const RoadGraph>(build_grid_graph({pad_lo, pad_hi}, params.road_spacing));
  }
  for (const auto& s : inputs_.stations) station_node_.push_back(graph_->snap(s.location));
  oracle_ = std::make_shared<const DistanceOracle>(graph_, station_node_);

  tally_ = assign_voronoi(inputs_.stations, inputs_.points, params.voronoi_metric, params.band, oracle_.get());
  points_ = tally_.points;
  by_station_.resize(inputs_.stations.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    point_node_.push_back(graph_->snap(points_[i].location));
    by_station_[station_index(points_[i].station_id)].push_back(static_cast<int>(i));
  }

  counts_.assign(inputs_.stations.size(), {});
  const int first_hour = static_cast<int>(std::floor(params.service_start / 60.0));
  const int last_hour = static_cast<int>(std::ceil(params.service_end / 60.0)) - 1;
  for (const auto& row : inputs_.demand) {
    if (row.hour < first_hour || row.hour > last_hour) {
      throw ConfigError(fmt::format("demand hour {} is outside the service window", row.hour));
    }
    if (row.entries < 0 || row.exits < 0) throw ConfigError("negative demand count");
    auto& c = counts_[station_index(row.station_id)][static_cast<std::size_t>(row.hour)];
    c.entries += row.entries;
    c.exits += row.exits;
  }
}

std::size_t Scenario::station_index(int station_id) const {
  for (std::size_t i = 0; i < inputs_.stations.size(); ++i) {
    if (inputs_.stations[i].id == station_id) return i;
  }
  throw ConfigError(fmt::format("unknown station id {}", station_id));
}

int Scenario::trains_in_hour(std::size_t station, int hour) const {
  const auto& calls = calls_.at(station);
  const Minutes lo = hour * 60.0, hi = lo + 60.0;
  return static_cast<int>(std::count_if(calls.begin(), calls.end(),
                                        [&](const auto& c) { return c.first >= lo && c.first < hi; }));
}

const HourlyCounts& Scenario::counts(std::size_t station, int hour) const {
  return counts_.at(station).at(static_cast<std::size_t>(hour));
}

double Scenario::expected_flm_demand(std::size_t station) const {
  double total = 0.0;
  for (const auto& c : counts_.at(station)) {
    total += static_cast<double>(c.entries + c.exits) * inputs_.params.flm_share;
  }
  return total;
}

}  // namespace flm
