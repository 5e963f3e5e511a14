#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <json.hpp>
#include <set>
#include <sstream>

#include "flm/csv.hpp"
#include "flm/error.hpp"
#include "flm/scenario.hpp"

namespace flm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct ParamField {
  std::function<void(ScenarioParams&, double)> set;
  std::function<double(const ScenarioParams&)> get;
  bool integral = false;
};

template <typename T>
ParamField field(T ScenarioParams::*member) {
  return {[member](ScenarioParams& p, double v) { p.*member = static_cast<T>(v); },
          [member](const ScenarioParams& p) { return static_cast<double>(p.*member); },
          std::is_integral_v<T>};
}

template <typename T>
ParamField fare(T FareParams::*member) {
  return {[member](ScenarioParams& p, double v) { p.fares.*member = static_cast<T>(v); },
          [member](const ScenarioParams& p) { return static_cast<double>(p.fares.*member); }, false};
}

const std::vector<std::pair<std::string, ParamField>>& param_fields() {
  static const std::vector<std::pair<std::string, ParamField>> fields = {
      {"maxWaitingTime", field(&ScenarioParams::max_waiting_time)},
      {"maxDetourTime", field(&ScenarioParams::max_detour_time)},
      {"vehicleSpeed", field(&ScenarioParams::vehicle_speed)},
      {"vehicleCapacity", field(&ScenarioParams::vehicle_capacity)},
      {"flmShare", field(&ScenarioParams::flm_share)},
      {"totalFleet", field(&ScenarioParams::total_fleet)},
      {"perStationMin", field(&ScenarioParams::per_station_min)},
      {"perStationMax", field(&ScenarioParams::per_station_max)},
      {"dwellTime", field(&ScenarioParams::dwell_time)},
      {"serviceStart", field(&ScenarioParams::service_start)},
      {"serviceEnd", field(&ScenarioParams::service_end)},
      {"horizonTail", field(&ScenarioParams::horizon_tail)},
      {"roadSpacing", field(&ScenarioParams::road_spacing)},
      {"walkRadius", {[](ScenarioParams& p, double v) { p.band.min_km = v; },
                      [](const ScenarioParams& p) { return p.band.min_km; }, false}},
      {"serviceRadius", {[](ScenarioParams& p, double v) { p.band.max_km = v; },
                         [](const ScenarioParams& p) { return p.band.max_km; }, false}},
      {"baseFare", fare(&FareParams::base_fare)},
      {"perKmRate", fare(&FareParams::per_km_rate)},
      {"baseDistance", fare(&FareParams::base_distance)},
      {"flatFare", fare(&FareParams::flat_fare)},
      {"fuelPrice", fare(&FareParams::fuel_price)},
      {"mileage", fare(&FareParams::mileage)},
      {"fixedCost", fare(&FareParams::fixed_cost)},
  };
  return fields;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

fs::path require_file(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::is_regular_file(p)) throw LoadError(p.string(), 0, "file not found");
  return p;
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  return out;
}

std::vector<Station> load_stations(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string(), 0, "cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(file.string(), 0, e.what());
  }
  std::vector<Station> out;
  try {
    if (doc.at("type") != "FeatureCollection") throw LoadError(file.string(), 0, "expected a FeatureCollection");
    int k = 0;
    for (const auto& f : doc.at("features")) {
      ++k;
      const auto& geom = f.at("geometry");
      if (geom.at("type") != "Point") {
        throw LoadError(file.string(), 0, fmt::format("feature {} is not a Point", k));
      }
      const auto& props = f.at("properties");
      Station s;
      s.id = props.at("id").get<int>();
      s.name = props.at("name").get<std::string>();
      s.line = props.at("line").get<int>();
      s.sequence = props.at("seq").get<int>();
      const auto& c = geom.at("coordinates");
      s.location = {c.at(1).get<double>(), c.at(0).get<double>()};
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw LoadError(file.string(), 0, e.what());
  }
  return out;
}

}  // namespace

ScenarioParams parse_params(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw LoadError(file.string(), 0, "cannot open file");
  ScenarioParams p;
  std::string raw;
  int line = 0;
  std::set<std::string> seen;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) throw LoadError(file.string(), line, "expected key=value");
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    if (!seen.insert(key).second) throw LoadError(file.string(), line, fmt::format("duplicate key '{}'", key));

    if (key == "voronoiMetric") {
      if (value == "haversine") {
        p.voronoi_metric = DistanceMetric::Haversine;
      } else if (value == "road") {
        p.voronoi_metric = DistanceMetric::Road;
      } else {
        throw LoadError(file.string(), line, "voronoiMetric must be 'haversine' or 'road'");
      }
      continue;
    }
    if (key == "seed") {
      try {
        std::size_t used = 0;
        p.seed = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw LoadError(file.string(), line, "seed must be a non-negative integer");
      }
      continue;
    }
    const auto& fields = param_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == key; });
    if (it == fields.end()) throw LoadError(file.string(), line, fmt::format("unknown key '{}'", key));
    double v = 0;
    try {
      std::size_t used = 0;
      v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw LoadError(file.string(), line, fmt::format("'{}' is not a number", value));
    }
    if (it->second.integral && v != std::floor(v)) {
      throw LoadError(file.string(), line, fmt::format("{} must be an integer", key));
    }
    it->second.set(p, v);
  }
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw LoadError(file.string(), 0, e.what());
  }
  return p;
}

void write_params(const ScenarioParams& params, const fs::path& file) {
  auto out = open_out(file);
  for (const auto& [key, f] : param_fields()) {
    const double v = f.get(params);
    if (f.integral) {
      out << key << '=' << static_cast<long long>(v) << '\n';
    } else {
      out << key << '=' << fmt::format("{}", v) << '\n';
    }
  }
  out << "voronoiMetric=" << (params.voronoi_metric == DistanceMetric::Road ? "road" : "haversine") << '\n';
  out << "seed=" << params.seed << '\n';
}

ScenarioInputs load_inputs(const fs::path& dir) {
  ScenarioInputs in;
  in.stations = load_stations(require_file(dir, "stations.geojson"));

  std::map<std::pair<int, int>, int> by_seq;
  std::set<int> station_ids;
  for (const auto& s : in.stations) {
    by_seq[{s.line, s.sequence}] = s.id;
    station_ids.insert(s.id);
  }

  {
    const auto path = require_file(dir, "lines.csv");
    csv::Reader r(path, {"line", "from_seq", "to_seq", "minutes"});
    std::map<int, std::map<int, Minutes>> legs;
    while (r.next()) {
      const int line = static_cast<int>(r.integer(0));
      const int from = static_cast<int>(r.integer(1));
      const int to = static_cast<int>(r.integer(2));
      const double minutes = r.number(3);
      if (to != from + 1) r.fail("to_seq must be from_seq + 1");
      if (!(minutes > 0)) r.fail("travel time must be positive");
      if (!by_seq.contains({line, from}) || !by_seq.contains({line, to})) {
        r.fail(fmt::format("line {} has no station with seq {} or {}", line, from, to));
      }
      legs[line][from] = minutes;
    }
    std::map<int, std::vector<std::pair<int, int>>> members;
    for (const auto& s : in.stations) members[s.line].emplace_back(s.sequence, s.id);
    for (auto& [line, ms] : members) {
      std::sort(ms.begin(), ms.end());
      TrainLine tl{line, {}, {}};
      for (std::size_t i = 0; i < ms.size(); ++i) {
        tl.station_ids.push_back(ms[i].second);
        if (i == 0) continue;
        const auto it = legs[line].find(ms[i - 1].first);
        if (it == legs[line].end() || ms[i].first != ms[i - 1].first + 1) {
          throw LoadError(path.string(), 0,
                          fmt::format("line {} lacks a travel time after seq {}", line, ms[i - 1].first));
        }
        tl.travel.push_back(it->second);
      }
      in.lines.push_back(std::move(tl));
    }
  }

  {
    const auto path = require_file(dir, "dispatch.csv");
    csv::Reader r(path, {"line", "origin_seq", "first_departure"});
    while (r.next()) {
      Dispatch d;
      d.line = static_cast<int>(r.integer(0));
      d.origin_seq = static_cast<int>(r.integer(1));
      try {
        d.first_departure = csv::parse_clock(r.text(2));
      } catch (const std::invalid_argument& e) {
        r.fail(e.what());
      }
      in.dispatches.push_back(d);
    }
  }

  {
    const auto path = require_file(dir, "headways.csv");
    csv::Reader r(path, {"start", "end", "headway_min"});
    std::vector<HeadwayBand> bands;
    while (r.next()) {
      HeadwayBand b;
      try {
        b.start = csv::parse_clock(r.text(0));
        b.end = csv::parse_clock(r.text(1));
      } catch (const std::invalid_argument& e) {
        r.fail(e.what());
      }
      b.headway = r.number(2);
      if (!(b.headway > 0)) r.fail("headway must be positive");
      if (!(b.end > b.start)) r.fail("band end must follow start");
      bands.push_back(b);
    }
    try {
      in.headways = HeadwayProfile(std::move(bands));
    } catch (const ConfigError& e) {
      throw LoadError(path.string(), 0, e.what());
    }
  }

  {
    const auto path = require_file(dir, "demand.csv");
    csv::Reader r(path, {"station_id", "hour", "entries", "exits"});
    while (r.next()) {
      DemandRow row;
      row.station_id = static_cast<int>(r.integer(0));
      row.hour = static_cast<int>(r.integer(1));
      row.entries = r.integer(2);
      row.exits = r.integer(3);
      if (!station_ids.contains(row.station_id)) r.fail(fmt::format("unknown station id {}", row.station_id));
      if (row.hour < 5 || row.hour > 23) r.fail("hour must be in 5..23");
      if (row.entries < 0 || row.exits < 0) r.fail("counts must be non-negative");
      in.demand.push_back(row);
    }
  }

  {
    const auto path = require_file(dir, "points.csv");
    csv::Reader r(path, {"id", "lat", "lon", "population"});
    std::set<int> ids;
    while (r.next()) {
      RawPoint p;
      p.id = static_cast<int>(r.integer(0));
      p.location = {r.number(1), r.number(2)};
      p.population = r.integer(3);
      if (p.population < 0) r.fail("population must be non-negative");
      if (!ids.insert(p.id).second) r.fail(fmt::format("duplicate point id {}", p.id));
      in.points.push_back(p);
    }
  }

  in.params = parse_params(require_file(dir, "params.txt"));

  const bool has_nodes = fs::exists(dir / "nodes.csv");
  const bool has_edges = fs::exists(dir / "edges.csv");
  if (has_nodes != has_edges) {
    throw LoadError((dir / (has_nodes ? "edges.csv" : "nodes.csv")).string(), 0,
                    "road graph needs both nodes.csv and edges.csv");
  }
  if (has_nodes) {
    in.graph = std::make_shared<const RoadGraph>(load_graph(dir / "nodes.csv", dir / "edges.csv"));
  }
  return in;
}

Scenario load_scenario(const fs::path& dir) {
  auto inputs = load_inputs(dir);
  try {
    return Scenario(std::move(inputs));
  } catch (const ConfigError& e) {
    throw LoadError(dir.string(), 0, e.what());
  }
}

void save_inputs(const ScenarioInputs& inputs, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  {
    json features = json::array();
    for (const auto& s : inputs.stations) {
      features.push_back({{"type", "Feature"},
                          {"geometry", {{"type", "Point"}, {"coordinates", {s.location.lon, s.location.lat}}}},
                          {"properties", {{"id", s.id}, {"name", s.name}, {"line", s.line}, {"seq", s.sequence}}}});
    }
    auto out = open_out(dir / "stations.geojson");
    out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
  }
  {
    auto out = open_out(dir / "lines.csv");
    out << "line,from_seq,to_seq,minutes\n";
    for (const auto& l : inputs.lines) {
      for (std::size_t i = 0; i + 1 < l.station_ids.size(); ++i) {
        out << l.id << ',' << i + 1 << ',' << i + 2 << ',' << csv::fixed(l.travel[i]) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "dispatch.csv");
    out << "line,origin_seq,first_departure\n";
    for (const auto& d : inputs.dispatches) {
      out << d.line << ',' << d.origin_seq << ',' << csv::format_clock(d.first_departure) << '\n';
    }
  }
  {
    auto out = open_out(dir / "headways.csv");
    out << "start,end,headway_min\n";
    for (const auto& b : inputs.headways.bands()) {
      out << csv::format_clock(b.start) << ',' << csv::format_clock(b.end) << ',' << csv::fixed(b.headway) << '\n';
    }
  }
  {
    auto out = open_out(dir / "demand.csv");
    out << "station_id,hour,entries,exits\n";
    for (const auto& d : inputs.demand) {
      out << d.station_id << ',' << d.hour << ',' << d.entries << ',' << d.exits << '\n';
    }
  }
  {
    auto out = open_out(dir / "points.csv");
    out << "id,lat,lon,population\n";
    for (const auto& p : inputs.points) {
      out << p.id << ',' << fmt::format("{:.7f},{:.7f}", p.location.lat, p.location.lon) << ',' << p.population
          << '\n';
    }
  }
  write_params(inputs.params, dir / "params.txt");
  if (inputs.graph) save_graph(*inputs.graph, dir / "nodes.csv", dir / "edges.csv");
}

}  // namespace flm
