#include <fmt/format.h>

#include <fstream>

#include "flm/csv.hpp"
#include "flm/engine.hpp"
#include "flm/error.hpp"

namespace flm {

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  return out;
}

}  // namespace

void write_output(const SimOutput& output, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  using csv::fixed;

  {
    auto out = open_out(dir / "requests.csv");
    out << "id,kind,station,t_request,outcome,wait_min,ride_min,shared_n,point,direct_km\n";
    for (const auto& r : output.requests) {
      out << r.request.id << ',' << to_string(r.request.kind) << ',' << r.request.station_id << ','
          << fixed(r.request.time) << ',' << to_string(r.outcome) << ',' << fixed(r.wait) << ',' << fixed(r.ride)
          << ',' << r.shared_n << ',' << r.point_id << ',' << fixed(r.direct_km) << '\n';
    }
  }
  {
    auto out = open_out(dir / "vehicle_legs.csv");
    out << "vehicle,t0,t1,state,km,station\n";
    for (const auto& l : output.legs) {
      out << l.vehicle << ',' << fixed(l.t0) << ',' << fixed(l.t1) << ',' << to_string(l.state) << ','
          << fixed(l.km) << ',' << l.station_id << '\n';
    }
  }
  {
    auto out = open_out(dir / "parking.csv");
    out << "station,minute,idle_count\n";
    for (const auto& p : output.parking) out << p.station_id << ',' << p.minute << ',' << p.idle << '\n';
  }
  {
    auto out = open_out(dir / "trips.csv");
    out << "trip,vehicle,station,t0,t1,passengers\n";
    for (const auto& t : output.trips) {
      out << t.trip << ',' << t.vehicle << ',' << t.station_id << ',' << fixed(t.t0) << ',' << fixed(t.t1) << ','
          << t.passengers << '\n';
    }
  }
  {
    auto out = open_out(dir / "events.csv");
    out << "time,vehicle,request,action,load\n";
    for (const auto& e : output.events) {
      out << fixed(e.time) << ',' << e.vehicle << ',' << e.request << ',' << (e.board ? "board" : "alight") << ','
          << e.load << '\n';
    }
  }
  {
    auto out = open_out(dir / "allocation.csv");
    out << "station_id,x\n";
    for (std::size_t i = 0; i < output.station_ids.size(); ++i) {
      out << output.station_ids[i] << ',' << output.allocation.at(i) << '\n';
    }
  }
}

}  // namespace flm
