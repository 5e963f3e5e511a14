#include "flm/analytics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flm/csv.hpp"
#include "flm/error.hpp"

namespace flm {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  return out;
}

std::size_t station_pos(const RunTables& t, int id) {
  const auto it = std::find(t.station_ids.begin(), t.station_ids.end(), id);
  if (it == t.station_ids.end()) throw ConfigError(fmt::format("station {} is not in the allocation", id));
  return static_cast<std::size_t>(it - t.station_ids.begin());
}

int hour_of(Minutes t) { return std::clamp(static_cast<int>(std::floor(t / 60.0)), 0, kHoursPerDay - 1); }

// Vehicle ids of each station in ascending order, with their summed km and busy time.
struct VehicleTotals {
  int vehicle = 0;
  double km = 0.0;
  double busy = 0.0;
};

std::vector<std::vector<VehicleTotals>> vehicle_totals(const RunTables& t) {
  std::map<int, std::pair<std::size_t, VehicleTotals>> by_vehicle;
  for (const auto& l : t.legs) {
    auto [it, fresh] = by_vehicle.try_emplace(l.vehicle, station_pos(t, l.station_id), VehicleTotals{l.vehicle});
    if (!fresh && it->second.first != station_pos(t, l.station_id)) {
      throw ConfigError(fmt::format("vehicle {} appears at two stations", l.vehicle));
    }
    it->second.second.km += l.km;
    if (l.state != VehicleState::AtMetroStation) it->second.second.busy += l.t1 - l.t0;
  }
  std::vector<std::vector<VehicleTotals>> out(t.station_ids.size());
  for (const auto& [id, entry] : by_vehicle) out[entry.first].push_back(entry.second);
  return out;
}

RequestKind parse_kind(const csv::Reader& r, std::string_view s) {
  if (s == "FM") return RequestKind::FirstMile;
  if (s == "LM") return RequestKind::LastMile;
  r.fail(fmt::format("unknown request kind '{}'", s));
}

Outcome parse_outcome(const csv::Reader& r, std::string_view s) {
  if (s == "served") return Outcome::Served;
  if (s == "lost") return Outcome::Lost;
  if (s == "pending") return Outcome::Pending;
  r.fail(fmt::format("unknown outcome '{}'", s));
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunTables tables_from(const SimOutput& o) {
  RunTables t;
  t.station_ids = o.station_ids;
  t.allocation = o.allocation;
  for (const auto& r : o.requests) {
    t.requests.push_back({r.request.id, r.request.kind, r.request.station_id, r.request.time, r.outcome, r.wait,
                          r.direct_km});
  }
  t.legs = o.legs;
  t.parking = o.parking;
  t.trips = o.trips;
  return t;
}

RunTables read_tables(const std::filesystem::path& dir) {
  RunTables t;
  const auto need = [&](const char* name) {
    const auto p = dir / name;
    if (!std::filesystem::exists(p)) throw LoadError(p.string(), 0, "file not found");
    return p;
  };
  {
    csv::Reader r(need("allocation.csv"), {"station_id", "x"});
    while (r.next()) {
      t.station_ids.push_back(static_cast<int>(r.integer(0)));
      t.allocation.push_back(static_cast<int>(r.integer(1)));
    }
  }
  {
    csv::Reader r(need("requests.csv"), {"id", "kind", "station", "t_request", "outcome", "wait_min", "ride_min",
                                         "shared_n", "point", "direct_km"});
    while (r.next()) {
      t.requests.push_back({static_cast<int>(r.integer(0)), parse_kind(r, r.text(1)), static_cast<int>(r.integer(2)),
                            r.number(3), parse_outcome(r, r.text(4)), r.number(5), r.number(9)});
    }
  }
  {
    csv::Reader r(need("vehicle_legs.csv"), {"vehicle", "t0", "t1", "state", "km", "station"});
    while (r.next()) {
      VehicleLeg l;
      l.vehicle = static_cast<int>(r.integer(0));
      l.t0 = r.number(1);
      l.t1 = r.number(2);
      try {
        l.state = parse_vehicle_state(r.text(3));
      } catch (const ConfigError& e) {
        r.fail(e.what());
      }
      l.km = r.number(4);
      l.station_id = static_cast<int>(r.integer(5));
      t.legs.push_back(l);
    }
  }
  {
    csv::Reader r(need("parking.csv"), {"station", "minute", "idle_count"});
    while (r.next()) {
      t.parking.push_back(
          {static_cast<int>(r.integer(0)), static_cast<int>(r.integer(1)), static_cast<int>(r.integer(2))});
    }
  }
  {
    csv::Reader r(need("trips.csv"), {"trip", "vehicle", "station", "t0", "t1", "passengers"});
    while (r.next()) {
      t.trips.push_back({static_cast<int>(r.integer(0)), static_cast<int>(r.integer(1)),
                         static_cast<int>(r.integer(2)), r.number(3), r.number(4), static_cast<int>(r.integer(5))});
    }
  }
  return t;
}

RunMeta meta_from(const SimOutput& o, const FareParams& fares) {
  return {o.mode, o.seed, o.horizon_start, o.horizon_end, fares};
}

json meta_json(const RunMeta& m) {
  return {{"mode", to_string(m.mode)},
          {"seed", m.seed},
          {"horizon_start", m.horizon_start},
          {"horizon_end", m.horizon_end},
          {"fares",
           {{"base_fare", m.fares.base_fare},
            {"per_km_rate", m.fares.per_km_rate},
            {"base_distance", m.fares.base_distance},
            {"flat_fare", m.fares.flat_fare},
            {"fuel_price", m.fares.fuel_price},
            {"mileage", m.fares.mileage},
            {"fixed_cost", m.fares.fixed_cost}}}};
}

RunMeta read_meta(const std::filesystem::path& run_json) {
  std::ifstream in(run_json);
  if (!in) throw LoadError(run_json.string(), 0, "file not found");
  try {
    const json j = json::parse(in);
    RunMeta m;
    m.mode = parse_mode(j.at("mode").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.horizon_start = j.at("horizon_start").get<double>();
    m.horizon_end = j.at("horizon_end").get<double>();
    const auto& f = j.at("fares");
    m.fares.base_fare = f.at("base_fare").get<double>();
    m.fares.per_km_rate = f.at("per_km_rate").get<double>();
    m.fares.base_distance = f.at("base_distance").get<double>();
    m.fares.flat_fare = f.at("flat_fare").get<double>();
    m.fares.fuel_price = f.at("fuel_price").get<double>();
    m.fares.mileage = f.at("mileage").get<double>();
    m.fares.fixed_cost = f.at("fixed_cost").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw LoadError(run_json.string(), 0, e.what());
  } catch (const ConfigError& e) {
    throw LoadError(run_json.string(), 0, e.what());
  }
}

double LostMatrix::pct(long long lost, long long generated) {
  return generated == 0 ? 0.0 : 100.0 * static_cast<double>(lost) / static_cast<double>(generated);
}

LostMatrix lost_demand_matrix(const RunTables& t) {
  LostMatrix m;
  const std::size_t n = t.station_ids.size();
  m.station_ids = t.station_ids;
  m.generated.assign(n, {});
  m.lost.assign(n, {});
  m.station_generated.assign(n, 0);
  m.station_lost.assign(n, 0);
  for (const auto& r : t.requests) {
    const auto s = station_pos(t, r.station_id);
    const int h = hour_of(r.time);
    const long long lost = r.outcome == Outcome::Lost ? 1 : 0;
    ++m.generated[s][h];
    m.lost[s][h] += lost;
    ++m.station_generated[s];
    m.station_lost[s] += lost;
    ++m.hour_generated[h];
    m.hour_lost[h] += lost;
  }
  return m;
}

std::vector<double> utilization(const RunTables& t, Minutes start, Minutes end) {
  Minutes last = end;
  for (const auto& l : t.legs) last = std::max(last, l.t1);
  const double horizon = last - start;
  if (!(horizon > 0)) throw ConfigError("utilization needs a positive horizon");
  std::vector<double> out;
  for (const auto& vs : vehicle_totals(t)) {
    double sum = 0.0;
    for (const auto& v : vs) sum += v.busy / horizon;
    out.push_back(vs.empty() ? 0.0 : sum / static_cast<double>(vs.size()));
  }
  return out;
}

double percentile(const std::vector<int>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::vector<BoxStats> parking_stats(const RunTables& t) {
  std::vector<std::vector<int>> series(t.station_ids.size());
  for (const auto& p : t.parking) series[station_pos(t, p.station_id)].push_back(p.idle);
  std::vector<BoxStats> out;
  for (auto& s : series) {
    std::sort(s.begin(), s.end());
    BoxStats b;
    b.samples = static_cast<long long>(s.size());
    if (!s.empty()) {
      b.min = s.front();
      b.q1 = percentile(s, 0.25);
      b.median = percentile(s, 0.5);
      b.q3 = percentile(s, 0.75);
      b.max = s.back();
    }
    out.push_back(b);
  }
  return out;
}

std::vector<std::map<int, long long>> sharing_distribution(const RunTables& t) {
  std::vector<std::map<int, long long>> out(t.station_ids.size());
  for (const auto& trip : t.trips) ++out[station_pos(t, trip.station_id)][trip.passengers];
  return out;
}

VehicleKm vehicle_km(const RunTables& t) {
  VehicleKm k;
  k.station_actual.assign(t.station_ids.size(), 0.0);
  k.station_counterfactual.assign(t.station_ids.size(), 0.0);
  for (const auto& l : t.legs) {
    k.actual += l.km;
    k.station_actual[station_pos(t, l.station_id)] += l.km;
  }
  for (const auto& r : t.requests) {
    if (r.outcome != Outcome::Served) continue;
    k.counterfactual += 2.0 * r.direct_km;
    k.station_counterfactual[station_pos(t, r.station_id)] += 2.0 * r.direct_km;
  }
  return k;
}

double distance_fare(double km, const FareParams& f) {
  return f.base_fare + f.per_km_rate * std::max(km - f.base_distance, 0.0);
}

double operating_cost(double km, const FareParams& f) { return km * (f.fuel_price / f.mileage) + f.fixed_cost; }

namespace {

std::vector<StationProfit> profit_with(const RunTables& t, const FareParams& f, bool flat) {
  std::vector<StationProfit> out(t.station_ids.size());
  std::vector<long long> served(t.station_ids.size(), 0);
  for (const auto& r : t.requests) {
    if (r.outcome != Outcome::Served) continue;
    const auto s = station_pos(t, r.station_id);
    ++served[s];
    if (!flat) out[s].revenue += distance_fare(r.direct_km, f);
  }
  const auto vehicles = vehicle_totals(t);
  for (std::size_t s = 0; s < out.size(); ++s) {
    if (flat) out[s].revenue = f.flat_fare * static_cast<double>(served[s]);
    for (const auto& v : vehicles[s]) out[s].cost += operating_cost(v.km, f);
    out[s].profit = out[s].revenue - out[s].cost;
    if (t.allocation[s] > 0) out[s].per_vehicle = out[s].profit / t.allocation[s];
  }
  return out;
}

}  // namespace

std::vector<StationProfit> profit_distance(const RunTables& t, const FareParams& f) { return profit_with(t, f, false); }
std::vector<StationProfit> profit_trip(const RunTables& t, const FareParams& f) { return profit_with(t, f, true); }

std::optional<double> break_even_flat_fare(const RunTables& t, const FareParams& f) {
  const auto target_rows = profit_distance(t, f);
  double target = 0.0;
  for (const auto& p : target_rows) target += p.profit;

  std::vector<long long> served(t.station_ids.size(), 0);
  long long total_served = 0;
  for (const auto& r : t.requests) {
    if (r.outcome != Outcome::Served) continue;
    ++served[station_pos(t, r.station_id)];
    ++total_served;
  }
  if (total_served == 0) return std::nullopt;
  std::vector<double> cost;
  for (const auto& p : target_rows) cost.push_back(p.cost);

  const auto total_at = [&](double fare) {
    double sum = 0.0;
    for (std::size_t s = 0; s < served.size(); ++s) sum += fare * static_cast<double>(served[s]) - cost[s];
    return sum;
  };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 64 && total_at(hi) < target; ++i) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = (lo + hi) / 2.0;
    if (total_at(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::floor(hi * 1e4 + 0.5) / 1e4;
}

json build_report(const RunTables& t, const RunMeta& meta) {
  const auto m = lost_demand_matrix(t);
  long long generated = 0, lost = 0, served = 0, lost_fm = 0, lost_lm = 0;
  for (const auto& r : t.requests) {
    ++generated;
    if (r.outcome == Outcome::Served) ++served;
    if (r.outcome == Outcome::Lost) {
      ++lost;
      ++(r.kind == RequestKind::FirstMile ? lost_fm : lost_lm);
    }
  }

  json lost_rows = json::array(), gen_rows = json::array(), pct_rows = json::array();
  json station_pct = json::array(), hour_pct = json::array();
  for (std::size_t s = 0; s < m.station_ids.size(); ++s) {
    json lr = json::array(), gr = json::array(), pr = json::array();
    for (int h = 0; h < LostMatrix::kHours; ++h) {
      lr.push_back(m.lost[s][h]);
      gr.push_back(m.generated[s][h]);
      pr.push_back(LostMatrix::pct(m.lost[s][h], m.generated[s][h]));
    }
    lost_rows.push_back(lr);
    gen_rows.push_back(gr);
    pct_rows.push_back(pr);
    station_pct.push_back(LostMatrix::pct(m.station_lost[s], m.station_generated[s]));
  }
  for (int h = 0; h < LostMatrix::kHours; ++h) hour_pct.push_back(LostMatrix::pct(m.hour_lost[h], m.hour_generated[h]));

  json parking = json::array();
  for (const auto& b : parking_stats(t)) {
    parking.push_back(
        {{"samples", b.samples}, {"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}});
  }

  json share_stations = json::array();
  std::map<int, long long> share_total;
  long long trips = 0;
  for (const auto& hist : sharing_distribution(t)) {
    json h = json::object();
    for (const auto& [n, c] : hist) {
      h[std::to_string(n)] = c;
      share_total[n] += c;
      trips += c;
    }
    share_stations.push_back(h);
  }
  json share_all = json::object();
  for (const auto& [n, c] : share_total) share_all[std::to_string(n)] = c;

  const auto km = vehicle_km(t);
  const auto profits = [](const std::vector<StationProfit>& rows) {
    json revenue = json::array(), cost = json::array(), profit = json::array(), per_vehicle = json::array();
    double total = 0.0;
    for (const auto& p : rows) {
      revenue.push_back(p.revenue);
      cost.push_back(p.cost);
      profit.push_back(p.profit);
      per_vehicle.push_back(nullable(p.per_vehicle));
      total += p.profit;
    }
    return json{{"revenue", revenue}, {"cost", cost}, {"profit", profit}, {"per_vehicle", per_vehicle},
                {"total_profit", total}};
  };

  return {
      {"mode", to_string(meta.mode)},
      {"seed", meta.seed},
      {"stations", t.station_ids},
      {"allocation", t.allocation},
      {"totals",
       {{"generated", generated},
        {"served", served},
        {"lost", lost},
        {"lost_fm", lost_fm},
        {"lost_lm", lost_lm},
        {"lost_pct", LostMatrix::pct(lost, generated)}}},
      {"lost_matrix",
       {{"lost", lost_rows},
        {"generated", gen_rows},
        {"pct", pct_rows},
        {"station_lost", m.station_lost},
        {"station_generated", m.station_generated},
        {"station_pct", station_pct},
        {"hour_lost", m.hour_lost},
        {"hour_generated", m.hour_generated},
        {"hour_pct", hour_pct}}},
      {"utilization", utilization(t, meta.horizon_start, meta.horizon_end)},
      {"parking", parking},
      {"sharing", {{"trips", trips}, {"total", share_all}, {"per_station", share_stations}}},
      {"vehicle_km",
       {{"actual", km.actual},
        {"counterfactual", km.counterfactual},
        {"ratio", km.counterfactual > 0 ? json(km.actual / km.counterfactual) : json(nullptr)},
        {"station_actual", km.station_actual},
        {"station_counterfactual", km.station_counterfactual}}},
      {"profit",
       {{"distance", profits(profit_distance(t, meta.fares))},
        {"trip", profits(profit_trip(t, meta.fares))},
        {"break_even_flat_fare", nullable(break_even_flat_fare(t, meta.fares))}}},
  };
}

void write_report(const RunTables& t, const RunMeta& meta, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  using csv::fixed;
  const json report = build_report(t, meta);
  open_out(dir / "report.json") << report.dump(2) << '\n';

  const auto m = lost_demand_matrix(t);
  {
    auto out = open_out(dir / "lost_matrix.csv");
    out << "station,hour,generated,lost,lost_pct\n";
    for (std::size_t s = 0; s < m.station_ids.size(); ++s) {
      for (int h = 0; h < LostMatrix::kHours; ++h) {
        if (m.generated[s][h] == 0) continue;
        out << m.station_ids[s] << ',' << h << ',' << m.generated[s][h] << ',' << m.lost[s][h] << ','
            << fixed(LostMatrix::pct(m.lost[s][h], m.generated[s][h])) << '\n';
      }
    }
  }
  {
    const auto u = utilization(t, meta.horizon_start, meta.horizon_end);
    auto out = open_out(dir / "utilization.csv");
    out << "station,x,utilization\n";
    for (std::size_t s = 0; s < u.size(); ++s) {
      out << t.station_ids[s] << ',' << t.allocation[s] << ',' << fixed(u[s]) << '\n';
    }
  }
  {
    const auto stats = parking_stats(t);
    auto out = open_out(dir / "parking_stats.csv");
    out << "station,samples,min,q1,median,q3,max\n";
    for (std::size_t s = 0; s < stats.size(); ++s) {
      const auto& b = stats[s];
      out << t.station_ids[s] << ',' << b.samples << ',' << fixed(b.min) << ',' << fixed(b.q1) << ','
          << fixed(b.median) << ',' << fixed(b.q3) << ',' << fixed(b.max) << '\n';
    }
  }
  {
    const auto hist = sharing_distribution(t);
    auto out = open_out(dir / "sharing.csv");
    out << "station,passengers,trips\n";
    for (std::size_t s = 0; s < hist.size(); ++s) {
      for (const auto& [n, c] : hist[s]) out << t.station_ids[s] << ',' << n << ',' << c << '\n';
    }
  }
  {
    const auto pd = profit_distance(t, meta.fares);
    const auto pt = profit_trip(t, meta.fares);
    const auto cell = [](const std::optional<double>& v) { return v ? fixed(*v) : std::string(); };
    auto out = open_out(dir / "profit.csv");
    out << "station,x,revenue_distance,revenue_trip,cost,per_vehicle_distance,per_vehicle_trip\n";
    for (std::size_t s = 0; s < pd.size(); ++s) {
      out << t.station_ids[s] << ',' << t.allocation[s] << ',' << fixed(pd[s].revenue) << ',' << fixed(pt[s].revenue)
          << ',' << fixed(pd[s].cost) << ',' << cell(pd[s].per_vehicle) << ',' << cell(pt[s].per_vehicle) << '\n';
    }
  }
}

}  // namespace flm
