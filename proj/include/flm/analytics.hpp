#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flm/engine.hpp"
#include "flm/scenario.hpp"

namespace flm {

// Flat rows as exported; analytics never look past these tables.
struct RequestRow {
  int id = 0;
  RequestKind kind = RequestKind::FirstMile;
  int station_id = 0;
  Minutes time = 0;
  Outcome outcome = Outcome::Pending;
  Minutes wait = 0;
  double direct_km = 0.0;
};

struct RunTables {
  std::vector<int> station_ids;
  std::vector<int> allocation;  // by position in station_ids
  std::vector<RequestRow> requests;
  std::vector<VehicleLeg> legs;
  std::vector<ParkingSample> parking;
  std::vector<TripRecord> trips;
};

// Run facts that are not in the CSV tables; stored in run.json.
struct RunMeta {
  Mode mode = Mode::None;
  std::uint64_t seed = 0;
  Minutes horizon_start = 0;
  Minutes horizon_end = 0;
  FareParams fares;
};

RunTables tables_from(const SimOutput& output);
RunTables read_tables(const std::filesystem::path& dir);
RunMeta meta_from(const SimOutput& output, const FareParams& fares);
nlohmann::json meta_json(const RunMeta& meta);
RunMeta read_meta(const std::filesystem::path& run_json);

struct LostMatrix {
  static constexpr int kHours = kHoursPerDay;
  std::vector<int> station_ids;
  std::vector<std::array<long long, kHours>> generated;
  std::vector<std::array<long long, kHours>> lost;
  std::vector<long long> station_generated, station_lost;
  std::array<long long, kHours> hour_generated{}, hour_lost{};

  // 100 * lost / generated, 0 for an empty cell.
  static double pct(long long lost, long long generated);
};

LostMatrix lost_demand_matrix(const RunTables& t);

// Mean over each station's vehicles of busy time / horizon. The horizon runs
// from `start` to the later of `end` and the last leg end.
std::vector<double> utilization(const RunTables& t, Minutes start, Minutes end);

struct BoxStats {
  long long samples = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between order statistics at position p * (n - 1).
double percentile(const std::vector<int>& sorted, double p);
std::vector<BoxStats> parking_stats(const RunTables& t);

// passengers -> trip count, per station.
std::vector<std::map<int, long long>> sharing_distribution(const RunTables& t);

struct VehicleKm {
  double actual = 0.0;
  double counterfactual = 0.0;  // every served request as a solo out-and-back trip
  std::vector<double> station_actual, station_counterfactual;
};

VehicleKm vehicle_km(const RunTables& t);

double distance_fare(double km, const FareParams& f);
double operating_cost(double km, const FareParams& f);

struct StationProfit {
  double revenue = 0.0;
  double cost = 0.0;
  double profit = 0.0;
  std::optional<double> per_vehicle;  // none when the station has no vehicles
};

std::vector<StationProfit> profit_distance(const RunTables& t, const FareParams& f);
std::vector<StationProfit> profit_trip(const RunTables& t, const FareParams& f);

// Flat fare at which total trip-based profit first reaches the distance-based
// total, by bisection, rounded to 4 decimals. None when nothing was served.
std::optional<double> break_even_flat_fare(const RunTables& t, const FareParams& f);

nlohmann::json build_report(const RunTables& t, const RunMeta& meta);

// report.json plus lost_matrix.csv, utilization.csv, parking_stats.csv,
// sharing.csv, profit.csv.
void write_report(const RunTables& t, const RunMeta& meta, const std::filesystem::path& dir);

}  // namespace flm
