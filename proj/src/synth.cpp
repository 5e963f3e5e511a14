#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "flm/error.hpp"
#include "flm/rng.hpp"
#include "flm/scenario.hpp"

namespace flm {

namespace {

constexpr LatLon kCentre{12.97, 77.59};
constexpr double kStationSpacingKm = 1.0;
constexpr Minutes kTrainLegMinutes = 2.0;
constexpr double kPointDiscKm = 5.2;
constexpr double kDailyVolume = 1250.0;  // entries + exits per average station
constexpr double kPeakVariance = 1.2;
constexpr double kBaseMass = 0.25;
constexpr double kEntryPeak = 3.0;
constexpr double kExitPeak = 1.5;
constexpr double kPopulationSigma = 1.0;

double round7(double v) { return std::round(v * 1e7) / 1e7; }

// Relative hourly volume for hours 5..23. Commuter peaks at 08-09 and 18-19.
double peak(int hour, double centre) {
  const double d = hour + 0.5 - centre;
  return std::exp(-0.5 * d * d / kPeakVariance);
}

}  // namespace

ScenarioInputs synthesize_inputs(const SynthOptions& o) {
  if (o.n_lines < 1 || o.stations_per_line < 1 || o.points_per_station < 1) {
    throw ConfigError("synthesis counts must be at least 1");
  }
  if (!(o.demand_scale >= 0.0)) throw ConfigError("demand scale must be non-negative");

  ScenarioInputs in;
  in.params.seed = o.seed;
  Rng geo(derive_seed(o.seed, Stream::Synthesis, 0));
  Rng dem(derive_seed(o.seed, Stream::Synthesis, 1));

  int next_id = 1;
  for (int k = 0; k < o.n_lines; ++k) {
    const double theta = k * std::numbers::pi / o.n_lines;
    TrainLine line{k + 1, {}, {}};
    for (int i = 0; i < o.stations_per_line; ++i) {
      const double off = (i - (o.stations_per_line - 1) / 2.0) * kStationSpacingKm;
      const LatLon p = offset_km(kCentre, off * std::cos(theta), off * std::sin(theta));
      Station s{next_id++, fmt::format("L{}-{:02}", k + 1, i + 1), {round7(p.lat), round7(p.lon)}, k + 1, i + 1};
      line.station_ids.push_back(s.id);
      if (i > 0) line.travel.push_back(kTrainLegMinutes);
      in.stations.push_back(std::move(s));
    }
    in.dispatches.push_back({k + 1, 1, 5 * 60.0});
    if (o.stations_per_line > 1) in.dispatches.push_back({k + 1, o.stations_per_line, 5 * 60.0});
    in.lines.push_back(std::move(line));
  }
  in.headways = HeadwayProfile({{5 * 60.0, 7 * 60.0, 15},
                                {7 * 60.0, 10 * 60.0, 5},
                                {10 * 60.0, 17 * 60.0, 10},
                                {17 * 60.0, 20 * 60.0, 5},
                                {20 * 60.0, 24 * 60.0, 15}});

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::lognormal_distribution<double> pop(std::log(220.0), kPopulationSigma);
  int point_id = 1;
  for (const auto& s : in.stations) {
    for (int j = 0; j < o.points_per_station; ++j) {
      const double r = kPointDiscKm * std::sqrt(unit(geo));
      const double a = 2.0 * std::numbers::pi * unit(geo);
      const LatLon p = offset_km(s.location, r * std::cos(a), r * std::sin(a));
      const double u = unit(geo);
      const double w = pop(geo);
      const long long population = u < 0.03 ? 0 : std::llround(w);
      in.points.push_back({point_id++, {round7(p.lat), round7(p.lon)}, population});
    }
  }

  std::lognormal_distribution<double> weight(0.0, 0.45);
  const double half = (o.stations_per_line - 1) / 2.0;
  for (const auto& s : in.stations) {
    const bool terminal = s.sequence == 1 || s.sequence == o.stations_per_line;
    const double from_centre = std::abs(s.sequence - 1 - half) * kStationSpacingKm;
    const double central = 1.0 + 0.6 * std::exp(-from_centre / 2.0);
    const double w = weight(dem) * (terminal ? 1.6 : 1.0) * central;
    // Outer stations lean residential: morning entries, evening exits.
    const double residential = std::clamp(0.3 + 0.5 * from_centre / std::max(half, 1.0), 0.0, 1.0);

    double entry_mass[kHoursPerDay] = {}, exit_mass[kHoursPerDay] = {};
    double total = 0.0;
    for (int h = 5; h <= 22; ++h) {
      const double am = peak(h, 8.5), pm = peak(h, 18.5);
      entry_mass[h] = kBaseMass + kEntryPeak * (residential * am + (1 - residential) * pm);
      exit_mass[h] = kBaseMass + kExitPeak * ((1 - residential) * am + residential * pm);
      total += entry_mass[h] + exit_mass[h];
    }
    for (int h = 5; h <= 22; ++h) {
      const double scale = kDailyVolume * w * o.demand_scale / total;
      const double me = entry_mass[h] * scale, mx = exit_mass[h] * scale;
      const long long entries = me > 0 ? std::poisson_distribution<long long>(me)(dem) : 0;
      const long long exits = mx > 0 ? std::poisson_distribution<long long>(mx)(dem) : 0;
      in.demand.push_back({s.id, h, entries, exits});
    }
  }
  return in;
}

Scenario synthesize_scenario(const SynthOptions& options) { return Scenario(synthesize_inputs(options)); }

ScenarioInputs reference_inputs(std::uint64_t seed) {
  SynthOptions o;
  o.seed = seed;
  o.points_per_station = 15;
  auto in = synthesize_inputs(o);
  in.params.total_fleet = 140;
  in.params.per_station_min = 2;
  in.params.per_station_max = 20;
  return in;
}

}  // namespace flm
