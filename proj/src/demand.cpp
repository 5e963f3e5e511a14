#include "flm/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <optional>

#include "flm/error.hpp"

namespace flm {

const char* to_string(RequestKind kind) { return kind == RequestKind::FirstMile ? "FM" : "LM"; }

EndpointSampler::EndpointSampler(std::span<const int> points, std::span<const DemandPoint> all)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) throw SamplingError("no demand points to sample from");
  std::vector<double> w;
  w.reserve(points_.size());
  double total = 0.0;
  for (int p : points_) {
    const auto pop = all[static_cast<std::size_t>(p)].population;
    w.push_back(static_cast<double>(pop));
    total += static_cast<double>(pop);
  }
  if (!(total > 0.0)) throw SamplingError("demand points have zero total population");
  dist_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

int EndpointSampler::operator()(Rng& rng) const { return points_[dist_(rng)]; }

int sample_endpoint(std::span<const int> points, std::span<const DemandPoint> all, Rng& rng) {
  return EndpointSampler(points, all)(rng);
}

std::vector<Request> sample_last_mile_batch(int station_id, Minutes arrival, long long exits,
                                            int trains_in_hour, double flm_share,
                                            const EndpointSampler* sampler, Rng& rng,
                                            DemandWarnings* warnings) {
  std::vector<Request> out;
  if (exits <= 0) return out;
  if (trains_in_hour < 1) {
    if (warnings) ++warnings->hours_without_trains;
    return out;
  }
  const double mean = static_cast<double>(exits) / trains_in_hour * flm_share;
  const long long n = std::poisson_distribution<long long>(mean)(rng);
  if (!sampler) {
    if (warnings) warnings->requests_skipped += n;
    return out;
  }
  for (long long i = 0; i < n; ++i) {
    out.push_back({0, RequestKind::LastMile, station_id, (*sampler)(rng), arrival});
  }
  return out;
}

std::vector<Request> sample_first_mile_requests(int station_id, int hour, long long entries,
                                                double flm_share, const EndpointSampler* sampler,
                                                Rng& rng, DemandWarnings* warnings) {
  std::vector<Request> out;
  const long long n = std::llround(static_cast<double>(entries) * flm_share);
  if (n <= 0) return out;
  if (!sampler) {
    if (warnings) warnings->requests_skipped += n;
    return out;
  }
  std::uniform_real_distribution<double> offset(0.0, 60.0);
  for (long long i = 0; i < n; ++i) {
    const Minutes t = hour * 60.0 + offset(rng);
    out.push_back({0, RequestKind::FirstMile, station_id, (*sampler)(rng), t});
  }
  return out;
}

std::vector<Request> generate_station_demand(const Scenario& scenario, std::size_t station,
                                             std::uint64_t replication_seed, DemandWarnings* warnings) {
  const auto& st = scenario.stations().at(station);
  const double share = scenario.params().flm_share;
  Rng rng(derive_seed(replication_seed, Stream::Demand, static_cast<std::uint64_t>(st.id)));

  std::optional<EndpointSampler> sampler;
  try {
    sampler.emplace(scenario.station_points(station), scenario.points());
  } catch (const SamplingError&) {
    long long any = 0;
    for (int h = 0; h < kHoursPerDay; ++h) any += scenario.counts(station, h).entries + scenario.counts(station, h).exits;
    if (any > 0 && warnings) ++warnings->stations_without_points;
  }
  const EndpointSampler* s = sampler ? &*sampler : nullptr;

  std::vector<Request> out;
  for (const auto& [t, run] : scenario.train_calls(station)) {
    const int hour = static_cast<int>(std::floor(t / 60.0));
    auto batch = sample_last_mile_batch(st.id, t, scenario.counts(station, hour).exits,
                                        scenario.trains_in_hour(station, hour), share, s, rng, warnings);
    out.insert(out.end(), batch.begin(), batch.end());
  }
  for (int hour = 0; hour < kHoursPerDay; ++hour) {
    const auto& c = scenario.counts(station, hour);
    if (c.exits > 0 && scenario.trains_in_hour(station, hour) == 0 && warnings) ++warnings->hours_without_trains;
    auto fm = sample_first_mile_requests(st.id, hour, c.entries, share, s, rng, warnings);
    out.insert(out.end(), fm.begin(), fm.end());
  }
  return out;
}

DemandSet generate_demand(const Scenario& scenario, std::uint64_t replication_seed,
                          std::span<const std::size_t> stations) {
  std::vector<std::size_t> which(stations.begin(), stations.end());
  if (which.empty()) {
    for (std::size_t i = 0; i < scenario.station_count(); ++i) which.push_back(i);
  }
  DemandSet set;
  struct Keyed {
    Request r;
    std::size_t station;
    std::size_t seq;
  };
  std::vector<Keyed> all;
  for (std::size_t s : which) {
    auto reqs = generate_station_demand(scenario, s, replication_seed, &set.warnings);
    for (std::size_t i = 0; i < reqs.size(); ++i) all.push_back({reqs[i], s, i});
  }
  std::sort(all.begin(), all.end(), [](const Keyed& a, const Keyed& b) {
    if (a.r.time != b.r.time) return a.r.time < b.r.time;
    if (a.station != b.station) return a.station < b.station;
    if (a.r.kind != b.r.kind) return a.r.kind == RequestKind::LastMile;
    return a.seq < b.seq;
  });
  set.requests.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].r.id = static_cast<int>(i);
    set.requests.push_back(all[i].r);
  }
  return set;
}

}  // namespace flm
