#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "flm/rng.hpp"
#include "flm/scenario.hpp"

namespace flm {

enum class RequestKind { FirstMile, LastMile };

const char* to_string(RequestKind kind);

struct Request {
  int id = 0;
  RequestKind kind = RequestKind::LastMile;
  int station_id = 0;
  int point = 0;  // index into Scenario::points()
  Minutes time = 0;
};

// Population-weighted choice over a station's demand points.
class EndpointSampler {
 public:
  // `points` are indices into `all`. Throws SamplingError when empty or when
  // every population is zero.
  EndpointSampler(std::span<const int> points, std::span<const DemandPoint> all);

  int operator()(Rng& rng) const;

 private:
  std::vector<int> points_;
  mutable std::discrete_distribution<std::size_t> dist_;
};

// Single draw without building a sampler; same errors as EndpointSampler.
int sample_endpoint(std::span<const int> points, std::span<const DemandPoint> all, Rng& rng);

struct DemandWarnings {
  int stations_without_points = 0;  // demand present, nowhere to take it
  int hours_without_trains = 0;     // exits recorded in an hour with no train
  long long requests_skipped = 0;

  DemandWarnings& operator+=(const DemandWarnings& o) {
    stations_without_points += o.stations_without_points;
    hours_without_trains += o.hours_without_trains;
    requests_skipped += o.requests_skipped;
    return *this;
  }
};

// Poisson(exits / trains * flm_share) requests, all stamped at `arrival`.
// A null sampler means the station has no servable points: the batch is empty
// and counted in `warnings`.
std::vector<Request> sample_last_mile_batch(int station_id, Minutes arrival, long long exits,
                                            int trains_in_hour, double flm_share,
                                            const EndpointSampler* sampler, Rng& rng,
                                            DemandWarnings* warnings = nullptr);

// round(entries * flm_share) requests with times uniform over [hour, hour + 1).
std::vector<Request> sample_first_mile_requests(int station_id, int hour, long long entries,
                                                double flm_share, const EndpointSampler* sampler,
                                                Rng& rng, DemandWarnings* warnings = nullptr);

struct DemandSet {
  std::vector<Request> requests;  // sorted by (time, station, kind, draw order); id = position
  DemandWarnings warnings;
};

// All requests of one station for a replication. The stream depends only on
// (replication seed, station id), so a single-station run sees exactly the
// requests that station gets in a full run.
std::vector<Request> generate_station_demand(const Scenario& scenario, std::size_t station,
                                             std::uint64_t replication_seed, DemandWarnings* warnings);

// Requests of every station listed in `stations` (all when empty), merged and
// numbered.
DemandSet generate_demand(const Scenario& scenario, std::uint64_t replication_seed,
                          std::span<const std::size_t> stations = {});

}  // namespace flm
