#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "flm/demand.hpp"
#include "flm/error.hpp"
#include "support.hpp"

using namespace flm;

namespace {

std::vector<DemandPoint> two_points(long long a, long long b) {
  return {{1, test::kOrigin, a, 1, 1.0}, {2, test::kOrigin, b, 1, 1.0}};
}

}  // namespace

TEST_CASE("last-mile batch size is Poisson with the hourly mean") {
  const auto all = two_points(100, 100);
  const std::vector<int> idx{0, 1};
  const EndpointSampler sampler(idx, all);
  Rng rng(42);
  const int draws = 10000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const auto b = sample_last_mile_batch(1, 300.0, 40, 1, 0.1, &sampler, rng);
    sum += static_cast<double>(b.size());
    sq += static_cast<double>(b.size() * b.size());
    for (const auto& r : b) {
      CHECK(r.time == 300.0);
      CHECK(r.kind == RequestKind::LastMile);
    }
  }
  const double mean = sum / draws;
  CHECK(mean >= 3.88);
  CHECK(mean <= 4.12);
  CHECK(sq / draws - mean * mean == doctest::Approx(4.0).epsilon(0.08));
}

TEST_CASE("first-mile count is the rounded share and times are uniform in the hour") {
  const auto all = two_points(100, 100);
  const std::vector<int> idx{0, 1};
  const EndpointSampler sampler(idx, all);
  Rng rng(5);
  double sum = 0.0;
  long long n = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto reqs = sample_first_mile_requests(1, 8, 100, 0.1, &sampler, rng);
    REQUIRE(reqs.size() == 10);
    for (const auto& r : reqs) {
      CHECK(r.time >= 480.0);
      CHECK(r.time < 540.0);
      sum += r.time - 480.0;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  CHECK(mean >= 29.4);
  CHECK(mean <= 30.6);
  CHECK(sample_first_mile_requests(1, 8, 104, 0.1, &sampler, rng).size() == 10);
  CHECK(sample_first_mile_requests(1, 8, 105, 0.1, &sampler, rng).size() == 11);
  CHECK(sample_first_mile_requests(1, 8, 0, 0.1, &sampler, rng).empty());
}

TEST_CASE("endpoints are drawn in proportion to population") {
  const auto all = two_points(300, 100);
  const std::vector<int> idx{0, 1};
  const EndpointSampler sampler(idx, all);
  Rng rng(9);
  int a = 0;
  const int draws = 40000;
  for (int i = 0; i < draws; ++i) a += sampler(rng) == 0;
  const double freq = static_cast<double>(a) / draws;
  CHECK(freq >= 0.75 - 0.0075);
  CHECK(freq <= 0.75 + 0.0075);
}

TEST_CASE("sampler edge cases") {
  Rng rng(1);
  SUBCASE("single point always chosen") {
    const auto all = two_points(50, 50);
    const std::vector<int> idx{1};
    for (int i = 0; i < 100; ++i) CHECK(sample_endpoint(idx, all, rng) == 1);
  }
  SUBCASE("zero population never chosen") {
    const auto all = two_points(0, 7);
    const std::vector<int> idx{0, 1};
    const EndpointSampler s(idx, all);
    for (int i = 0; i < 1000; ++i) CHECK(s(rng) == 1);
  }
  SUBCASE("empty set or all-zero population") {
    const auto all = two_points(0, 0);
    const std::vector<int> none;
    const std::vector<int> idx{0, 1};
    CHECK_THROWS_AS(EndpointSampler(none, all), SamplingError);
    CHECK_THROWS_AS(EndpointSampler(idx, all), SamplingError);
    CHECK_THROWS_AS(sample_endpoint(idx, all, rng), SamplingError);
  }
  SUBCASE("no servable points gives an empty batch and a warning") {
    DemandWarnings w;
    CHECK(sample_last_mile_batch(1, 300.0, 1000, 1, 0.1, nullptr, rng, &w).empty());
    CHECK(sample_first_mile_requests(1, 8, 1000, 0.1, nullptr, rng, &w).empty());
    CHECK(w.stations_without_points + w.requests_skipped > 0);
  }
}

TEST_CASE("generated demand is sorted and numbered") {
  const Scenario sc(reference_inputs(1));
  const auto set = generate_demand(sc, replication_seed(1, 0));
  REQUIRE(!set.requests.empty());
  for (std::size_t i = 0; i < set.requests.size(); ++i) {
    CHECK(set.requests[i].id == static_cast<int>(i));
    if (i > 0) CHECK(set.requests[i - 1].time <= set.requests[i].time);
    const auto& r = set.requests[i];
    const auto s = sc.station_index(r.station_id);
    const auto& pts = sc.station_points(s);
    CHECK(std::find(pts.begin(), pts.end(), r.point) != pts.end());
    CHECK(r.time >= sc.params().service_start);
    CHECK(r.time < sc.params().service_end);
  }
  const auto again = generate_demand(sc, replication_seed(1, 0));
  REQUIRE(again.requests.size() == set.requests.size());
  for (std::size_t i = 0; i < set.requests.size(); ++i) {
    CHECK(again.requests[i].time == set.requests[i].time);
    CHECK(again.requests[i].point == set.requests[i].point);
  }
  const auto other = generate_demand(sc, replication_seed(1, 1));
  CHECK(other.requests.size() != set.requests.size());
}

TEST_CASE("a station's demand does not depend on which other stations run") {
  const Scenario sc(reference_inputs(1));
  const auto seed = replication_seed(3, 0);
  const auto full = generate_demand(sc, seed);
  const std::size_t s = 7;
  const std::vector<std::size_t> only{s};
  const auto part = generate_demand(sc, seed, only);
  std::vector<Request> from_full;
  for (const auto& r : full.requests) {
    if (r.station_id == sc.stations()[s].id) from_full.push_back(r);
  }
  REQUIRE(part.requests.size() == from_full.size());
  for (std::size_t i = 0; i < from_full.size(); ++i) {
    CHECK(part.requests[i].time == from_full[i].time);
    CHECK(part.requests[i].point == from_full[i].point);
    CHECK(part.requests[i].kind == from_full[i].kind);
  }
}

TEST_CASE("demand intensity tracks the hourly counts") {
  const Scenario sc(reference_inputs(1));
  double expected = 0.0;
  for (std::size_t s = 0; s < sc.station_count(); ++s) expected += sc.expected_flm_demand(s);
  double total = 0.0;
  const int reps = 5;
  for (int r = 0; r < reps; ++r) total += static_cast<double>(generate_demand(sc, replication_seed(11, r)).requests.size());
  // First-mile counts are rounded per hour, last-mile counts are Poisson; the mean stays close.
  CHECK(total / reps == doctest::Approx(expected).epsilon(0.15));
}
