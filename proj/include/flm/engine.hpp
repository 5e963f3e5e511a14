#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "flm/demand.hpp"
#include "flm/scenario.hpp"
#include "flm/sharing.hpp"

namespace flm {

enum class Mode { None, LastMile, FirstMile, Joint };

const char* to_string(Mode mode);
// Accepts none, lm, fm, joint. Throws ConfigError otherwise.
Mode parse_mode(std::string_view text);

enum class VehicleState {
  AtMetroStation,
  MovingToDestination,
  Offboarding,
  MovingToStation,
  MovingToOrigin,
  Pickup,
  MovingToStationFull,
  LMRequestsServed,
};

const char* to_string(VehicleState state);
VehicleState parse_vehicle_state(std::string_view text);

enum class Outcome { Pending, Served, Lost };

const char* to_string(Outcome outcome);

struct RequestRecord {
  Request request;
  Outcome outcome = Outcome::Pending;
  Minutes wait = 0;  // assignment time - request time, or max wait when lost
  Minutes ride = 0;
  int shared_n = 0;  // distinct passengers on the trip that carried it
  int vehicle = -1;
  Minutes assigned_at = -1;
  Minutes board = -1;
  Minutes alight = -1;
  int point_id = 0;
  double direct_km = 0.0;
};

struct VehicleLeg {
  int vehicle = 0;
  Minutes t0 = 0;
  Minutes t1 = 0;
  VehicleState state = VehicleState::AtMetroStation;
  double km = 0.0;
  int station_id = 0;
};

struct ParkingSample {
  int station_id = 0;
  int minute = 0;
  int idle = 0;
};

// A maximal stretch during which a vehicle carries at least one passenger.
struct TripRecord {
  int trip = 0;
  int vehicle = 0;
  int station_id = 0;
  Minutes t0 = 0;
  Minutes t1 = 0;
  int passengers = 0;
};

struct PassengerEvent {
  Minutes time = 0;
  int vehicle = 0;
  int request = 0;
  bool board = true;
  int load = 0;  // after the event
};

struct SimOutput {
  Mode mode = Mode::None;
  std::uint64_t seed = 0;
  Minutes horizon_start = 0;
  Minutes horizon_end = 0;
  std::vector<int> station_ids;
  std::vector<int> allocation;  // by station index
  std::vector<int> vehicle_station;  // station id of each vehicle
  std::vector<RequestRecord> requests;
  std::vector<VehicleLeg> legs;
  std::vector<ParkingSample> parking;
  std::vector<TripRecord> trips;
  std::vector<PassengerEvent> events;
  DemandWarnings warnings;

  long long served() const;
  long long lost() const;
};

struct SimOptions {
  bool enforce_bounds = true;  // reject allocations outside the per-station bounds
  bool sample_parking = true;
  std::vector<std::size_t> stations;  // simulate only these (all when empty)
};

// One seeded run. Single-threaded; independent instances may run concurrently
// over the same Scenario.
class Simulation {
 public:
  enum class EventKind { TrainArrival, FirstMileRequest, VehicleArrived, RetryAssignment, WaitExpiry, SampleParking };
  enum class Signal { LastMileTrip, FirstMileTrip, Arrival, DwellDone };

  struct Assignment {
    int vehicle = 0;
    std::vector<int> requests;
  };

  // Demand is drawn from `seed` (a replication seed).
  Simulation(const Scenario& scenario, std::span<const int> allocation, Mode mode, std::uint64_t seed,
             SimOptions options = {});
  // Runs over an explicit request list instead; ids must be 0..n-1 in order.
  Simulation(const Scenario& scenario, std::span<const int> allocation, Mode mode, std::vector<Request> requests,
             SimOptions options = {});

  SimOutput run();

  // Processes the next event; false when the queue is empty.
  bool step();
  Minutes now() const noexcept { return now_; }

  // Puts a request in its station queue and schedules its expiry and a retry.
  void enqueue(int request, Minutes now);
  // Matches idle vehicles with queued requests of one station, oldest first.
  std::vector<Assignment> dispatch_fifo(std::size_t station, Minutes now);
  // Marks a still-pending request lost; no-op once assigned. Throws
  // std::logic_error if the request was already lost.
  void on_wait_expiry(int request, Minutes now);
  // Fires one statechart edge. Throws std::logic_error for a pair with no edge.
  void advance_vehicle(int vehicle, Signal signal, Minutes now);

  VehicleState vehicle_state(int vehicle) const { return vehicles_.at(static_cast<std::size_t>(vehicle)).state; }
  int vehicle_load(int vehicle) const;
  const RequestRecord& record(int request) const { return records_.at(static_cast<std::size_t>(request)); }
  std::size_t vehicle_count() const noexcept { return vehicles_.size(); }
  std::size_t idle_count(std::size_t station) const { return stations_.at(station).idle.size(); }
  long long lost_count(std::size_t station, int hour, RequestKind kind) const;

 private:
  struct Event {
    Minutes time;
    int priority;
    std::uint64_t seq;
    EventKind kind;
    int a;

    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (priority != o.priority) return priority > o.priority;
      return seq > o.seq;
    }
  };

  struct Vehicle {
    int id = 0;
    std::size_t station = 0;
    VehicleState state = VehicleState::AtMetroStation;
    NodeId node = 0;
    Minutes since = 0;
    double leg_km = 0.0;
    double odometer = 0.0;
    std::vector<RouteStop> plan;
    std::size_t next_stop = 0;
    std::vector<int> onboard_lm;
    std::vector<OnboardPassenger> onboard_fm;
    int pickup_request = -1;
    bool return_leg = false;
    int trip = -1;
    std::vector<int> trip_passengers;
  };

  struct StationState {
    std::deque<int> idle;
    std::deque<int> fm_queue;
    std::deque<int> lm_queue;
    bool retry_scheduled = false;
    std::array<std::array<long long, 2>, kHoursPerDay> lost{};
  };

  enum class Status { Waiting, Assigned, Lost };

  void init(std::span<const int> allocation);
  void schedule(Minutes t, EventKind kind, int a);
  void schedule_retry(std::size_t station, Minutes t);
  void handle(const Event& e);
  double dist(NodeId a, NodeId b) const;
  Minutes travel(NodeId a, NodeId b) const;
  SharingParams sharing_params() const;

  std::optional<int> oldest_assignable(std::deque<int>& queue, Minutes now);
  void assign(int request, int vehicle, Minutes now);
  void set_state(Vehicle& v, VehicleState s, Minutes now);
  void move_to(Vehicle& v, VehicleState s, NodeId target, Minutes now);
  void board(Vehicle& v, int request, Minutes now);
  void alight(Vehicle& v, int request, Minutes now);
  void start_pickup_leg(Vehicle& v, int request, Minutes now, bool return_leg);
  void after_drop(Vehicle& v, Minutes now);
  void close_legs(Minutes end);

  const Scenario& scenario_;
  Mode mode_;
  std::uint64_t seed_;
  SimOptions options_;
  std::vector<std::size_t> active_;
  std::vector<char> is_active_;
  std::vector<int> allocation_;

  std::vector<Request> requests_;
  std::vector<RequestRecord> records_;
  std::vector<Status> status_;
  std::vector<std::vector<int>> train_batches_;  // last-mile requests per TrainArrival event

  std::vector<Vehicle> vehicles_;
  std::vector<StationState> stations_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  Minutes now_ = 0;

  SimOutput out_;
};

// Convenience wrapper: full run over the scenario.
SimOutput run(const Scenario& scenario, std::span<const int> allocation, Mode mode, std::uint64_t seed,
              SimOptions options = {});

// Runs only one station's subsystem with `supply` vehicles there.
SimOutput run_station(const Scenario& scenario, std::size_t station, int supply, Mode mode, std::uint64_t seed);

// CSV exports: requests.csv, vehicle_legs.csv, parking.csv, trips.csv, events.csv.
void write_output(const SimOutput& output, const std::filesystem::path& dir);

}  // namespace flm
