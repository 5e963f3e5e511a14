#include "flm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <stdexcept>

#include "flm/error.hpp"

namespace flm {

namespace {

int priority(Simulation::EventKind k) { return static_cast<int>(k); }

int kind_index(RequestKind k) { return k == RequestKind::FirstMile ? 0 : 1; }

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::None: return "none";
    case Mode::LastMile: return "lm";
    case Mode::FirstMile: return "fm";
    case Mode::Joint: return "joint";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "none") return Mode::None;
  if (text == "lm") return Mode::LastMile;
  if (text == "fm") return Mode::FirstMile;
  if (text == "joint") return Mode::Joint;
  throw ConfigError(fmt::format("unknown mode '{}' (expected none, lm, fm or joint)", text));
}

const char* to_string(VehicleState state) {
  switch (state) {
    case VehicleState::AtMetroStation: return "AtMetroStation";
    case VehicleState::MovingToDestination: return "MovingToDestination";
    case VehicleState::Offboarding: return "Offboarding";
    case VehicleState::MovingToStation: return "MovingToStation";
    case VehicleState::MovingToOrigin: return "MovingToOrigin";
    case VehicleState::Pickup: return "Pickup";
    case VehicleState::MovingToStationFull: return "MovingToStationFull";
    case VehicleState::LMRequestsServed: return "LMRequestsServed";
  }
  return "?";
}

VehicleState parse_vehicle_state(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(VehicleState::LMRequestsServed); ++i) {
    const auto s = static_cast<VehicleState>(i);
    if (text == to_string(s)) return s;
  }
  throw ConfigError(fmt::format("unknown vehicle state '{}'", text));
}

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Pending: return "pending";
    case Outcome::Served: return "served";
    case Outcome::Lost: return "lost";
  }
  return "?";
}

long long SimOutput::served() const {
  return std::count_if(requests.begin(), requests.end(), [](const auto& r) { return r.outcome == Outcome::Served; });
}

long long SimOutput::lost() const {
  return std::count_if(requests.begin(), requests.end(), [](const auto& r) { return r.outcome == Outcome::Lost; });
}

Simulation::Simulation(const Scenario& scenario, std::span<const int> allocation, Mode mode, std::uint64_t seed,
                       SimOptions options)
    : scenario_(scenario), mode_(mode), seed_(seed), options_(std::move(options)) {
  active_ = options_.stations;
  std::sort(active_.begin(), active_.end());
  if (active_.empty()) {
    for (std::size_t i = 0; i < scenario.station_count(); ++i) active_.push_back(i);
  }
  auto demand = generate_demand(scenario, seed, active_);
  requests_ = std::move(demand.requests);
  out_.warnings = demand.warnings;
  init(allocation);
}

Simulation::Simulation(const Scenario& scenario, std::span<const int> allocation, Mode mode,
                       std::vector<Request> requests, SimOptions options)
    : scenario_(scenario), mode_(mode), seed_(0), options_(std::move(options)), requests_(std::move(requests)) {
  active_ = options_.stations;
  std::sort(active_.begin(), active_.end());
  if (active_.empty()) {
    for (std::size_t i = 0; i < scenario.station_count(); ++i) active_.push_back(i);
  }
  for (std::size_t i = 0; i < requests_.size(); ++i) {
    if (requests_[i].id != static_cast<int>(i)) throw ConfigError("request ids must be 0..n-1 in order");
  }
  init(allocation);
}

void Simulation::init(std::span<const int> allocation) {
  const auto& params = scenario_.params();
  const std::size_t n = scenario_.station_count();
  if (allocation.size() != n) {
    throw ConfigError(fmt::format("allocation has {} entries for {} stations", allocation.size(), n));
  }
  is_active_.assign(n, 0);
  for (std::size_t s : active_) is_active_.at(s) = 1;
  allocation_.assign(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    const int x = allocation[s];
    if (x < 0) throw ConfigError(fmt::format("negative allocation at station {}", scenario_.stations()[s].id));
    if (!is_active_[s]) continue;
    if (options_.enforce_bounds && (x < params.per_station_min || x > params.per_station_max)) {
      throw ConfigError(fmt::format("allocation {} at station {} is outside [{}, {}]", x, scenario_.stations()[s].id,
                                    params.per_station_min, params.per_station_max));
    }
    allocation_[s] = x;
  }

  stations_.assign(n, {});
  const Minutes start = scenario_.horizon_start();
  for (std::size_t s : active_) {
    for (int k = 0; k < allocation_[s]; ++k) {
      Vehicle v;
      v.id = static_cast<int>(vehicles_.size());
      v.station = s;
      v.node = scenario_.station_node(s);
      v.since = start;
      stations_[s].idle.push_back(v.id);
      vehicles_.push_back(std::move(v));
    }
  }

  records_.resize(requests_.size());
  status_.assign(requests_.size(), Status::Waiting);
  std::map<std::pair<std::size_t, Minutes>, std::vector<int>> batches;
  for (const auto& r : requests_) {
    const std::size_t s = scenario_.station_index(r.station_id);
    if (!is_active_[s]) throw ConfigError(fmt::format("request {} belongs to an inactive station", r.id));
    auto& rec = records_[static_cast<std::size_t>(r.id)];
    rec.request = r;
    rec.point_id = scenario_.points().at(static_cast<std::size_t>(r.point)).id;
    rec.direct_km = dist(scenario_.station_node(s), scenario_.point_node(r.point));
    if (r.kind == RequestKind::LastMile) {
      batches[{s, r.time}].push_back(r.id);
    } else {
      schedule(r.time, EventKind::FirstMileRequest, r.id);
    }
  }
  for (auto& [key, ids] : batches) {
    schedule(key.second, EventKind::TrainArrival, static_cast<int>(train_batches_.size()));
    train_batches_.push_back(std::move(ids));
  }
  if (options_.sample_parking) {
    for (auto m = static_cast<int>(std::ceil(start)); m < scenario_.horizon_end(); ++m) {
      schedule(m, EventKind::SampleParking, m);
    }
  }
  now_ = start;
}

void Simulation::schedule(Minutes t, EventKind kind, int a) { events_.push({t, priority(kind), seq_++, kind, a}); }

void Simulation::schedule_retry(std::size_t station, Minutes t) {
  auto& st = stations_[station];
  if (st.retry_scheduled) return;
  st.retry_scheduled = true;
  schedule(t, EventKind::RetryAssignment, static_cast<int>(station));
}

double Simulation::dist(NodeId a, NodeId b) const { return scenario_.oracle().distance(a, b); }

Minutes Simulation::travel(NodeId a, NodeId b) const {
  return travel_time(dist(a, b), scenario_.params().vehicle_speed);
}

SharingParams Simulation::sharing_params() const {
  const auto& p = scenario_.params();
  return {p.max_waiting_time, p.max_detour_time, p.vehicle_speed, p.dwell_time, p.vehicle_capacity};
}

int Simulation::vehicle_load(int vehicle) const {
  const auto& v = vehicles_.at(static_cast<std::size_t>(vehicle));
  return static_cast<int>(v.onboard_lm.size() + v.onboard_fm.size());
}

long long Simulation::lost_count(std::size_t station, int hour, RequestKind kind) const {
  return stations_.at(station).lost.at(static_cast<std::size_t>(hour))[static_cast<std::size_t>(kind_index(kind))];
}

bool Simulation::step() {
  if (events_.empty()) return false;
  const Event e = events_.top();
  events_.pop();
  now_ = e.time;
  handle(e);
  return true;
}

void Simulation::handle(const Event& e) {
  switch (e.kind) {
    case EventKind::TrainArrival:
      for (int r : train_batches_[static_cast<std::size_t>(e.a)]) enqueue(r, e.time);
      break;
    case EventKind::FirstMileRequest:
      enqueue(e.a, e.time);
      break;
    case EventKind::VehicleArrived: {
      const auto state = vehicles_[static_cast<std::size_t>(e.a)].state;
      const bool dwell = state == VehicleState::Offboarding || state == VehicleState::Pickup;
      advance_vehicle(e.a, dwell ? Signal::DwellDone : Signal::Arrival, e.time);
      break;
    }
    case EventKind::RetryAssignment:
      stations_[static_cast<std::size_t>(e.a)].retry_scheduled = false;
      dispatch_fifo(static_cast<std::size_t>(e.a), e.time);
      break;
    case EventKind::WaitExpiry:
      on_wait_expiry(e.a, e.time);
      break;
    case EventKind::SampleParking:
      for (std::size_t s : active_) {
        out_.parking.push_back({scenario_.stations()[s].id, e.a, static_cast<int>(stations_[s].idle.size())});
      }
      break;
  }
}

void Simulation::enqueue(int request, Minutes now) {
  const auto& r = requests_.at(static_cast<std::size_t>(request));
  const std::size_t s = scenario_.station_index(r.station_id);
  auto& st = stations_[s];
  (r.kind == RequestKind::FirstMile ? st.fm_queue : st.lm_queue).push_back(request);
  schedule(r.time + scenario_.params().max_waiting_time, EventKind::WaitExpiry, request);
  schedule_retry(s, now);
}

std::optional<int> Simulation::oldest_assignable(std::deque<int>& queue, Minutes now) {
  while (!queue.empty() && status_[static_cast<std::size_t>(queue.front())] != Status::Waiting) queue.pop_front();
  for (int r : queue) {
    if (status_[static_cast<std::size_t>(r)] != Status::Waiting) continue;
    if (now - requests_[static_cast<std::size_t>(r)].time < scenario_.params().max_waiting_time) return r;
  }
  return std::nullopt;
}

void Simulation::assign(int request, int vehicle, Minutes now) {
  auto& rec = records_.at(static_cast<std::size_t>(request));
  auto& status = status_[static_cast<std::size_t>(request)];
  if (status != Status::Waiting) throw std::logic_error(fmt::format("request {} assigned twice", request));
  status = Status::Assigned;
  rec.assigned_at = now;
  rec.wait = now - rec.request.time;
  rec.vehicle = vehicle;
}

std::vector<Simulation::Assignment> Simulation::dispatch_fifo(std::size_t station, Minutes now) {
  std::vector<Assignment> out;
  auto& st = stations_.at(station);
  const auto& params = scenario_.params();
  const NodeId depot = scenario_.station_node(station);
  while (!st.idle.empty()) {
    const auto fm = oldest_assignable(st.fm_queue, now);
    const auto lm = oldest_assignable(st.lm_queue, now);
    if (!fm && !lm) break;
    bool take_lm = lm.has_value();
    if (fm && lm) {
      const auto& a = requests_[static_cast<std::size_t>(*lm)];
      const auto& b = requests_[static_cast<std::size_t>(*fm)];
      take_lm = a.time < b.time || (a.time == b.time && a.id < b.id);
    }

    if (take_lm && (mode_ == Mode::LastMile || mode_ == Mode::Joint)) {
      std::vector<CvrpDrop> batch;
      for (int r : st.lm_queue) {
        if (status_[static_cast<std::size_t>(r)] != Status::Waiting) continue;
        if (!(now - requests_[static_cast<std::size_t>(r)].time < params.max_waiting_time)) continue;
        batch.push_back({r, scenario_.point_node(requests_[static_cast<std::size_t>(r)].point)});
      }
      auto result = solve_cvrp(depot, batch, static_cast<int>(st.idle.size()), params.vehicle_capacity,
                               [this](NodeId a, NodeId b) { return dist(a, b); },
                               DetourLimit{params.vehicle_speed, params.dwell_time, params.max_detour_time});
      for (auto& route : result.routes) {
        const int vid = st.idle.front();
        st.idle.pop_front();
        Assignment a{vid, {}};
        for (const auto& stop : route.stops) {
          if (stop.role == StopRole::Dropoff) {
            assign(stop.request, vid, now);
            a.requests.push_back(stop.request);
          }
        }
        auto& v = vehicles_[static_cast<std::size_t>(vid)];
        project_route(route, depot, now, params.vehicle_speed, params.dwell_time,
                      [this](NodeId x, NodeId y) { return dist(x, y); });
        v.plan = std::move(route.stops);
        advance_vehicle(vid, Signal::LastMileTrip, now);
        out.push_back(std::move(a));
      }
      continue;
    }

    const int r = take_lm ? *lm : *fm;
    const int vid = st.idle.front();
    st.idle.pop_front();
    assign(r, vid, now);
    auto& v = vehicles_[static_cast<std::size_t>(vid)];
    if (take_lm) {
      v.plan = {{scenario_.point_node(requests_[static_cast<std::size_t>(r)].point), r, StopRole::Dropoff, 0},
                {depot, -1, StopRole::DepotReturn, 0}};
      advance_vehicle(vid, Signal::LastMileTrip, now);
    } else {
      v.pickup_request = r;
      advance_vehicle(vid, Signal::FirstMileTrip, now);
    }
    out.push_back({vid, {r}});
  }
  return out;
}

void Simulation::on_wait_expiry(int request, Minutes now) {
  (void)now;
  auto& status = status_.at(static_cast<std::size_t>(request));
  if (status == Status::Lost) throw std::logic_error(fmt::format("request {} expired twice", request));
  if (status == Status::Assigned) return;
  status = Status::Lost;
  auto& rec = records_[static_cast<std::size_t>(request)];
  rec.outcome = Outcome::Lost;
  rec.wait = scenario_.params().max_waiting_time;
  const std::size_t s = scenario_.station_index(rec.request.station_id);
  const int hour = std::clamp(static_cast<int>(std::floor(rec.request.time / 60.0)), 0, kHoursPerDay - 1);
  ++stations_[s].lost[static_cast<std::size_t>(hour)][static_cast<std::size_t>(kind_index(rec.request.kind))];
}

void Simulation::set_state(Vehicle& v, VehicleState s, Minutes now) {
  out_.legs.push_back({v.id, v.since, now, v.state, v.leg_km, scenario_.stations()[v.station].id});
  v.state = s;
  v.since = now;
  v.leg_km = 0.0;
}

void Simulation::move_to(Vehicle& v, VehicleState s, NodeId target, Minutes now) {
  set_state(v, s, now);
  const double km = dist(v.node, target);
  v.leg_km = km;
  v.odometer += km;
  v.node = target;
  schedule(now + travel_time(km, scenario_.params().vehicle_speed), EventKind::VehicleArrived, v.id);
}

void Simulation::board(Vehicle& v, int request, Minutes now) {
  auto& rec = records_.at(static_cast<std::size_t>(request));
  if (vehicle_load(v.id) == 0) {
    v.trip = static_cast<int>(out_.trips.size());
    out_.trips.push_back({v.trip, v.id, scenario_.stations()[v.station].id, now, now, 0});
    v.trip_passengers.clear();
  }
  rec.board = now;
  if (rec.request.kind == RequestKind::LastMile) {
    v.onboard_lm.push_back(request);
  } else {
    v.onboard_fm.push_back({request, now, travel_time(rec.direct_km, scenario_.params().vehicle_speed)});
  }
  v.trip_passengers.push_back(request);
  const int load = vehicle_load(v.id);
  if (load > scenario_.params().vehicle_capacity) {
    throw std::logic_error(fmt::format("vehicle {} over capacity", v.id));
  }
  out_.events.push_back({now, v.id, request, true, load});
}

void Simulation::alight(Vehicle& v, int request, Minutes now) {
  auto& rec = records_.at(static_cast<std::size_t>(request));
  if (rec.request.kind == RequestKind::LastMile) {
    std::erase(v.onboard_lm, request);
  } else {
    std::erase_if(v.onboard_fm, [&](const OnboardPassenger& p) { return p.request == request; });
  }
  rec.alight = now;
  rec.ride = now - rec.board;
  rec.outcome = Outcome::Served;
  const int load = vehicle_load(v.id);
  out_.events.push_back({now, v.id, request, false, load});
  if (load == 0) {
    auto& trip = out_.trips.at(static_cast<std::size_t>(v.trip));
    trip.t1 = now;
    trip.passengers = static_cast<int>(v.trip_passengers.size());
    for (int p : v.trip_passengers) records_[static_cast<std::size_t>(p)].shared_n = trip.passengers;
    v.trip = -1;
    v.trip_passengers.clear();
  }
}

void Simulation::start_pickup_leg(Vehicle& v, int request, Minutes now, bool return_leg) {
  v.pickup_request = request;
  v.return_leg = return_leg;
  move_to(v, VehicleState::MovingToOrigin, scenario_.point_node(requests_[static_cast<std::size_t>(request)].point),
          now);
}

void Simulation::after_drop(Vehicle& v, Minutes now) {
  const NodeId depot = scenario_.station_node(v.station);
  v.plan.clear();
  v.next_stop = 0;
  if (mode_ != Mode::Joint) {
    move_to(v, VehicleState::MovingToStation, depot, now);
    return;
  }
  set_state(v, VehicleState::LMRequestsServed, now);
  auto& st = stations_[v.station];
  std::vector<FmCandidate> queue;
  for (int r : st.fm_queue) {
    if (status_[static_cast<std::size_t>(r)] != Status::Waiting) continue;
    const auto& req = requests_[static_cast<std::size_t>(r)];
    queue.push_back({r, scenario_.point_node(req.point), req.time});
  }
  const auto pick =
      next_action_joint(v.node, now, queue, sharing_params(), [this](NodeId a, NodeId b) { return dist(a, b); });
  if (pick) {
    assign(queue[*pick].request, v.id, now);
    start_pickup_leg(v, queue[*pick].request, now, true);
  } else {
    move_to(v, VehicleState::MovingToStation, depot, now);
  }
}

void Simulation::advance_vehicle(int vehicle, Signal signal, Minutes now) {
  auto& v = vehicles_.at(static_cast<std::size_t>(vehicle));
  const auto& params = scenario_.params();
  const NodeId depot = scenario_.station_node(v.station);
  const auto bad = [&] {
    return std::logic_error(fmt::format("vehicle {}: no transition from {} on signal {}", vehicle, to_string(v.state),
                                        static_cast<int>(signal)));
  };

  switch (v.state) {
    case VehicleState::AtMetroStation:
      if (signal == Signal::LastMileTrip) {
        if (v.plan.empty() || v.plan.front().role != StopRole::Dropoff) throw bad();
        for (const auto& stop : v.plan) {
          if (stop.role == StopRole::Dropoff) board(v, stop.request, now);
        }
        v.next_stop = 0;
        move_to(v, VehicleState::MovingToDestination, v.plan.front().node, now);
        return;
      }
      if (signal == Signal::FirstMileTrip) {
        if (v.pickup_request < 0) throw bad();
        start_pickup_leg(v, v.pickup_request, now, false);
        return;
      }
      break;
    case VehicleState::MovingToDestination:
      if (signal == Signal::Arrival) {
        set_state(v, VehicleState::Offboarding, now);
        alight(v, v.plan.at(v.next_stop).request, now);
        schedule(now + params.dwell_time, EventKind::VehicleArrived, v.id);
        return;
      }
      break;
    case VehicleState::Offboarding:
      if (signal == Signal::DwellDone) {
        ++v.next_stop;
        if (v.next_stop < v.plan.size() && v.plan[v.next_stop].role == StopRole::Dropoff) {
          move_to(v, VehicleState::MovingToDestination, v.plan[v.next_stop].node, now);
        } else {
          after_drop(v, now);
        }
        return;
      }
      break;
    case VehicleState::MovingToOrigin:
      if (signal == Signal::Arrival) {
        set_state(v, VehicleState::Pickup, now);
        schedule(now + params.dwell_time, EventKind::VehicleArrived, v.id);
        return;
      }
      break;
    case VehicleState::Pickup:
      if (signal == Signal::DwellDone) {
        board(v, v.pickup_request, now);
        v.pickup_request = -1;
        const bool pooling = mode_ == Mode::FirstMile || mode_ == Mode::Joint;
        if (pooling && !v.return_leg && vehicle_load(v.id) < params.vehicle_capacity) {
          const auto sp = sharing_params();
          const DistanceFn fn = [this](NodeId a, NodeId b) { return dist(a, b); };
          for (int r : stations_[v.station].fm_queue) {
            if (status_[static_cast<std::size_t>(r)] != Status::Waiting) continue;
            const auto& req = requests_[static_cast<std::size_t>(r)];
            const FmCandidate c{r, scenario_.point_node(req.point), req.time};
            const auto d = feasible_fm_insertion(v.node, now, v.onboard_fm, c, depot, sp, fn);
            if (d.accept) {
              assign(r, v.id, now);
              start_pickup_leg(v, r, now, false);
              return;
            }
          }
        }
        v.return_leg = false;
        move_to(v, VehicleState::MovingToStationFull, depot, now);
        return;
      }
      break;
    case VehicleState::MovingToStation:
    case VehicleState::MovingToStationFull:
      if (signal == Signal::Arrival) {
        const auto riders = v.onboard_fm;
        for (const auto& p : riders) alight(v, p.request, now);
        if (!v.onboard_lm.empty()) throw std::logic_error("last-mile passenger returned to station");
        set_state(v, VehicleState::AtMetroStation, now);
        v.return_leg = false;
        stations_[v.station].idle.push_back(v.id);
        schedule_retry(v.station, now);
        return;
      }
      break;
    case VehicleState::LMRequestsServed:
      break;
  }
  throw bad();
}

void Simulation::close_legs(Minutes end) {
  for (auto& v : vehicles_) {
    if (v.state != VehicleState::AtMetroStation) {
      throw std::logic_error(fmt::format("vehicle {} still {} at the end of the run", v.id, to_string(v.state)));
    }
    out_.legs.push_back({v.id, v.since, std::max(end, v.since), v.state, v.leg_km, scenario_.stations()[v.station].id});
  }
}

SimOutput Simulation::run() {
  while (step()) {
  }
  for (std::size_t i = 0; i < status_.size(); ++i) {
    if (status_[i] == Status::Waiting) throw std::logic_error(fmt::format("request {} never resolved", i));
    if (records_[i].outcome == Outcome::Pending) throw std::logic_error(fmt::format("request {} not delivered", i));
  }
  close_legs(std::max(scenario_.horizon_end(), now_));

  out_.mode = mode_;
  out_.seed = seed_;
  out_.horizon_start = scenario_.horizon_start();
  out_.horizon_end = scenario_.horizon_end();
  for (const auto& s : scenario_.stations()) out_.station_ids.push_back(s.id);
  out_.allocation = allocation_;
  for (const auto& v : vehicles_) out_.vehicle_station.push_back(scenario_.stations()[v.station].id);
  out_.requests = records_;
  std::stable_sort(out_.legs.begin(), out_.legs.end(),
                   [](const VehicleLeg& a, const VehicleLeg& b) { return a.vehicle < b.vehicle; });
  return std::move(out_);
}

SimOutput run(const Scenario& scenario, std::span<const int> allocation, Mode mode, std::uint64_t seed,
              SimOptions options) {
  return Simulation(scenario, allocation, mode, seed, std::move(options)).run();
}

SimOutput run_station(const Scenario& scenario, std::size_t station, int supply, Mode mode, std::uint64_t seed) {
  std::vector<int> allocation(scenario.station_count(), 0);
  allocation.at(station) = supply;
  SimOptions options;
  options.enforce_bounds = false;
  options.sample_parking = false;
  options.stations = {station};
  return Simulation(scenario, allocation, mode, seed, std::move(options)).run();
}

}  // namespace flm
