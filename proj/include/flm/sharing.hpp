#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "flm/network.hpp"
#include "flm/scenario.hpp"

namespace flm {

using DistanceFn = std::function<double(NodeId, NodeId)>;

enum class StopRole { Dropoff, Pickup, DepotReturn };

struct RouteStop {
  NodeId node = 0;
  int request = -1;  // -1 for the depot return
  StopRole role = StopRole::Dropoff;
  Minutes eta = 0;
};

struct RoutePlan {
  int vehicle = -1;
  std::vector<RouteStop> stops;  // drops in visiting order, then the depot return
  double distance_km = 0.0;
};

struct CvrpDrop {
  int request = 0;
  NodeId node = 0;
};

struct CvrpResult {
  std::vector<RoutePlan> routes;
  std::vector<int> overflow;  // requests left queued, in batch order
  double total_km = 0.0;
  bool exact = false;
};

inline constexpr std::size_t kExactCvrpLimit = 10;

// Arrival at each drop may trail the direct ride from the depot by at most
// max_detour, counting earlier drops and their dwell.
struct DetourLimit {
  double speed_kmh = 21.2;
  Minutes dwell = 0.5;
  Minutes max_detour = 7.0;
};

// True when visiting `nodes` in order from `depot` respects `limit`.
bool drops_within_detour(NodeId depot, std::span<const NodeId> nodes, const DetourLimit& limit,
                         const DistanceFn& dist);

// Partitions the batch into depot-based routes of at most `capacity` drops and
// at most `fleet` routes, minimizing total distance. The batch is taken in the
// given (request-time) order and cut at fleet * capacity drops; the remainder
// is returned as overflow. Batches up to kExactCvrpLimit drops are solved
// exactly; larger ones use Clarke-Wright savings with a clustering fallback.
// With a detour limit, routes that break it are excluded; if the fleet cannot
// carry the whole batch within the limit, the latest requests overflow.
// Throws std::invalid_argument on an empty batch or capacity < 1.
CvrpResult solve_cvrp(NodeId depot, std::span<const CvrpDrop> batch, int fleet, int capacity,
                      const DistanceFn& dist, std::optional<DetourLimit> limit = std::nullopt);

// Shortest closed tour depot -> nodes (some order) -> depot; returns the order
// as indices into `nodes` and writes the length to `length`.
std::vector<std::size_t> best_route_order(NodeId depot, std::span<const NodeId> nodes, const DistanceFn& dist,
                                          double& length);

// Fills stop ETAs for a route leaving the depot at `start`; each stop's ETA is
// its arrival time, and every drop or pickup adds `dwell` before departure.
void project_route(RoutePlan& plan, NodeId depot, Minutes start, double speed_kmh, Minutes dwell,
                   const DistanceFn& dist);

struct SharingParams {
  Minutes max_wait = 7.0;
  Minutes max_detour = 7.0;
  double speed_kmh = 21.2;
  Minutes dwell = 0.5;
  int capacity = 3;
};

struct OnboardPassenger {
  int request = 0;
  Minutes board_time = 0;
  Minutes direct_minutes = 0;  // solo ride from their pickup to the station
};

struct FmCandidate {
  int request = 0;
  NodeId node = 0;
  Minutes request_time = 0;
};

struct InsertionDecision {
  bool accept = false;
  Minutes pickup_eta = 0;   // arrival at the candidate's pickup
  Minutes station_eta = 0;  // arrival back at the station with the candidate on board
};

// A vehicle at `here` (time `now`, carrying `onboard`) considers picking up
// `candidate` next and then driving to `station`. Accepts iff there is room,
// the candidate's wait at the projected pickup stays below max_wait, and no
// onboard passenger's ride exceeds their direct ride by more than max_detour.
InsertionDecision feasible_fm_insertion(NodeId here, Minutes now, std::span<const OnboardPassenger> onboard,
                                        const FmCandidate& candidate, NodeId station, const SharingParams& params,
                                        const DistanceFn& dist);

// After the last drop of a route: the oldest queued first-mile request whose
// wait at the projected pickup is below max_wait, or nullopt to head back.
// Returns an index into `queue`.
std::optional<std::size_t> next_action_joint(NodeId here, Minutes now, std::span<const FmCandidate> queue,
                                             const SharingParams& params, const DistanceFn& dist);

}  // namespace flm
