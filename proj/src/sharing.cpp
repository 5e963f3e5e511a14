#include "flm/sharing.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace flm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDetourSlack = 1e-9;

double route_length(NodeId depot, std::span<const NodeId> nodes, std::span<const std::size_t> order,
                    const DistanceFn& dist) {
  double len = 0.0;
  NodeId cur = depot;
  for (std::size_t i : order) {
    len += dist(cur, nodes[i]);
    cur = nodes[i];
  }
  return len + dist(cur, depot);
}

std::optional<std::vector<std::size_t>> feasible_order(NodeId depot, std::span<const NodeId> nodes,
                                                      const DetourLimit* limit, const DistanceFn& dist, double& length) {
  if (!limit) return best_route_order(depot, nodes, dist, length);
  if (nodes.size() > 8) {
    auto order = best_route_order(depot, nodes, dist, length);
    std::vector<NodeId> seq;
    for (std::size_t i : order) seq.push_back(nodes[i]);
    if (drops_within_detour(depot, seq, *limit, dist)) return order;
    return std::nullopt;
  }
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<std::vector<std::size_t>> best;
  std::vector<NodeId> seq(nodes.size());
  do {
    for (std::size_t i = 0; i < order.size(); ++i) seq[i] = nodes[order[i]];
    if (!drops_within_detour(depot, seq, *limit, dist)) continue;
    const double len = route_length(depot, nodes, order, dist);
    if (!best || len < length) {
      length = len;
      best = order;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

bool group_feasible(NodeId depot, std::span<const CvrpDrop> drops, std::span<const std::size_t> members,
                    const DetourLimit* limit, const DistanceFn& dist) {
  if (!limit) return true;
  std::vector<NodeId> nodes;
  for (std::size_t m : members) nodes.push_back(drops[m].node);
  double len = 0.0;
  return feasible_order(depot, nodes, limit, dist, len).has_value();
}

RoutePlan make_route(NodeId depot, std::span<const CvrpDrop> drops, std::vector<std::size_t> members,
                     const DetourLimit* limit, const DistanceFn& dist) {
  std::vector<NodeId> nodes;
  for (std::size_t m : members) nodes.push_back(drops[m].node);
  double len = 0.0;
  const auto order = feasible_order(depot, nodes, limit, dist, len);
  if (!order) throw std::logic_error("CVRP route has no order within the detour limit");
  RoutePlan plan;
  for (std::size_t i : *order) plan.stops.push_back({drops[members[i]].node, drops[members[i]].request, StopRole::Dropoff, 0});
  plan.stops.push_back({depot, -1, StopRole::DepotReturn, 0});
  plan.distance_km = len;
  return plan;
}

// Subset DP: cost of every feasible route (Held-Karp), then an optimal
// partition into at most `fleet` routes.
// Empty when no partition into at most `fleet` routes exists.
std::optional<std::vector<RoutePlan>> exact_cvrp(NodeId depot, std::span<const CvrpDrop> drops, int fleet,
                                                 int capacity, const DetourLimit* limit, const DistanceFn& dist) {
  const std::size_t n = drops.size();
  const std::size_t full = (std::size_t{1} << n) - 1;
  const auto cap = static_cast<unsigned>(capacity);

  std::vector<double> from_depot(n), to_depot(n);
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    from_depot[i] = dist(depot, drops[i].node);
    to_depot[i] = dist(drops[i].node, depot);
    for (std::size_t j = 0; j < n; ++j) d[i][j] = dist(drops[i].node, drops[j].node);
  }

  std::vector<std::vector<double>> g(full + 1, std::vector<double>(n, kInf));
  std::vector<std::vector<int>> parent(full + 1, std::vector<int>(n, -1));
  std::vector<double> cost(full + 1, kInf);
  std::vector<int> last(full + 1, -1);
  for (std::size_t i = 0; i < n; ++i) g[std::size_t{1} << i][i] = from_depot[i];
  for (std::size_t mask = 1; mask <= full; ++mask) {
    if (static_cast<unsigned>(std::popcount(mask)) > cap) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(mask >> j & 1) || g[mask][j] == kInf) continue;
      const double closed = g[mask][j] + to_depot[j];
      if (closed < cost[mask]) {
        cost[mask] = closed;
        last[mask] = static_cast<int>(j);
      }
      if (static_cast<unsigned>(std::popcount(mask)) == cap) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (mask >> k & 1) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double v = g[mask][j] + d[j][k];
        // The shortest prefix also arrives earliest, so pruning here keeps the DP exact.
        if (limit && travel_time(v, limit->speed_kmh) + std::popcount(mask) * limit->dwell -
                             travel_time(from_depot[k], limit->speed_kmh) >
                         limit->max_detour + kDetourSlack) {
          continue;
        }
        if (v < g[next][k]) {
          g[next][k] = v;
          parent[next][k] = static_cast<int>(j);
        }
      }
    }
  }

  const auto max_routes = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(fleet), n));
  std::vector<std::vector<double>> f(max_routes + 1, std::vector<double>(full + 1, kInf));
  std::vector<std::vector<std::size_t>> choice(max_routes + 1, std::vector<std::size_t>(full + 1, 0));
  f[0][0] = 0.0;
  for (std::size_t k = 1; k <= max_routes; ++k) {
    for (std::size_t mask = 1; mask <= full; ++mask) {
      const std::size_t low = mask & (~mask + 1);
      const std::size_t rest = mask ^ low;
      // Submasks of `rest` joined with the lowest bit, largest first.
      for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
        const std::size_t s = sub | low;
        if (cost[s] != kInf && f[k - 1][mask ^ s] != kInf) {
          const double v = f[k - 1][mask ^ s] + cost[s];
          if (v < f[k][mask]) {
            f[k][mask] = v;
            choice[k][mask] = s;
          }
        }
        if (sub == 0) break;
      }
    }
  }

  std::size_t best_k = 0;
  double best = kInf;
  for (std::size_t k = 1; k <= max_routes; ++k) {
    if (f[k][full] < best) {
      best = f[k][full];
      best_k = k;
    }
  }
  if (best_k == 0) return std::nullopt;

  std::vector<RoutePlan> routes;
  std::size_t mask = full;
  for (std::size_t k = best_k; k > 0; --k) {
    const std::size_t s = choice[k][mask];
    std::vector<std::size_t> order;
    std::size_t m = s;
    int j = last[s];
    while (j >= 0) {
      order.push_back(static_cast<std::size_t>(j));
      const int p = parent[m][static_cast<std::size_t>(j)];
      m ^= std::size_t{1} << j;
      j = p;
    }
    std::reverse(order.begin(), order.end());
    RoutePlan plan;
    for (std::size_t i : order) plan.stops.push_back({drops[i].node, drops[i].request, StopRole::Dropoff, 0});
    plan.stops.push_back({depot, -1, StopRole::DepotReturn, 0});
    plan.distance_km = cost[s];
    routes.push_back(std::move(plan));
    mask ^= s;
  }
  return routes;
}

std::vector<std::vector<std::size_t>> clarke_wright(NodeId depot, std::span<const CvrpDrop> drops, int capacity,
                                                    const DetourLimit* limit, const DistanceFn& dist) {
  const std::size_t n = drops.size();
  struct Saving {
    double value;
    std::size_t i, j;
  };
  std::vector<Saving> savings;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = dist(depot, drops[i].node) + dist(depot, drops[j].node) - dist(drops[i].node, drops[j].node);
      savings.push_back({s, i, j});
    }
  }
  std::stable_sort(savings.begin(), savings.end(), [](const Saving& a, const Saving& b) { return a.value > b.value; });

  std::vector<std::vector<std::size_t>> routes(n);
  std::vector<std::size_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) {
    routes[i] = {i};
    owner[i] = i;
  }
  for (const auto& s : savings) {
    if (s.value <= 0) break;
    const std::size_t a = owner[s.i], b = owner[s.j];
    if (a == b || routes[a].size() + routes[b].size() > static_cast<std::size_t>(capacity)) continue;
    auto& ra = routes[a];
    auto& rb = routes[b];
    // Join so that i and j become adjacent; both must sit at a route end.
    if (ra.back() != s.i) {
      if (ra.front() != s.i) continue;
      std::reverse(ra.begin(), ra.end());
    }
    if (rb.front() != s.j) {
      if (rb.back() != s.j) continue;
      std::reverse(rb.begin(), rb.end());
    }
    std::vector<std::size_t> merged = ra;
    merged.insert(merged.end(), rb.begin(), rb.end());
    if (!group_feasible(depot, drops, merged, limit, dist)) continue;
    for (std::size_t m : rb) owner[m] = a;
    ra = std::move(merged);
    rb.clear();
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto& r : routes) {
    if (!r.empty()) out.push_back(std::move(r));
  }
  return out;
}

// Farthest drop seeds a cluster that takes its nearest unassigned neighbours
// that keep the cluster within the detour limit.
std::vector<std::vector<std::size_t>> seed_clusters(NodeId depot, std::span<const CvrpDrop> drops, int capacity,
                                                    const DetourLimit* limit, const DistanceFn& dist) {
  const std::size_t n = drops.size();
  std::vector<char> used(n, 0);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t left = n; left > 0;) {
    std::size_t seed = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i] && (seed == n || dist(depot, drops[i].node) > dist(depot, drops[seed].node))) seed = i;
    }
    used[seed] = 1;
    --left;
    std::vector<std::size_t> cluster{seed};
    std::vector<std::size_t> near;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i]) near.push_back(i);
    }
    std::stable_sort(near.begin(), near.end(), [&](std::size_t a, std::size_t b) {
      return dist(drops[seed].node, drops[a].node) < dist(drops[seed].node, drops[b].node);
    });
    for (std::size_t i : near) {
      if (cluster.size() >= static_cast<std::size_t>(capacity)) break;
      cluster.push_back(i);
      if (!group_feasible(depot, drops, cluster, limit, dist)) {
        cluster.pop_back();
        continue;
      }
      used[i] = 1;
      --left;
    }
    out.push_back(std::move(cluster));
  }
  return out;
}

}  // namespace

std::vector<std::size_t> best_route_order(NodeId depot, std::span<const NodeId> nodes, const DistanceFn& dist,
                                          double& length) {
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), 0);
  if (nodes.size() <= 8) {
    std::vector<std::size_t> best = order;
    length = route_length(depot, nodes, order, dist);
    while (std::next_permutation(order.begin(), order.end())) {
      const double len = route_length(depot, nodes, order, dist);
      if (len < length) {
        length = len;
        best = order;
      }
    }
    return best;
  }
  // Nearest neighbour, then 2-opt.
  std::vector<std::size_t> tour;
  std::vector<char> used(nodes.size(), 0);
  NodeId cur = depot;
  for (std::size_t step = 0; step < nodes.size(); ++step) {
    std::size_t best = nodes.size();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!used[i] && (best == nodes.size() || dist(cur, nodes[i]) < dist(cur, nodes[best]))) best = i;
    }
    used[best] = 1;
    tour.push_back(best);
    cur = nodes[best];
  }
  length = route_length(depot, nodes, tour, dist);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t i = 0; i + 1 < tour.size(); ++i) {
      for (std::size_t j = i + 1; j < tour.size(); ++j) {
        auto trial = tour;
        std::reverse(trial.begin() + static_cast<std::ptrdiff_t>(i), trial.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        const double len = route_length(depot, nodes, trial, dist);
        if (len < length - 1e-12) {
          length = len;
          tour = std::move(trial);
          improved = true;
        }
      }
    }
  }
  return tour;
}

bool drops_within_detour(NodeId depot, std::span<const NodeId> nodes, const DetourLimit& limit,
                         const DistanceFn& dist) {
  Minutes t = 0;
  NodeId cur = depot;
  for (NodeId node : nodes) {
    t += travel_time(dist(cur, node), limit.speed_kmh);
    if (t - travel_time(dist(depot, node), limit.speed_kmh) > limit.max_detour + kDetourSlack) return false;
    t += limit.dwell;
    cur = node;
  }
  return true;
}

CvrpResult solve_cvrp(NodeId depot, std::span<const CvrpDrop> batch, int fleet, int capacity,
                      const DistanceFn& dist, std::optional<DetourLimit> limit) {
  if (batch.empty()) throw std::invalid_argument("solve_cvrp: empty batch");
  if (capacity < 1) throw std::invalid_argument("solve_cvrp: capacity must be at least 1");
  CvrpResult result;
  const DetourLimit* lim = limit ? &*limit : nullptr;
  const std::size_t room = static_cast<std::size_t>(std::max(fleet, 0)) * static_cast<std::size_t>(capacity);
  std::size_t take = std::min(batch.size(), room);
  if (take == 0) {
    for (const auto& d : batch) result.overflow.push_back(d.request);
    return result;
  }

  if (take <= kExactCvrpLimit) {
    // Singletons always fit the limit, so some prefix of at most `fleet` drops succeeds.
    for (;; --take) {
      auto routes = exact_cvrp(depot, batch.first(take), fleet, capacity, lim, dist);
      if (routes) {
        result.routes = std::move(*routes);
        break;
      }
    }
    result.exact = true;
  } else {
    const auto drops = batch.first(take);
    std::vector<std::vector<std::size_t>> best_groups;
    double best_km = kInf;
    const auto cw = clarke_wright(depot, drops, capacity, lim, dist);
    const auto seeded = seed_clusters(depot, drops, capacity, lim, dist);
    for (const auto* groups : {&cw, &seeded}) {
      if (groups->size() > static_cast<std::size_t>(fleet)) continue;
      double km = 0.0;
      for (const auto& g : *groups) km += make_route(depot, drops, g, lim, dist).distance_km;
      if (km < best_km) {
        best_km = km;
        best_groups = *groups;
      }
    }
    if (best_groups.empty()) {
      // Too many routes: keep those holding the oldest requests.
      best_groups = seeded;
      for (auto& g : best_groups) std::sort(g.begin(), g.end());
      std::sort(best_groups.begin(), best_groups.end());
      best_groups.resize(static_cast<std::size_t>(fleet));
    }
    std::vector<char> served(take, 0);
    for (const auto& g : best_groups) {
      result.routes.push_back(make_route(depot, drops, g, lim, dist));
      for (std::size_t m : g) served[m] = 1;
    }
    for (std::size_t i = 0; i < take; ++i) {
      if (!served[i]) result.overflow.push_back(batch[i].request);
    }
  }
  for (std::size_t i = take; i < batch.size(); ++i) result.overflow.push_back(batch[i].request);
  for (const auto& r : result.routes) result.total_km += r.distance_km;
  return result;
}

void project_route(RoutePlan& plan, NodeId depot, Minutes start, double speed_kmh, Minutes dwell,
                   const DistanceFn& dist) {
  Minutes t = start;
  NodeId cur = depot;
  for (auto& stop : plan.stops) {
    t += travel_time(dist(cur, stop.node), speed_kmh);
    stop.eta = t;
    if (stop.role != StopRole::DepotReturn) t += dwell;
    cur = stop.node;
  }
}

InsertionDecision feasible_fm_insertion(NodeId here, Minutes now, std::span<const OnboardPassenger> onboard,
                                        const FmCandidate& candidate, NodeId station, const SharingParams& params,
                                        const DistanceFn& dist) {
  InsertionDecision out;
  out.pickup_eta = now + travel_time(dist(here, candidate.node), params.speed_kmh);
  out.station_eta = out.pickup_eta + params.dwell + travel_time(dist(candidate.node, station), params.speed_kmh);
  if (onboard.size() >= static_cast<std::size_t>(params.capacity)) return out;
  if (!(out.pickup_eta - candidate.request_time < params.max_wait)) return out;
  for (const auto& p : onboard) {
    if (out.station_eta - (p.board_time + p.direct_minutes) > params.max_detour) return out;
  }
  out.accept = true;
  return out;
}

std::optional<std::size_t> next_action_joint(NodeId here, Minutes now, std::span<const FmCandidate> queue,
                                             const SharingParams& params, const DistanceFn& dist) {
  for (std::size_t i = 0; i < queue.size(); ++i) {
    const Minutes eta = now + travel_time(dist(here, queue[i].node), params.speed_kmh);
    if (eta - queue[i].request_time < params.max_wait) return i;
  }
  return std::nullopt;
}

}  // namespace flm
