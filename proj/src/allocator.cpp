#include "flm/allocator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "flm/csv.hpp"
#include "flm/error.hpp"

namespace flm {

double LostDemandCurve::value_at(int supply) const {
  if (points.empty()) throw ConfigError(fmt::format("station {} has an empty curve", station_id));
  if (supply <= points.front().supply) return points.front().mean;
  if (supply >= points.back().supply) return points.back().mean;
  const auto hi = std::lower_bound(points.begin(), points.end(), supply,
                                   [](const CurvePoint& p, int s) { return p.supply < s; });
  if (hi->supply == supply) return hi->mean;
  const auto lo = hi - 1;
  return lo->mean + (hi->mean - lo->mean) * (supply - lo->supply) / (hi->supply - lo->supply);
}

void LostDemandCurve::insert(const CurvePoint& p) {
  const auto it = std::lower_bound(points.begin(), points.end(), p.supply,
                                   [](const CurvePoint& q, int s) { return q.supply < s; });
  if (it != points.end() && it->supply == p.supply) {
    *it = p;
  } else {
    points.insert(it, p);
  }
}

bool LostDemandCurve::has(int supply) const {
  return std::any_of(points.begin(), points.end(), [&](const CurvePoint& p) { return p.supply == supply; });
}

int Allocation::total() const { return std::accumulate(x.begin(), x.end(), 0); }

Allocation solve_allocation(std::span<const LostDemandCurve> curves, int total, std::span<const SupplyBounds> bounds) {
  const std::size_t n = curves.size();
  if (bounds.size() != n) throw ConfigError("one supply bound per curve is required");
  long long min_sum = 0, max_sum = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto& c = curves[s];
    const auto& b = bounds[s];
    if (b.min < 0 || b.min > b.max) throw ConfigError(fmt::format("bad bounds for station {}", c.station_id));
    if (c.points.empty() || c.points.front().supply > b.min || c.points.back().supply < b.max) {
      throw ConfigError(fmt::format("curve of station {} does not span [{}, {}]", c.station_id, b.min, b.max));
    }
    min_sum += b.min;
    max_sum += b.max;
  }
  if (min_sum > total) {
    throw InfeasibleError(fmt::format("per-station minimums need {} vehicles but only {} are available", min_sum, total));
  }
  const int budget = static_cast<int>(std::min<long long>(total, max_sum));

  std::vector<std::vector<double>> value(n);
  double scale = 1.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (int x = bounds[s].min; x <= bounds[s].max; ++x) {
      value[s].push_back(curves[s].value_at(x));
      scale = std::max(scale, std::abs(value[s].back()));
    }
  }
  const double eps = 1e-9 * scale;

  struct Key {
    double cost;
    long long used;
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto better = [eps](const Key& a, const Key& b) {
    if (a.cost < b.cost - eps) return true;
    if (a.cost > b.cost + eps) return false;
    return a.used < b.used;
  };
  const auto same = [eps](const Key& a, const Key& b) {
    return std::abs(a.cost - b.cost) <= eps && a.used == b.used;
  };

  // g[s][r]: best completion of stations s..n-1 within budget r.
  std::vector<std::vector<Key>> g(n + 1, std::vector<Key>(static_cast<std::size_t>(budget) + 1, {kInf, 0}));
  std::fill(g[n].begin(), g[n].end(), Key{0.0, 0});
  for (std::size_t s = n; s-- > 0;) {
    for (int r = 0; r <= budget; ++r) {
      Key best{kInf, 0};
      for (int x = bounds[s].min; x <= std::min(bounds[s].max, r); ++x) {
        const Key& rest = g[s + 1][static_cast<std::size_t>(r - x)];
        if (rest.cost == kInf) continue;
        const Key k{value[s][static_cast<std::size_t>(x - bounds[s].min)] + rest.cost, x + rest.used};
        if (best.cost == kInf || better(k, best)) best = k;
      }
      g[s][static_cast<std::size_t>(r)] = best;
    }
  }

  Allocation out;
  int r = budget;
  for (std::size_t s = 0; s < n; ++s) {
    const Key target = g[s][static_cast<std::size_t>(r)];
    int chosen = -1;
    for (int x = bounds[s].min; x <= std::min(bounds[s].max, r); ++x) {
      const Key& rest = g[s + 1][static_cast<std::size_t>(r - x)];
      if (rest.cost == kInf) continue;
      const Key k{value[s][static_cast<std::size_t>(x - bounds[s].min)] + rest.cost, x + rest.used};
      if (same(k, target)) {
        chosen = x;
        break;
      }
    }
    if (chosen < 0) throw std::logic_error("allocation reconstruction failed");
    out.x.push_back(chosen);
    out.objective += value[s][static_cast<std::size_t>(chosen - bounds[s].min)];
    r -= chosen;
  }
  return out;
}

std::vector<int> supply_grid(int lo, int hi, int step) {
  if (step <= 0 || lo < 0 || hi < lo) throw ConfigError(fmt::format("bad supply grid {}:{}:{}", lo, hi, step));
  std::vector<int> grid;
  for (int x = lo; x < hi; x += step) grid.push_back(x);
  grid.push_back(hi);
  return grid;
}

CurvePoint evaluate_supply(const Scenario& scenario, std::size_t station, int supply, int reps, Mode mode,
                           std::uint64_t seed) {
  if (reps < 1) throw ConfigError("replications must be at least 1");
  std::vector<double> lost;
  for (int r = 0; r < reps; ++r) {
    lost.push_back(static_cast<double>(run_station(scenario, station, supply, mode, replication_seed(seed, r)).lost()));
  }
  CurvePoint p{supply, 0.0, 0.0, reps};
  p.mean = std::accumulate(lost.begin(), lost.end(), 0.0) / reps;
  if (reps > 1) {
    double ss = 0.0;
    for (double v : lost) ss += (v - p.mean) * (v - p.mean);
    p.std_error = std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
  }
  return p;
}

LostDemandCurve estimate_curve(const Scenario& scenario, std::size_t station, std::span<const int> supplies, int reps,
                               Mode mode, std::uint64_t seed) {
  LostDemandCurve c{scenario.stations().at(station).id, {}};
  for (int x : supplies) c.insert(evaluate_supply(scenario, station, x, reps, mode, seed));
  return c;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long long>(jobs, 1, static_cast<long long>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<LostDemandCurve> estimate_curves(const Scenario& scenario, std::span<const int> supplies, int reps,
                                             Mode mode, std::uint64_t seed, int jobs) {
  const std::size_t n = scenario.station_count();
  std::vector<CurvePoint> slots(n * supplies.size());
  parallel_for(slots.size(), jobs, [&](std::size_t i) {
    slots[i] = evaluate_supply(scenario, i / supplies.size(), supplies[i % supplies.size()], reps, mode, seed);
  });
  std::vector<LostDemandCurve> curves;
  for (std::size_t s = 0; s < n; ++s) {
    LostDemandCurve c{scenario.stations()[s].id, {}};
    for (std::size_t k = 0; k < supplies.size(); ++k) c.insert(slots[s * supplies.size() + k]);
    curves.push_back(std::move(c));
  }
  return curves;
}

AdaptiveResult adaptive_allocate(std::span<const int> station_ids, std::span<const int> fine_grid, int total,
                                 std::span<const SupplyBounds> bounds, const SupplyEvaluator& evaluate, int jobs,
                                 std::vector<LostDemandCurve> initial) {
  const std::size_t n = station_ids.size();
  if (fine_grid.size() < 2 || !std::is_sorted(fine_grid.begin(), fine_grid.end())) {
    throw ConfigError("the fine grid needs at least two increasing supplies");
  }
  AdaptiveResult res;
  res.curves = std::move(initial);
  if (res.curves.empty()) {
    for (int id : station_ids) res.curves.push_back({id, {}});
  }
  if (res.curves.size() != n) throw ConfigError("one initial curve per station is required");

  const std::size_t k = fine_grid.size();
  std::vector<std::set<int>> required(n, {fine_grid.front(), fine_grid[(k - 1) / 2], fine_grid.back()});
  while (true) {
    std::vector<std::pair<std::size_t, int>> tasks;
    for (std::size_t s = 0; s < n; ++s) {
      for (int x : required[s]) {
        if (!res.curves[s].has(x)) tasks.emplace_back(s, x);
      }
    }
    if (res.iterations > 0 && tasks.empty()) break;
    std::vector<CurvePoint> slots(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t i) { slots[i] = evaluate(tasks[i].first, tasks[i].second); });
    for (std::size_t i = 0; i < tasks.size(); ++i) res.curves[tasks[i].first].insert(slots[i]);
    res.evaluations += static_cast<long long>(tasks.size());

    res.allocation = solve_allocation(res.curves, total, bounds);
    ++res.iterations;

    for (std::size_t s = 0; s < n; ++s) {
      const int x = res.allocation.x[s];
      const auto it = std::lower_bound(fine_grid.begin(), fine_grid.end(), x);
      const auto i = static_cast<std::size_t>(it - fine_grid.begin());
      if (it != fine_grid.end() && *it == x) {
        if (i > 0) required[s].insert(fine_grid[i - 1]);
        required[s].insert(x);
        if (i + 1 < k) required[s].insert(fine_grid[i + 1]);
      } else if (i > 0 && i < k) {
        required[s].insert(fine_grid[i - 1]);
        required[s].insert(fine_grid[i]);
      }
    }
  }
  return res;
}

std::vector<int> baseline_proportional(std::span<const double> demand, int total, int cap, int floor) {
  const std::size_t n = demand.size();
  if (n == 0) throw ConfigError("no stations to allocate to");
  if (total < 0 || cap < 0 || floor < 0 || floor > cap) throw ConfigError("bad proportional allocation bounds");
  if (static_cast<long long>(total) > static_cast<long long>(cap) * static_cast<long long>(n)) {
    throw InfeasibleError(fmt::format("{} vehicles exceed the cap of {} at {} stations", total, cap, n));
  }
  if (static_cast<long long>(total) < static_cast<long long>(floor) * static_cast<long long>(n)) {
    throw InfeasibleError(fmt::format("{} vehicles cannot give {} stations {} each", total, n, floor));
  }
  for (double d : demand) {
    if (!(d >= 0)) throw ConfigError("demand must be non-negative");
  }

  std::vector<int> x(n, 0);
  std::vector<char> pinned(n, 0);
  while (true) {
    std::vector<std::size_t> free;
    long long remaining = total;
    double mass = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (pinned[s]) {
        remaining -= x[s];
      } else {
        free.push_back(s);
        mass += demand[s];
      }
    }
    if (free.empty()) break;

    std::vector<double> quota(n, 0.0);
    long long given = 0;
    for (std::size_t s : free) {
      quota[s] = mass > 0 ? static_cast<double>(remaining) * demand[s] / mass
                          : static_cast<double>(remaining) / static_cast<double>(free.size());
      x[s] = static_cast<int>(std::floor(quota[s]));
      given += x[s];
    }
    std::vector<std::size_t> order = free;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
    });
    for (std::size_t i = 0; given < remaining && i < order.size(); ++i, ++given) ++x[order[i]];

    bool changed = false;
    for (std::size_t s : free) {
      if (x[s] > cap) {
        x[s] = cap;
        pinned[s] = 1;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t s : free) {
        if (x[s] < floor) {
          x[s] = floor;
          pinned[s] = 1;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  if (std::accumulate(x.begin(), x.end(), 0LL) != total) throw std::logic_error("proportional allocation lost vehicles");
  return x;
}

std::vector<int> baseline_equal(int total, std::size_t n) {
  if (n == 0) throw ConfigError("no stations to allocate to");
  if (total < 0) throw ConfigError("total supply must be non-negative");
  const auto each = static_cast<int>(static_cast<std::size_t>(total) / n);
  const auto extra = static_cast<std::size_t>(total) % n;
  std::vector<int> x(n, each);
  for (std::size_t s = 0; s < extra; ++s) ++x[s];
  return x;
}

void write_curves(std::span<const LostDemandCurve> curves, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  out << "station_id,supply,mean_lost,stderr,reps\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out << c.station_id << ',' << p.supply << ',' << csv::fixed(p.mean) << ',' << csv::fixed(p.std_error) << ','
          << p.reps << '\n';
    }
  }
}

std::vector<LostDemandCurve> read_curves(const std::filesystem::path& file) {
  csv::Reader r(file, {"station_id", "supply", "mean_lost", "stderr", "reps"});
  std::vector<LostDemandCurve> curves;
  std::map<int, std::size_t> index;
  while (r.next()) {
    const int id = static_cast<int>(r.integer(0));
    const CurvePoint p{static_cast<int>(r.integer(1)), r.number(2), r.number(3), static_cast<int>(r.integer(4))};
    if (p.mean < 0) r.fail("mean_lost must be non-negative");
    auto [it, fresh] = index.emplace(id, curves.size());
    if (fresh) curves.push_back({id, {}});
    auto& c = curves[it->second];
    if (c.has(p.supply)) r.fail(fmt::format("duplicate supply {} for station {}", p.supply, id));
    c.insert(p);
  }
  return curves;
}

void write_allocation(std::span<const int> station_ids, std::span<const int> x, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  out << "station_id,x\n";
  for (std::size_t i = 0; i < station_ids.size(); ++i) out << station_ids[i] << ',' << x[i] << '\n';
}

std::vector<int> read_allocation(std::span<const int> station_ids, const std::filesystem::path& file) {
  csv::Reader r(file, {"station_id", "x"});
  std::map<int, int> got;
  while (r.next()) {
    const int id = static_cast<int>(r.integer(0));
    const long long x = r.integer(1);
    if (x < 0 || x > std::numeric_limits<int>::max()) r.fail("x must be a non-negative integer");
    if (std::find(station_ids.begin(), station_ids.end(), id) == station_ids.end()) {
      r.fail(fmt::format("unknown station id {}", id));
    }
    if (!got.emplace(id, static_cast<int>(x)).second) r.fail(fmt::format("station {} listed twice", id));
  }
  std::vector<int> out;
  for (int id : station_ids) {
    const auto it = got.find(id);
    if (it == got.end()) throw LoadError(file.string(), 0, fmt::format("station {} is missing", id));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace flm
