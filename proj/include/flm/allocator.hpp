#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "flm/engine.hpp"
#include "flm/scenario.hpp"

namespace flm {

struct CurvePoint {
  int supply = 0;
  double mean = 0.0;    // mean lost requests over replications
  double std_error = 0.0;  // standard error of that mean
  int reps = 0;
};

struct LostDemandCurve {
  int station_id = 0;
  std::vector<CurvePoint> points;  // strictly increasing supply

  // Piecewise-linear interpolant; flat beyond the end points.
  double value_at(int supply) const;
  void insert(const CurvePoint& p);
  bool has(int supply) const;
};

struct SupplyBounds {
  int min = 0;
  int max = 0;
};

struct Allocation {
  std::vector<int> x;  // by station index
  double objective = 0.0;

  int total() const;
};

// Minimizes sum_s L_s(x_s) over integers with bounds[s].min <= x_s <=
// bounds[s].max and sum x_s <= total, where L_s interpolates curves[s]. Ties go
// to the smaller sum, then to the lexicographically smallest vector. Throws
// InfeasibleError when the minimums exceed `total`, ConfigError when a curve is
// missing points or does not span its bounds.
Allocation solve_allocation(std::span<const LostDemandCurve> curves, int total, std::span<const SupplyBounds> bounds);

// lo, lo + step, ..., always ending at hi.
std::vector<int> supply_grid(int lo, int hi, int step);

// Lost demand of one station's subsystem at `supply`, averaged over `reps`
// replications whose seeds derive from `seed`.
CurvePoint evaluate_supply(const Scenario& scenario, std::size_t station, int supply, int reps, Mode mode,
                           std::uint64_t seed);

LostDemandCurve estimate_curve(const Scenario& scenario, std::size_t station, std::span<const int> supplies, int reps,
                               Mode mode, std::uint64_t seed);

// Runs fn(0) .. fn(n - 1) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// Curves for every station over `supplies`, evaluated in parallel.
std::vector<LostDemandCurve> estimate_curves(const Scenario& scenario, std::span<const int> supplies, int reps,
                                             Mode mode, std::uint64_t seed, int jobs = 1);

using SupplyEvaluator = std::function<CurvePoint(std::size_t station, int supply)>;

struct AdaptiveResult {
  Allocation allocation;
  std::vector<LostDemandCurve> curves;
  long long evaluations = 0;  // break points simulated
  int iterations = 0;
};

// Starts from each station's grid end points and midpoint, then repeatedly
// solves and simulates the fine-grid neighbours of every station's optimum
// until all of them are explored.
AdaptiveResult adaptive_allocate(std::span<const int> station_ids, std::span<const int> fine_grid, int total,
                                 std::span<const SupplyBounds> bounds, const SupplyEvaluator& evaluate, int jobs = 1,
                                 std::vector<LostDemandCurve> initial = {});

// Proportional to demand with largest-remainder rounding. Stations whose share
// exceeds `cap` (or falls below `floor`) are pinned there and the rest is
// redistributed. Throws InfeasibleError if total > cap * n or total < floor * n.
std::vector<int> baseline_proportional(std::span<const double> demand, int total, int cap, int floor = 0);

// Floor division, remainder to the lowest-index stations.
std::vector<int> baseline_equal(int total, std::size_t n);

void write_curves(std::span<const LostDemandCurve> curves, const std::filesystem::path& file);
std::vector<LostDemandCurve> read_curves(const std::filesystem::path& file);
void write_allocation(std::span<const int> station_ids, std::span<const int> x, const std::filesystem::path& file);
// Returns x by station index of `station_ids`; every station must appear once.
std::vector<int> read_allocation(std::span<const int> station_ids, const std::filesystem::path& file);

}  // namespace flm
