#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <optional>
#include <string>

#include "flm/allocator.hpp"
#include "flm/analytics.hpp"
#include "flm/csv.hpp"
#include "flm/error.hpp"
#include "flm/rng.hpp"

using namespace flm;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;

struct ScenarioSource {
  std::string dir;
  bool synth = false;
  std::uint64_t synth_seed = 1;
};

struct Config {
  ScenarioSource scenario;
  std::string mode = "none";
  std::string alloc = "proportional";
  std::uint64_t seed = 1;
  int reps = 1;
  std::string grid;
  bool adaptive = false;
  int jobs = 1;
  std::string out;
};

void add_scenario_flags(CLI::App* cmd, ScenarioSource& src) {
  auto* dir = cmd->add_option("--scenario", src.dir, "Scenario directory");
  auto* synth = cmd->add_flag("--synth", src.synth, "Use the built-in reference scenario");
  dir->excludes(synth);
  synth->excludes(dir);
  cmd->add_option("--synth-seed", src.synth_seed, "Seed of the reference scenario")->capture_default_str();
}

Scenario open_scenario(const ScenarioSource& src) {
  if (src.synth) return Scenario(reference_inputs(src.synth_seed));
  if (src.dir.empty()) throw ConfigError("one of --scenario DIR or --synth is required");
  return load_scenario(src.dir);
}

json scenario_json(const ScenarioSource& src) {
  if (src.synth) return {{"source", "synth"}, {"synth_seed", src.synth_seed}};
  return {{"source", "files"}, {"dir", src.dir}};
}

// Echo of everything that determines the outputs. Thread count and output
// path are left out so that runs differing only in those compare equal.
json config_json(const std::string& command, const Config& c) {
  return {{"command", command}, {"scenario", scenario_json(c.scenario)}, {"mode", c.mode}, {"alloc", c.alloc},
          {"seed", c.seed}, {"reps", c.reps}, {"grid", c.grid}, {"adaptive", c.adaptive}};
}

void write_json(const json& j, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", file.string()));
  out << j.dump(2) << '\n';
}

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

std::vector<int> parse_grid(const std::string& text, const ScenarioParams& p) {
  if (text.empty()) return supply_grid(p.per_station_min, p.per_station_max, 5);
  const auto parts = csv::split(text, ':');
  if (parts.size() != 3) throw ConfigError(fmt::format("--grid must be LO:HI:STEP, got '{}'", text));
  int v[3];
  for (int i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      v[i] = std::stoi(std::string(parts[i]), &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("--grid must be LO:HI:STEP, got '{}'", text));
    }
  }
  return supply_grid(v[0], v[1], v[2]);
}

std::vector<int> station_ids(const Scenario& sc) {
  std::vector<int> ids;
  for (const auto& s : sc.stations()) ids.push_back(s.id);
  return ids;
}

std::vector<SupplyBounds> station_bounds(const Scenario& sc) {
  return std::vector<SupplyBounds>(sc.station_count(), {sc.params().per_station_min, sc.params().per_station_max});
}

struct Optimized {
  Allocation allocation;
  std::vector<LostDemandCurve> curves;
  long long evaluations = 0;
  long long full_grid = 0;
  int iterations = 1;
};

Optimized optimize(const Scenario& sc, const Config& c, Mode mode) {
  const auto grid = parse_grid(c.grid, sc.params());
  const auto bounds = station_bounds(sc);
  Optimized o;
  o.full_grid = static_cast<long long>(grid.size() * sc.station_count());
  if (c.adaptive) {
    const auto evaluate = [&](std::size_t s, int x) { return evaluate_supply(sc, s, x, c.reps, mode, c.seed); };
    auto r = adaptive_allocate(station_ids(sc), grid, sc.params().total_fleet, bounds, evaluate, c.jobs);
    o.allocation = std::move(r.allocation);
    o.curves = std::move(r.curves);
    o.evaluations = r.evaluations;
    o.iterations = r.iterations;
  } else {
    o.curves = estimate_curves(sc, grid, c.reps, mode, c.seed, c.jobs);
    o.allocation = solve_allocation(o.curves, sc.params().total_fleet, bounds);
    o.evaluations = o.full_grid;
  }
  return o;
}

// Resolves --alloc; writes curves.csv and allocate.json when optimizing.
std::vector<int> resolve_allocation(const Scenario& sc, const Config& c, Mode mode, const std::filesystem::path& out) {
  const auto& p = sc.params();
  if (c.alloc == "equal") return baseline_equal(p.total_fleet, sc.station_count());
  if (c.alloc == "proportional") {
    std::vector<double> demand;
    for (std::size_t s = 0; s < sc.station_count(); ++s) demand.push_back(sc.expected_flm_demand(s));
    return baseline_proportional(demand, p.total_fleet, p.per_station_max, p.per_station_min);
  }
  if (c.alloc == "optimize") {
    const auto o = optimize(sc, c, mode);
    write_curves(o.curves, out / "curves.csv");
    write_json({{"evaluations", o.evaluations},
                {"full_grid_evaluations", o.full_grid},
                {"iterations", o.iterations},
                {"objective", o.allocation.objective},
                {"vehicles", o.allocation.total()}},
               out / "allocate.json");
    std::printf("simulations=%lld full_grid=%lld iterations=%d objective=%.6f\n", o.evaluations, o.full_grid,
                o.iterations, o.allocation.objective);
    return o.allocation.x;
  }
  if (c.alloc.rfind("file:", 0) == 0) return read_allocation(station_ids(sc), c.alloc.substr(5));
  throw ConfigError(fmt::format("--alloc must be file:PATH, equal, proportional or optimize, got '{}'", c.alloc));
}

double lost_pct(long long lost, long long generated) {
  return generated == 0 ? 0.0 : 100.0 * static_cast<double>(lost) / static_cast<double>(generated);
}

int cmd_synth(const SynthOptions& o, const std::string& out) {
  auto in = synthesize_inputs(o);
  const auto ref = reference_inputs(o.seed).params;
  in.params.total_fleet = ref.total_fleet;
  in.params.per_station_min = ref.per_station_min;
  in.params.per_station_max = ref.per_station_max;
  Scenario check(in);
  save_inputs(in, out);
  std::printf("stations=%zu points=%zu\n", check.station_count(), check.points().size());
  return 0;
}

int cmd_simulate(const Config& c) {
  if (c.reps < 1) throw ConfigError("--reps must be at least 1");
  const Scenario sc = open_scenario(c.scenario);
  const Mode mode = parse_mode(c.mode);
  const std::filesystem::path out = c.out;
  make_dir(out);
  const auto x = resolve_allocation(sc, c, mode, out);

  json config = config_json("simulate", c);
  if (c.reps == 1) {
    const auto output = run(sc, x, mode, replication_seed(c.seed, 0));
    write_output(output, out);
    json meta = meta_json(meta_from(output, sc.params().fares));
    meta["config"] = config;
    write_json(meta, out / "run.json");
    write_report(read_tables(out), read_meta(out / "run.json"), out);
    std::printf("served=%lld lost=%lld lost_pct=%.2f\n", output.served(), output.lost(),
                lost_pct(output.lost(), static_cast<long long>(output.requests.size())));
    return 0;
  }

  write_json(config, out / "run.json");
  std::ofstream agg(out / "aggregate.csv", std::ios::binary);
  if (!agg) throw ConfigError(fmt::format("cannot write {}", (out / "aggregate.csv").string()));
  agg << "rep,seed,generated,served,lost,lost_pct\n";
  double served_sum = 0, lost_sum = 0, pct_sum = 0;
  for (int r = 0; r < c.reps; ++r) {
    const auto seed = replication_seed(c.seed, r);
    const auto output = run(sc, x, mode, seed);
    const auto dir = out / fmt::format("rep_{}", r);
    write_output(output, dir);
    json meta = meta_json(meta_from(output, sc.params().fares));
    meta["config"] = config;
    meta["replication"] = r;
    write_json(meta, dir / "run.json");
    write_report(read_tables(dir), read_meta(dir / "run.json"), dir);
    const auto generated = static_cast<long long>(output.requests.size());
    const double pct = lost_pct(output.lost(), generated);
    agg << r << ',' << seed << ',' << generated << ',' << output.served() << ',' << output.lost() << ','
        << csv::fixed(pct) << '\n';
    served_sum += static_cast<double>(output.served());
    lost_sum += static_cast<double>(output.lost());
    pct_sum += pct;
  }
  agg << "mean,," << ',' << csv::fixed(served_sum / c.reps) << ',' << csv::fixed(lost_sum / c.reps) << ','
      << csv::fixed(pct_sum / c.reps) << '\n';
  std::printf("served=%.1f lost=%.1f lost_pct=%.2f\n", served_sum / c.reps, lost_sum / c.reps, pct_sum / c.reps);
  return 0;
}

int cmd_allocate(const Config& c) {
  if (c.reps < 1) throw ConfigError("--reps must be at least 1");
  const Scenario sc = open_scenario(c.scenario);
  const Mode mode = parse_mode(c.mode);
  const std::filesystem::path out = c.out;
  make_dir(out);
  const auto x = resolve_allocation(sc, c, mode, out);
  write_allocation(station_ids(sc), x, out / "allocation.csv");
  write_json(config_json("allocate", c), out / "run.json");
  std::printf("vehicles=%d stations=%zu\n", std::accumulate(x.begin(), x.end(), 0), x.size());
  return 0;
}

int cmd_report(const std::string& dir) {
  write_report(read_tables(dir), read_meta(std::filesystem::path(dir) / "run.json"), dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First/last-mile feeder fleet simulator"};
  app.require_subcommand(1);

  SynthOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic scenario");
  synth->add_option("--seed", synth_opts.seed, "Synthesis seed")->capture_default_str();
  synth->add_option("--lines", synth_opts.n_lines, "Number of lines")->capture_default_str();
  synth->add_option("--stations-per-line", synth_opts.stations_per_line, "Stations on each line")->capture_default_str();
  synth->add_option("--points-per-station", synth_opts.points_per_station, "Demand points per station")
      ->capture_default_str();
  synth->add_option("--demand-scale", synth_opts.demand_scale, "Multiplier on hourly counts")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")->required();

  Config sim_cfg;
  auto* simulate = app.add_subcommand("simulate", "Run the simulation and write logs and a report");
  add_scenario_flags(simulate, sim_cfg.scenario);
  simulate->add_option("--mode", sim_cfg.mode, "none, lm, fm or joint")->capture_default_str();
  simulate->add_option("--alloc", sim_cfg.alloc, "file:PATH, equal, proportional or optimize")->capture_default_str();
  simulate->add_option("--seed", sim_cfg.seed, "Master seed")->capture_default_str();
  simulate->add_option("--reps", sim_cfg.reps, "Replications")->capture_default_str();
  simulate->add_option("--grid", sim_cfg.grid, "Supply grid LO:HI:STEP for --alloc optimize");
  simulate->add_flag("--adaptive", sim_cfg.adaptive, "Adaptive break points for --alloc optimize");
  simulate->add_option("--jobs", sim_cfg.jobs, "Worker threads for curve estimation")->capture_default_str();
  simulate->add_option("--out", sim_cfg.out, "Output directory")->required();

  Config alloc_cfg;
  alloc_cfg.alloc = "optimize";
  alloc_cfg.reps = 5;
  auto* allocate = app.add_subcommand("allocate", "Estimate lost-demand curves and allocate the fleet");
  add_scenario_flags(allocate, alloc_cfg.scenario);
  allocate->add_option("--mode", alloc_cfg.mode, "none, lm, fm or joint")->capture_default_str();
  allocate->add_option("--alloc", alloc_cfg.alloc, "equal, proportional or optimize")->capture_default_str();
  allocate->add_option("--seed", alloc_cfg.seed, "Master seed")->capture_default_str();
  allocate->add_option("--reps", alloc_cfg.reps, "Replications per break point")->capture_default_str();
  allocate->add_option("--grid", alloc_cfg.grid, "Supply grid LO:HI:STEP");
  allocate->add_flag("--adaptive", alloc_cfg.adaptive, "Refine break points adaptively");
  allocate->add_option("--jobs", alloc_cfg.jobs, "Worker threads")->capture_default_str();
  allocate->add_option("--out", alloc_cfg.out, "Output directory")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Recompute report.json from a run directory");
  report->add_option("dir,--out", report_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*synth) return cmd_synth(synth_opts, synth_out);
    if (*simulate) return cmd_simulate(sim_cfg);
    if (*allocate) return cmd_allocate(alloc_cfg);
    if (*report) return cmd_report(report_dir);
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const LoadError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const SamplingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const RoutingError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
  return 0;
}
