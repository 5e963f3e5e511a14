#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "flm/geo.hpp"

namespace flm {

using NodeId = int;

struct RoadEdge {
  NodeId u = 0;
  NodeId v = 0;
  double length_km = 0.0;
};

struct BBox {
  LatLon min;
  LatLon max;
};

// Undirected road graph with a bucket index for nearest-node snapping.
// Immutable after construction.
class RoadGraph {
 public:
  struct Arc {
    NodeId to;
    double length_km;
  };

  // Throws ConfigError on an edge with a non-positive length or a bad endpoint.
  RoadGraph(std::vector<LatLon> nodes, std::vector<RoadEdge> edges);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  LatLon location(NodeId n) const { return nodes_.at(static_cast<std::size_t>(n)); }
  std::span<const Arc> arcs(NodeId n) const;
  const std::vector<RoadEdge>& edges() const noexcept { return edges_; }
  const std::vector<LatLon>& nodes() const noexcept { return nodes_; }

  // Nearest node in the local planar projection around the graph centroid.
  NodeId snap(LatLon p) const;
  // Planar distance used by snap(), in km.
  double planar_km(LatLon a, LatLon b) const;

  bool connected() const;

 private:
  std::vector<LatLon> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::size_t> arc_begin_;
  std::vector<Arc> arcs_;

  // Snap index: square buckets on the planar projection.
  double ref_lat_ = 0.0;
  double cos_ref_ = 1.0;
  double x0_ = 0.0, y0_ = 0.0, cell_ = 1.0;
  int cols_ = 1, rows_ = 1;
  std::vector<std::vector<NodeId>> buckets_;

  std::pair<double, double> project(LatLon p) const;
};

// Rectangular lattice covering `box` with edges of exactly `spacing_km`.
RoadGraph build_grid_graph(BBox box, double spacing_km);

// Loads nodes (`id,lat,lon`) and edges (`u,v,length_km`) CSV files. Node ids
// must be 0..n-1 in order.
RoadGraph load_graph(const std::filesystem::path& nodes_csv, const std::filesystem::path& edges_csv);
void save_graph(const RoadGraph& graph, const std::filesystem::path& nodes_csv,
                const std::filesystem::path& edges_csv);

// Uncached Dijkstra between two nodes; throws RoutingError if disconnected.
double shortest_distance(const RoadGraph& graph, NodeId a, NodeId b);
std::vector<double> single_source_distances(const RoadGraph& graph, NodeId source);

// distance / speed * 60, in minutes.
constexpr double travel_time(double distance_km, double speed_kmh) {
  return distance_km / speed_kmh * 60.0;
}

// Lazily filled all-pairs shortest-path cache. Each source row is computed at
// most once, even under concurrent readers. Rows for `anchors` (the station
// nodes) are preferred so every query has a single canonical answer regardless
// of which rows happen to exist.
class DistanceOracle {
 public:
  DistanceOracle(std::shared_ptr<const RoadGraph> graph, std::vector<NodeId> anchors);

  double distance(NodeId a, NodeId b) const;
  const std::vector<double>& row(NodeId source) const;
  const RoadGraph& graph() const noexcept { return *graph_; }
  std::size_t rows_computed() const noexcept { return computed_.load(); }

 private:
  std::shared_ptr<const RoadGraph> graph_;
  std::vector<char> is_anchor_;
  std::unique_ptr<std::once_flag[]> once_;
  mutable std::vector<std::vector<double>> rows_;
  mutable std::atomic<std::size_t> computed_{0};
};

}  // namespace flm
