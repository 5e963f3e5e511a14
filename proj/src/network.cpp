#include "flm/network.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>

#include "flm/csv.hpp"
#include "flm/error.hpp"

namespace flm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

RoadGraph::RoadGraph(std::vector<LatLon> nodes, std::vector<RoadEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  if (nodes_.empty()) throw ConfigError("road graph has no nodes");
  const auto n = static_cast<NodeId>(nodes_.size());
  std::vector<std::size_t> degree(nodes_.size(), 0);
  for (const auto& e : edges_) {
    if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n) {
      throw ConfigError(fmt::format("edge ({}, {}) references an unknown node", e.u, e.v));
    }
    if (!(e.length_km > 0.0) || !std::isfinite(e.length_km)) {
      throw ConfigError(fmt::format("edge ({}, {}) has non-positive length", e.u, e.v));
    }
    ++degree[static_cast<std::size_t>(e.u)];
    ++degree[static_cast<std::size_t>(e.v)];
  }
  arc_begin_.assign(nodes_.size() + 1, 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) arc_begin_[i + 1] = arc_begin_[i] + degree[i];
  arcs_.resize(arc_begin_.back());
  std::vector<std::size_t> fill(arc_begin_.begin(), arc_begin_.end() - 1);
  for (const auto& e : edges_) {
    arcs_[fill[static_cast<std::size_t>(e.u)]++] = {e.v, e.length_km};
    arcs_[fill[static_cast<std::size_t>(e.v)]++] = {e.u, e.length_km};
  }

  double lat_sum = 0.0;
  for (const auto& p : nodes_) lat_sum += p.lat;
  ref_lat_ = lat_sum / static_cast<double>(nodes_.size());
  cos_ref_ = std::cos(ref_lat_ * std::numbers::pi / 180.0);

  double xmin = kInf, ymin = kInf, xmax = -kInf, ymax = -kInf;
  for (const auto& p : nodes_) {
    const auto [x, y] = project(p);
    xmin = std::min(xmin, x);
    ymin = std::min(ymin, y);
    xmax = std::max(xmax, x);
    ymax = std::max(ymax, y);
  }
  const double area = std::max(1e-6, (xmax - xmin) * (ymax - ymin));
  cell_ = std::max(0.05, 2.0 * std::sqrt(area / static_cast<double>(nodes_.size())));
  x0_ = xmin;
  y0_ = ymin;
  cols_ = std::max(1, static_cast<int>((xmax - xmin) / cell_) + 1);
  rows_ = std::max(1, static_cast<int>((ymax - ymin) / cell_) + 1);
  buckets_.assign(static_cast<std::size_t>(cols_) * static_cast<std::size_t>(rows_), {});
  for (NodeId i = 0; i < n; ++i) {
    const auto [x, y] = project(nodes_[static_cast<std::size_t>(i)]);
    const int cx = std::clamp(static_cast<int>((x - x0_) / cell_), 0, cols_ - 1);
    const int cy = std::clamp(static_cast<int>((y - y0_) / cell_), 0, rows_ - 1);
    buckets_[static_cast<std::size_t>(cy) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(cx)]
        .push_back(i);
  }
}

std::span<const RoadGraph::Arc> RoadGraph::arcs(NodeId n) const {
  const auto i = static_cast<std::size_t>(n);
  return {arcs_.data() + arc_begin_.at(i), arc_begin_.at(i + 1) - arc_begin_[i]};
}

std::pair<double, double> RoadGraph::project(LatLon p) const {
  return {p.lon * kKmPerDegreeLat * cos_ref_, p.lat * kKmPerDegreeLat};
}

double RoadGraph::planar_km(LatLon a, LatLon b) const {
  const auto [ax, ay] = project(a);
  const auto [bx, by] = project(b);
  return std::hypot(ax - bx, ay - by);
}

NodeId RoadGraph::snap(LatLon p) const {
  const auto [x, y] = project(p);
  const int cx = std::clamp(static_cast<int>(std::floor((x - x0_) / cell_)), 0, cols_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor((y - y0_) / cell_)), 0, rows_ - 1);
  NodeId best = -1;
  double best_d = kInf;
  const int max_ring = std::max(cols_, rows_);
  for (int r = 0; r <= max_ring; ++r) {
    for (int gy = cy - r; gy <= cy + r; ++gy) {
      if (gy < 0 || gy >= rows_) continue;
      for (int gx = cx - r; gx <= cx + r; ++gx) {
        if (gx < 0 || gx >= cols_) continue;
        if (std::max(std::abs(gx - cx), std::abs(gy - cy)) != r) continue;
        for (NodeId id : buckets_[static_cast<std::size_t>(gy) * static_cast<std::size_t>(cols_) +
                                  static_cast<std::size_t>(gx)]) {
          const auto [nx, ny] = project(nodes_[static_cast<std::size_t>(id)]);
          const double d = std::hypot(nx - x, ny - y);
          if (d < best_d || (d == best_d && id < best)) {
            best_d = d;
            best = id;
          }
        }
      }
    }
    if (best >= 0 && best_d <= static_cast<double>(r) * cell_) break;
  }
  return best;
}

bool RoadGraph::connected() const {
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<NodeId> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (const auto& a : arcs(u)) {
      if (!seen[static_cast<std::size_t>(a.to)]) {
        seen[static_cast<std::size_t>(a.to)] = 1;
        ++count;
        stack.push_back(a.to);
      }
    }
  }
  return count == nodes_.size();
}

RoadGraph build_grid_graph(BBox box, double spacing_km) {
  if (!(spacing_km > 0.0)) throw ConfigError("grid spacing must be positive");
  if (!(box.max.lat > box.min.lat) || !(box.max.lon > box.min.lon)) {
    throw ConfigError("degenerate bounding box");
  }
  const double mid_lat = 0.5 * (box.min.lat + box.max.lat);
  const double coslat = std::cos(mid_lat * std::numbers::pi / 180.0);
  const double height_km = (box.max.lat - box.min.lat) * kKmPerDegreeLat;
  const double width_km = (box.max.lon - box.min.lon) * kKmPerDegreeLat * coslat;
  const int rows = static_cast<int>(std::ceil(height_km / spacing_km - 1e-9)) + 1;
  const int cols = static_cast<int>(std::ceil(width_km / spacing_km - 1e-9)) + 1;
  const double dlat = spacing_km / kKmPerDegreeLat;
  const double dlon = spacing_km / (kKmPerDegreeLat * coslat);

  std::vector<LatLon> nodes;
  nodes.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) nodes.push_back({box.min.lat + r * dlat, box.min.lon + c * dlon});
  }
  std::vector<RoadEdge> edges;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.push_back({id(r, c), id(r, c + 1), spacing_km});
      if (r + 1 < rows) edges.push_back({id(r, c), id(r + 1, c), spacing_km});
    }
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

RoadGraph load_graph(const std::filesystem::path& nodes_csv, const std::filesystem::path& edges_csv) {
  std::vector<LatLon> nodes;
  {
    csv::Reader r(nodes_csv, {"id", "lat", "lon"});
    while (r.next()) {
      if (r.integer(0) != static_cast<long long>(nodes.size())) {
        r.fail("node ids must be consecutive from 0");
      }
      nodes.push_back({r.number(1), r.number(2)});
    }
  }
  std::vector<RoadEdge> edges;
  {
    csv::Reader r(edges_csv, {"u", "v", "length_km"});
    while (r.next()) {
      const auto u = r.integer(0), v = r.integer(1);
      const double len = r.number(2);
      if (u < 0 || v < 0 || u >= static_cast<long long>(nodes.size()) ||
          v >= static_cast<long long>(nodes.size())) {
        r.fail("edge references an unknown node");
      }
      if (!(len > 0.0)) r.fail("edge length must be positive");
      edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v), len});
    }
  }
  RoadGraph g(std::move(nodes), std::move(edges));
  if (!g.connected()) throw LoadError(edges_csv.string(), 0, "road graph is not connected");
  return g;
}

void save_graph(const RoadGraph& graph, const std::filesystem::path& nodes_csv,
                const std::filesystem::path& edges_csv) {
  std::ofstream n(nodes_csv);
  n << "id,lat,lon\n";
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    n << fmt::format("{},{:.7f},{:.7f}\n", i, graph.nodes()[i].lat, graph.nodes()[i].lon);
  }
  std::ofstream e(edges_csv);
  e << "u,v,length_km\n";
  for (const auto& edge : graph.edges()) e << fmt::format("{},{},{}\n", edge.u, edge.v, csv::fixed(edge.length_km));
}

std::vector<double> single_source_distances(const RoadGraph& graph, NodeId source) {
  std::vector<double> dist(graph.node_count(), kInf);
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist.at(static_cast<std::size_t>(source)) = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& a : graph.arcs(u)) {
      const double nd = d + a.length_km;
      if (nd < dist[static_cast<std::size_t>(a.to)]) {
        dist[static_cast<std::size_t>(a.to)] = nd;
        heap.push({nd, a.to});
      }
    }
  }
  return dist;
}

double shortest_distance(const RoadGraph& graph, NodeId a, NodeId b) {
  if (a == b) return 0.0;
  const double d = single_source_distances(graph, a).at(static_cast<std::size_t>(b));
  if (!std::isfinite(d)) throw RoutingError(fmt::format("no path between nodes {} and {}", a, b));
  return d;
}

DistanceOracle::DistanceOracle(std::shared_ptr<const RoadGraph> graph, std::vector<NodeId> anchors)
    : graph_(std::move(graph)),
      is_anchor_(graph_->node_count(), 0),
      once_(new std::once_flag[graph_->node_count()]),
      rows_(graph_->node_count()) {
  for (NodeId a : anchors) is_anchor_.at(static_cast<std::size_t>(a)) = 1;
}

const std::vector<double>& DistanceOracle::row(NodeId source) const {
  const auto i = static_cast<std::size_t>(source);
  std::call_once(once_[i], [&] {
    rows_[i] = single_source_distances(*graph_, source);
    computed_.fetch_add(1);
  });
  return rows_[i];
}

double DistanceOracle::distance(NodeId a, NodeId b) const {
  if (a == b) return 0.0;
  const bool anchor_a = is_anchor_[static_cast<std::size_t>(a)] != 0;
  const bool anchor_b = is_anchor_[static_cast<std::size_t>(b)] != 0;
  const NodeId source = anchor_a == anchor_b ? std::min(a, b) : (anchor_a ? a : b);
  const NodeId target = source == a ? b : a;
  const double d = row(source)[static_cast<std::size_t>(target)];
  if (!std::isfinite(d)) throw RoutingError(fmt::format("no path between nodes {} and {}", a, b));
  return d;
}

}  // namespace flm
