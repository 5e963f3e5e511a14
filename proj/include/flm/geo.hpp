#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace flm {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kKmPerDegreeLat = kEarthRadiusKm * std::numbers::pi / 180.0;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

inline double haversine_km(LatLon a, LatLon b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

// Point displaced by (east_km, north_km) from `origin` on a local tangent plane.
inline LatLon offset_km(LatLon origin, double east_km, double north_km) {
  const double coslat = std::cos(origin.lat * std::numbers::pi / 180.0);
  return {origin.lat + north_km / kKmPerDegreeLat,
          origin.lon + east_km / (kKmPerDegreeLat * coslat)};
}

}  // namespace flm
