#pragma once

#include <map>
#include <string>
#include <vector>

#include "synthctl/panel.hpp"

namespace synthctl {

inline const std::string kRadialDistance = "radial-distance-km";
inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
  double lat = 0.0;  // decimal degrees
  double lon = 0.0;
};

/// Great-circle distance on a sphere of radius 6371 km.
double haversine_km(LatLon a, LatLon b);

struct EqualityPredicate {
  std::string key;
  AttributeValue value;
};

struct RangePredicate {
  std::string key;
  double min = 0.0;  // inclusive
  double max = 0.0;  // inclusive
};

struct DonorFilterSpec {
  std::vector<EqualityPredicate> equals;
  std::vector<RangePredicate> ranges;
  std::string anchor;  // treated unit id
};

/// Treated unit plus the units that may contribute weight to its synthetic
/// control. Derived features are aligned with members(): treated first, then
/// donors in order.
struct DonorPool {
  std::string treated;
  std::vector<std::string> donors;
  std::map<std::string, std::vector<double>> features;
  std::vector<std::string> warnings;

  std::vector<std::string> members() const;
};

bool unit_passes(const UnitRecord& unit, const DonorFilterSpec& spec);

/// All non-treated units satisfying every predicate, in panel order.
DonorPool build_pool(const PanelDataset& panel, const DonorFilterSpec& spec);

/// Pool with an explicit donor list; recomputes derived features against the
/// given treated unit. Used for placebo reassignment and leave-one-out.
DonorPool make_pool(const PanelDataset& panel, const std::string& treated,
                    std::vector<std::string> donors);

}  // namespace synthctl
