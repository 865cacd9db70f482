#include "synthctl/pool.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "synthctl/error.hpp"

namespace synthctl {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

bool equal_value(const AttributeValue& have, const AttributeValue& want) {
  if (have.index() != want.index()) {
    // Accept a numeric predicate against a text attribute such as a postcode.
    if (const auto* s = std::get_if<std::string>(&have)) {
      if (const auto* d = std::get_if<double>(&want)) {
        try {
          return std::stod(*s) == *d;
        } catch (...) {
          return false;
        }
      }
    }
    return false;
  }
  return have == want;
}

void check_keys(const PanelDataset& panel, const DonorFilterSpec& spec) {
  std::set<std::string> known;
  for (const auto& u : panel.units()) {
    for (const auto& [k, v] : u.attributes) known.insert(k);
  }
  auto check = [&](const std::string& key) {
    if (!known.count(key)) throw Error(ErrorCode::UnknownAttribute, "unknown attribute '" + key + "'");
  };
  for (const auto& p : spec.equals) check(p.key);
  for (const auto& p : spec.ranges) check(p.key);
}

}  // namespace

double haversine_km(LatLon a, LatLon b) {
  const double dlat = radians(b.lat - a.lat);
  const double dlon = radians(b.lon - a.lon);
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  double h = s * s + std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * t * t;
  h = std::min(1.0, std::max(0.0, h));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

std::vector<std::string> DonorPool::members() const {
  std::vector<std::string> out;
  out.reserve(donors.size() + 1);
  out.push_back(treated);
  out.insert(out.end(), donors.begin(), donors.end());
  return out;
}

bool unit_passes(const UnitRecord& unit, const DonorFilterSpec& spec) {
  for (const auto& p : spec.equals) {
    const auto* v = unit.attribute(p.key);
    if (!v || !equal_value(*v, p.value)) return false;
  }
  for (const auto& p : spec.ranges) {
    auto v = unit.number(p.key);
    if (!v || *v < p.min || *v > p.max) return false;
  }
  return true;
}

DonorPool build_pool(const PanelDataset& panel, const DonorFilterSpec& spec) {
  check_keys(panel, spec);
  const auto treated_idx = panel.unit_index(spec.anchor);
  std::vector<std::string> donors;
  for (std::size_t i = 0; i < panel.unit_count(); ++i) {
    if (i == treated_idx) continue;
    if (unit_passes(panel.units()[i], spec)) donors.push_back(panel.units()[i].id);
  }
  if (donors.empty()) {
    throw Error(ErrorCode::NoDonors, "no unit satisfies the donor filter for '" + spec.anchor + "'");
  }
  auto pool = make_pool(panel, spec.anchor, std::move(donors));
  if (!unit_passes(panel.units()[treated_idx], spec)) {
    pool.warnings.push_back("treated unit '" + spec.anchor + "' does not satisfy its own donor filter");
  }
  return pool;
}

DonorPool make_pool(const PanelDataset& panel, const std::string& treated,
                    std::vector<std::string> donors) {
  if (donors.empty()) throw Error(ErrorCode::NoDonors, "empty donor pool for '" + treated + "'");
  std::set<std::string> seen{treated};
  for (const auto& d : donors) {
    panel.unit_index(d);
    if (!seen.insert(d).second) {
      throw Error(ErrorCode::InvalidArgument, "donor '" + d + "' is duplicated or is the treated unit");
    }
  }
  DonorPool pool;
  pool.treated = treated;
  pool.donors = std::move(donors);

  const auto& anchor = panel.units()[panel.unit_index(treated)];
  auto alat = anchor.number("latitude");
  auto alon = anchor.number("longitude");
  if (alat && alon) {
    std::vector<double> dist;
    bool complete = true;
    for (const auto& id : pool.members()) {
      const auto& u = panel.units()[panel.unit_index(id)];
      auto lat = u.number("latitude");
      auto lon = u.number("longitude");
      if (!lat || !lon) {
        complete = false;
        break;
      }
      dist.push_back(id == treated ? 0.0 : haversine_km({*alat, *alon}, {*lat, *lon}));
    }
    if (complete) pool.features.emplace(kRadialDistance, std::move(dist));
  }
  return pool;
}

}  // namespace synthctl
