#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "synthctl/error.hpp"
#include "synthctl/pool.hpp"

using namespace synthctl;

namespace {

PanelDataset fixture_panel() {
  IngestConfig cfg;
  cfg.attributes_file = std::filesystem::path(SYNTHCTL_SOURCE_DIR) / "data/fixture/attributes.csv";
  cfg.exclude_years = {2020};
  return load_panel(std::filesystem::path(SYNTHCTL_SOURCE_DIR) / "data/fixture/schools.csv", cfg);
}

DonorFilterSpec main_filter() {
  DonorFilterSpec s;
  s.anchor = "U001";
  s.equals = {{"remoteness", std::string("Major Cities of Australia")},
              {"coeducational", true},
              {"grade_span", std::string("K-6")}};
  s.ranges = {{"lbote_pct", 10.0, 15.0}};
  return s;
}

}  // namespace

TEST_SUITE("pool") {
  TEST_CASE("haversine distance") {
    CHECK(haversine_km({-32.96, 151.69}, {-32.96, 151.69}) == 0.0);
    // R * pi / 180 with R = 6371.
    CHECK(haversine_km({0, 0}, {1, 0}) == doctest::Approx(111.19).epsilon(0.0001));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
    for (int i = 0; i < 100; ++i) {
      LatLon a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
      CHECK(haversine_km(a, b) == doctest::Approx(haversine_km(b, a)).epsilon(1e-12));
      CHECK(haversine_km(a, b) >= 0.0);
    }
  }

  TEST_CASE("the main filter on the fixture leaves 108 donors") {
    const auto panel = fixture_panel();
    const auto pool = build_pool(panel, main_filter());
    CHECK(pool.treated == "U001");
    CHECK(pool.donors.size() == 108);
    CHECK(std::find(pool.donors.begin(), pool.donors.end(), "U001") == pool.donors.end());
    const auto& dist = pool.features.at(kRadialDistance);
    REQUIRE(dist.size() == 109);
    CHECK(dist[0] == 0.0);
    for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i] > 0.0);
  }

  TEST_CASE("no predicates admit every other unit") {
    const auto panel = fixture_panel();
    DonorFilterSpec s;
    s.anchor = "U005";
    const auto pool = build_pool(panel, s);
    CHECK(pool.donors.size() == panel.unit_count() - 1);
  }

  TEST_CASE("a predicate excluding everyone raises NoDonors") {
    const auto panel = fixture_panel();
    auto s = main_filter();
    s.ranges.push_back({"lbote_pct", 90.0, 95.0});
    try {
      build_pool(panel, s);
      FAIL("expected NoDonors");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoDonors);
    }
  }

  TEST_CASE("adding a predicate never grows the donor set") {
    const auto panel = fixture_panel();
    DonorFilterSpec s;
    s.anchor = "U001";
    std::size_t prev = build_pool(panel, s).donors.size();
    for (const auto& eq : main_filter().equals) {
      s.equals.push_back(eq);
      const auto pool = build_pool(panel, s);
      CHECK(pool.donors.size() <= prev);
      prev = pool.donors.size();
    }
    s.ranges.push_back({"lbote_pct", 11.0, 14.0});
    CHECK(build_pool(panel, s).donors.size() <= prev);
  }

  TEST_CASE("range predicates are closed intervals") {
    UnitRecord u{"X", "X", {{"lbote_pct", 10.0}}};
    DonorFilterSpec s;
    s.ranges = {{"lbote_pct", 10.0, 15.0}};
    CHECK(unit_passes(u, s));
    u.attributes["lbote_pct"] = 15.0;
    CHECK(unit_passes(u, s));
    u.attributes["lbote_pct"] = 15.0001;
    CHECK_FALSE(unit_passes(u, s));
  }

  TEST_CASE("pool construction is a pure function") {
    const auto panel = fixture_panel();
    const auto a = build_pool(panel, main_filter());
    const auto b = build_pool(panel, main_filter());
    CHECK(a.donors == b.donors);
    CHECK(a.features == b.features);
  }
}
