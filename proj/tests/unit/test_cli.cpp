#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "synthctl/commands.hpp"
#include "synthctl/error.hpp"

using namespace synthctl;

namespace {

RunConfig fixture_config(const std::filesystem::path& out) {
  auto c = load_config(std::filesystem::path(SYNTHCTL_SOURCE_DIR) / "configs/main_spec.json");
  override_output(c, out);
  return c;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("command names") {
    for (auto c : {Command::Fit, Command::Placebo, Command::Loo, Command::Sensitivity, Command::Simulate,
                   Command::Report})
      CHECK(parse_command(to_string(c)) == c);
    CHECK_FALSE(parse_command("estimate"));
  }

  TEST_CASE("fit writes a manifest with hashes and the fingerprint") {
    testing::TempDir dir;
    auto c = fixture_config(dir.path());
    c.estimator = EstimatorTag::AbadieNoCov;
    std::ostringstream err;
    REQUIRE(run_command(Command::Fit, c, 1, err) == 0);
    CHECK(err.str().empty());
    const auto manifest = nlohmann::json::parse(testing::read_text(dir / "fit/manifest.json"));
    CHECK(manifest.at("command") == "fit");
    CHECK(manifest.at("fingerprint") == c.fingerprint);
    CHECK(manifest.at("files").size() > 10);
    CHECK(std::filesystem::exists(dir / "fit/table1_weights_numeracy_y3.csv"));
    CHECK(std::filesystem::exists(dir / "fit/effects.json"));

    SUBCASE("a second run is byte identical") {
      const auto first = testing::read_text(dir / "fit/manifest.json");
      REQUIRE(run_command(Command::Fit, c, 3, err) == 0);
      CHECK(testing::read_text(dir / "fit/manifest.json") == first);
    }

    SUBCASE("report re-renders from the fit output") {
      REQUIRE(run_command(Command::Report, c, 1, err) == 0);
      CHECK(testing::read_text(dir / "report/table1_weights_numeracy_y3.csv") ==
            testing::read_text(dir / "fit/table1_weights_numeracy_y3.csv"));
      CHECK(std::filesystem::exists(dir / "report/report.md"));
    }
  }

  TEST_CASE("domain errors produce a JSON report and exit code 1") {
    testing::TempDir dir;
    auto c = fixture_config(dir.path());
    c.outcomes = {"spelling_y3"};
    std::ostringstream err;
    CHECK(run_command(Command::Fit, c, 1, err) == 1);
    const auto report = nlohmann::json::parse(err.str());
    CHECK(report.at("command") == "fit");
    CHECK(report.at("error") == "UnknownOutcome");
    CHECK(report.at("fingerprint") == c.fingerprint);
    CHECK(nlohmann::json::parse(testing::read_text(dir / "error.json")) == report);
  }

  TEST_CASE("report without a fit run fails cleanly") {
    testing::TempDir dir;
    std::ostringstream err;
    CHECK(run_command(Command::Report, fixture_config(dir.path()), 1, err) == 1);
    CHECK(nlohmann::json::parse(err.str()).at("command") == "report");
  }
}
