#include <doctest.h>

#include <numeric>
#include <random>

#include "helpers.hpp"
#include "synthctl/analysis.hpp"
#include "synthctl/error.hpp"
#include "synthctl/simgen.hpp"

using namespace synthctl;
using Eigen::VectorXd;

namespace {

ScmFit fit_with_gaps(const std::vector<Year>& periods, Eigen::Index pre_count, const std::vector<double>& gaps) {
  ScmFit fit;
  fit.outcome = "y";
  fit.periods = periods;
  fit.pre_count = pre_count;
  fit.gaps = Eigen::Map<const VectorXd>(gaps.data(), static_cast<Eigen::Index>(gaps.size()));
  fit.observed = fit.gaps;
  fit.counterfactual = VectorXd::Zero(fit.gaps.size());
  return fit;
}

const std::vector<Year> kIndex{2010, 2011, 2012, 2013, 2014, 2015, 2016, 2017, 2018, 2019, 2021};

// One outcome "y" with the given per-unit rows over consecutive years.
PanelDataset rows_panel(const std::vector<std::vector<double>>& rows, Year first) {
  std::vector<UnitRecord> units;
  CellMatrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    units.push_back({"U" + std::to_string(100 + r), "School " + std::to_string(r), {}});
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.set(r, c, rows[r][c]);
  }
  std::vector<Year> periods(rows.front().size());
  std::iota(periods.begin(), periods.end(), first);
  return PanelDataset(units, periods, {{"y", m}}, {});
}

Simulation small_sim(std::uint64_t seed) {
  DgpSpec spec;
  spec.units = 16;
  spec.outcomes = {"y"};
  spec.covariates = false;
  spec.noise_sd = 1.0;
  spec.seed = seed;
  spec.effect_path = step_effect(spec, 3, 20.0);
  return generate(spec);
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("effect summary examples") {
    const auto fit = fit_with_gaps(kIndex, 4, {0, 0, 0, 0, 1, 2, 3, 10, 20, 30, 40});
    const auto s = summarize_effect(fit, {2017, 2021}, 2.0, SdBasisMode::DonorPrePooled);
    CHECK(s.att_points == doctest::Approx(25.0));
    CHECK(s.years == std::vector<Year>{2017, 2018, 2019, 2021});
    CHECK(s.att_sd_units * s.sd_basis == doctest::Approx(s.att_points).epsilon(1e-9));
    CHECK(summarize_effect(fit, {2018, 2018}, 1.0, SdBasisMode::None).att_points == 20.0);
    CHECK(summarize_effect(fit, {2014, 2021}, 27.82, SdBasisMode::None).att_sd_units ==
          doctest::Approx(106.0 / 7.0 / 27.82).epsilon(1e-12));
    const auto published_scale = fit_with_gaps({2013, 2014}, 1, {0.0, 75.66});
    CHECK(summarize_effect(published_scale, {2014, 2014}, 27.82, SdBasisMode::None).att_sd_units ==
          doctest::Approx(2.72).epsilon(0.001));
  }

  TEST_CASE("effect summary errors") {
    const auto fit = fit_with_gaps(kIndex, 4, std::vector<double>(11, 1.0));
    try {
      summarize_effect(fit, {2020, 2020}, 1.0, SdBasisMode::None);
      FAIL("expected EmptyWindow");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyWindow);
    }
    CHECK_THROWS_AS(summarize_effect(fit, {2012, 2016}, 1.0, SdBasisMode::None), Error);
    CHECK_THROWS_AS(summarize_effect(fit, {2018, 2016}, 1.0, SdBasisMode::None), Error);
  }

  TEST_CASE("effect summary is linear in the gaps") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> g(11);
      for (auto& x : g) x = n(rng);
      std::vector<double> g2(g);
      for (auto& x : g2) x *= 2.0;
      const auto a = summarize_effect(fit_with_gaps(kIndex, 4, g), {2017, 2021}, 3.0, SdBasisMode::None);
      const auto b = summarize_effect(fit_with_gaps(kIndex, 4, g2), {2017, 2021}, 3.0, SdBasisMode::None);
      CHECK(b.att_points == doctest::Approx(2.0 * a.att_points));
      CHECK(b.att_sd_units == doctest::Approx(2.0 * a.att_sd_units));
    }
  }

  TEST_CASE("default windows") {
    const auto w = default_windows(2014, kIndex);
    CHECK(w.strict_years == std::vector<Year>{2017, 2018, 2019, 2021});
    CHECK(w.full_post_years == std::vector<Year>{2014, 2015, 2016, 2017, 2018, 2019, 2021});
    for (Year y : w.strict_years)
      CHECK(std::find(w.full_post_years.begin(), w.full_post_years.end(), y) != w.full_post_years.end());
    CHECK(default_windows(2021, kIndex).strict_years.empty());
    CHECK(default_windows(2014, kIndex, 5).strict_years == std::vector<Year>{2019, 2021});
  }

  TEST_CASE("sd basis modes") {
    Eigen::MatrixXd y(3, 2);
    y << 1, 3,
         2, 5,
         9, 9;
    const auto p = testing::matrix_problem(VectorXd::Zero(3), y, 2);
    // Pooled pre values {1, 2, 3, 5}.
    CHECK(sd_basis(p, SdBasisMode::DonorPrePooled) == doctest::Approx(std::sqrt(8.75 / 3.0)));
    // Unit means {1.5, 4}.
    CHECK(sd_basis(p, SdBasisMode::DonorPreUnitMeans) == doctest::Approx(std::sqrt(3.125)));
    CHECK(sd_basis(p, SdBasisMode::None) == 1.0);
    for (auto m : {SdBasisMode::DonorPrePooled, SdBasisMode::DonorPreUnitMeans, SdBasisMode::None})
      CHECK(parse_sd_basis(to_string(m)) == m);
  }

  TEST_CASE("leave-one-out") {
    const auto sim = small_sim(8);
    const auto pool = build_pool(sim.panel, DonorFilterSpec{{}, {}, sim.truth.treated});
    const std::vector<ScmProblem> problems{build_problem(sim.panel, pool, "y", 2014, {})};

    SUBCASE("k = 1 refits once per outcome") {
      const auto study = leave_one_out(sim.panel, problems, 1, EstimatorTag::AbadieNoCov);
      REQUIRE(study.runs.size() == 1);
      CHECK(study.runs[0].effects.size() == 1);
      CHECK(study.aggregates[0].runs == 1);
      CHECK(study.aggregates[0].sd == 0.0);
    }

    SUBCASE("aggregates bracket every run") {
      const auto base = fit_abadie_nocov(problems[0]);
      int positive = 0;
      for (Eigen::Index j = 0; j < base.weights.size(); ++j) positive += base.weights(j) > 0.0;
      const int k = std::min(positive, 3);
      const auto study = leave_one_out(sim.panel, problems, k, EstimatorTag::AbadieNoCov);
      CHECK(study.runs.size() == static_cast<std::size_t>(k));
      const auto& agg = study.aggregates[0];
      for (const auto& run : study.runs) {
        REQUIRE(run.effects[0]);
        CHECK(run.effects[0]->att_points >= agg.min);
        CHECK(run.effects[0]->att_points <= agg.max);
      }
      for (std::size_t r = 1; r < study.runs.size(); ++r)
        CHECK(study.runs[r - 1].baseline_weight >= study.runs[r].baseline_weight);
      CHECK_THROWS_AS(leave_one_out(sim.panel, problems, positive + 1, EstimatorTag::AbadieNoCov), Error);
    }

    SUBCASE("dropping a zero-weight donor reproduces the baseline exactly") {
      const auto base = fit_abadie_nocov(problems[0]);
      std::optional<std::size_t> zero;
      for (std::size_t j = 0; j < pool.donors.size(); ++j)
        if (base.weights(static_cast<Eigen::Index>(j)) == 0.0) zero = j;
      REQUIRE(zero);
      std::vector<std::string> donors;
      for (std::size_t j = 0; j < pool.donors.size(); ++j)
        if (j != *zero) donors.push_back(pool.donors[j]);
      const auto reduced = build_problem(sim.panel, make_pool(sim.panel, pool.treated, donors), "y", 2014, {});
      const auto refit = fit_abadie_nocov(reduced);
      CHECK(refit.gaps == base.gaps);
      const auto w = default_windows(2014, base.periods);
      CHECK(summarize_effect(reduced, refit, w.strict, SdBasisMode::None).att_points ==
            summarize_effect(problems[0], base, w.strict, SdBasisMode::None).att_points);
    }
  }

  TEST_CASE("sensitivity sweep cardinality and feasible-set inclusion") {
    const auto sim = small_sim(9);
    const auto pool = build_pool(sim.panel, DonorFilterSpec{{}, {}, sim.truth.treated});
    std::vector<ScmProblem> problems;
    for (int i = 0; i < 4; ++i) problems.push_back(build_problem(sim.panel, pool, "y", 2014, {}));
    const auto cells = sensitivity_sweep(problems);
    REQUIRE(cells.size() == 16);
    for (std::size_t o = 0; o < 4; ++o) {
      const auto& nocov = cells[o];
      const auto& chern = cells[12 + o];
      CHECK(nocov.estimator == EstimatorTag::AbadieNoCov);
      CHECK(chern.estimator == EstimatorTag::ChernL1);
      REQUIRE(nocov.fit);
      REQUIRE(chern.fit);
      CHECK(chern.fit->pre_mspe <= nocov.fit->pre_mspe + 1e-9);
    }
    for (const auto& c : cells) {
      REQUIRE(c.strict);
      CHECK(c.strict->att_points > 0.0);
    }
  }

  TEST_CASE("ceiling percentiles") {
    const std::vector<double> pop{10, 20, 30};
    CHECK(ceiling_percentile(pop, 10) == 33);
    CHECK(ceiling_percentile(pop, 20) == 67);
    CHECK(ceiling_percentile(pop, 30) == 100);
    std::vector<double> hundred(100);
    std::iota(hundred.begin(), hundred.end(), 0.0);
    CHECK(ceiling_percentile(hundred, 99.0) == 100);
  }

  TEST_CASE("percentile table") {
    // Pre years 2000-2001, post 2002-2003.
    const auto panel = rows_panel({{10, 10, 40, 40}, {20, 20, 10, 10}, {30, 30, 30, 30}, {40, 40, 20, 20}}, 2000);
    const auto t = percentile_table(panel, {"U100", "U101", "U102", "U103"}, {"y"}, 2002);
    CHECK(t.population == 4);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].pre_percentile == 25);
    CHECK(t.rows[0].post_percentile == 100);
    CHECK(t.rows[2].difference == 0);
    int total = 0;
    for (const auto& r : t.rows) total += r.difference;
    CHECK(total == 0);
    CHECK_THROWS_AS(percentile_table(panel, {"U100"}, {"y"}, 2000), Error);
    CHECK_THROWS_AS(percentile_table(panel, {"U100"}, {"y"}, 2002, {"U101", "U102"}), Error);
  }

  TEST_CASE("a static unit keeps its percentile") {
    std::vector<std::vector<double>> rows;
    for (int u = 0; u < 10; ++u) rows.push_back({double(u), double(u), double(u) + 0.5, double(u) + 0.5});
    const auto panel = rows_panel(rows, 2000);
    const auto t = percentile_table(panel, {"U104"}, {"y"}, 2002);
    CHECK(t.rows[0].difference == 0);
  }
}
