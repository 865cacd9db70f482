// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.
//
// SYNTHCTL_UPDATE_GOLDEN=1 rewrites tests/golden from the current build
// instead of comparing against it.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "../unit/helpers.hpp"
#include "../unit/oracles.hpp"
#include "synthctl/analysis.hpp"
#include "synthctl/commands.hpp"
#include "synthctl/csv.hpp"
#include "synthctl/error.hpp"
#include "synthctl/inference.hpp"
#include "synthctl/serialize.hpp"
#include "synthctl/simgen.hpp"

using namespace synthctl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const std::filesystem::path kSource{SYNTHCTL_SOURCE_DIR};

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(std::string s) { notes.push_back(std::move(s)); }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Largest violation of the simplex KKT conditions at w.
double kkt_residual(const VectorXd& x1, const MatrixXd& x0, const VectorXd& v, const VectorXd& w) {
  const VectorXd g = 2.0 * x0.transpose() * v.asDiagonal() * (x0 * w - x1);
  double common = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w(i) > 1e-6) common = std::min(common, g(i));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > 1e-6) worst = std::max(worst, std::abs(g(i) - common));
    else worst = std::max(worst, common - g(i));
  }
  return worst;
}

Outcome solver_oracle() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> kd(1, 3), jd(1, 6);
  double worst_gap = -std::numeric_limits<double>::infinity(), worst_kkt = 0.0;
  int failures = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int k = kd(rng), j = jd(rng);
    const MatrixXd x0 = testing::normal_matrix(rng, k, j);
    const VectorXd x1 = testing::normal_matrix(rng, k, 1).col(0);
    const VectorXd v = testing::random_simplex(rng, k);
    const auto r = solve_simplex_wls(x1, x0, v);
    const VectorXd sv = v.array().sqrt();
    const double grid = oracle::simplex_grid(sv.asDiagonal() * x0, sv.asDiagonal() * x1, 100);
    const double kkt = kkt_residual(x1, x0, v, r.weights);
    worst_gap = std::max(worst_gap, r.objective - grid);
    worst_kkt = std::max(worst_kkt, kkt);
    if (r.objective > grid + 1e-4 || kkt >= 1e-6) ++failures;
  }
  const double elapsed = seconds_since(start);
  out.require(failures == 0, fmt::format("{} instances", failures));
  out.require(elapsed < 60.0, "runtime");
  out.note(fmt::format("500 instances, max(objective - grid) = {:.2e}, max KKT residual = {:.2e}, {:.1f} s",
                       worst_gap, worst_kkt, elapsed));
  return out;
}

Outcome feasible_set_inclusion() {
  Outcome out;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> td(2, 10), jd(1, 30);
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    const int t0 = td(rng), j = jd(rng);
    const MatrixXd y = 10.0 * testing::normal_matrix(rng, t0 + 3, j);
    const VectorXd yt = 10.0 * testing::normal_matrix(rng, t0 + 3, 1).col(0);
    const auto p = testing::matrix_problem(yt, y, t0);
    const double diff = fit_chern(p, 1.0).pre_mspe - fit_abadie_nocov(p).pre_mspe;
    worst = std::max(worst, diff);
  }
  out.require(worst <= 1e-9, "chern pre-mspe exceeded nocov");
  out.note(fmt::format("100 problems, max(chern - nocov) = {:.2e}", worst));
  return out;
}

Outcome exact_fit_recovery() {
  Outcome out;
  std::mt19937_64 rng(3);
  double worst_pre = 0.0, worst_post = 0.0, worst_w = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    // Six donors over 8 pre and 4 post periods, six covariates, so both
    // the outcome paths and the covariates pin the weights down uniquely.
    const int j = 6, t0 = 8, t = 12;
    const MatrixXd y = (100.0 + 20.0 * testing::normal_matrix(rng, t, j).array()).matrix();
    const MatrixXd x0 = testing::normal_matrix(rng, 6, j);
    std::vector<int> idx{0, 1, 2, 3, 4, 5};
    std::shuffle(idx.begin(), idx.end(), rng);
    VectorXd w = VectorXd::Zero(j);
    const VectorXd mix = testing::random_simplex(rng, 3);
    for (int s = 0; s < 3; ++s) w(idx[s]) = mix(s);
    const auto p = testing::matrix_problem(y * w, y, t0, x0 * w, x0);
    for (int e = 0; e < 5; ++e) {
      const auto tag = static_cast<EstimatorTag>(e);
      const auto fit = fit_estimator(p, tag);
      worst_pre = std::max(worst_pre, fit.pre_mspe);
      worst_post = std::max(worst_post, fit.post_gaps().lpNorm<Eigen::Infinity>());
      if (tag == EstimatorTag::AbadieNoCov) worst_w = std::max(worst_w, (fit.weights - w).lpNorm<Eigen::Infinity>());
    }
  }
  out.require(worst_pre < 1e-10, "pre-mspe");
  out.require(worst_post < 1e-6, "post gap");
  out.require(worst_w < 1e-4, "nocov weights");
  out.note(fmt::format("20 problems x 5 estimators, max pre-mspe = {:.1e}, max |post gap| = {:.1e}, "
                       "max nocov weight error = {:.1e}",
                       worst_pre, worst_post, worst_w));
  return out;
}

// p recomputed from the serialized entries, independent of run_placebo.
double recount(const ojson& study) {
  double treated = 0.0;
  for (const auto& e : study.at("entries"))
    if (e.at("treated").get<bool>()) treated = e.at("rmspe_ratio").get<double>();
  std::size_t at_least = 0, n = 0;
  for (const auto& e : study.at("entries")) {
    ++n;
    if (e.at("rmspe_ratio").get<double>() >= treated - 1e-12) ++at_least;
  }
  return static_cast<double>(at_least) / static_cast<double>(n);
}

DgpSpec small_spec(std::uint64_t seed, double effect) {
  DgpSpec spec;
  spec.units = 20;
  spec.first_year = 2000;
  spec.last_year = 2017;
  spec.gap_year.reset();
  spec.treatment_year = 2012;
  spec.outcomes = {"y"};
  spec.covariates = false;
  spec.treated_in_hull = false;
  spec.noise_sd = 5.0;
  spec.seed = seed;
  spec.effect_path = step_effect(spec, 0, effect);
  return spec;
}

PlaceboStudy small_placebo(const DgpSpec& spec) {
  const auto sim = generate(spec);
  const auto pool = build_pool(sim.panel, DonorFilterSpec{{}, {}, sim.truth.treated});
  const auto p = build_problem(sim.panel, pool, "y", spec.treatment_year, {});
  return run_placebo(sim.panel, p, EstimatorTag::AbadieNoCov);
}

Outcome inference(const std::filesystem::path& placebo_dir) {
  Outcome out;
  int recounts = 0, mismatches = 0;
  auto check = [&](const PlaceboStudy& s) {
    const auto j = to_json(s, test_sharp_null(s, 0.05));
    const auto parsed = ojson::parse(j.dump());
    ++recounts;
    if (recount(parsed) != s.p_value || parsed.at("p_value").get<double>() != s.p_value) ++mismatches;
  };

  // Extreme rank.
  const auto extreme = small_placebo(small_spec(11, 500.0));
  check(extreme);
  out.require(extreme.p_value == 1.0 / static_cast<double>(extreme.entries.size()), "extreme rank p != 1/N");

  // Null effect over 100 seeds.
  std::vector<double> ps;
  std::size_t excluded = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto s = small_placebo(small_spec(1000 + seed, 0.0));
    check(s);
    excluded += s.excluded.size();
    ps.push_back(s.p_value);
  }
  double worst = 0.0;
  std::string ecdf;
  for (int d = 1; d <= 9; ++d) {
    const double q = d / 10.0;
    const double f = static_cast<double>(std::count_if(ps.begin(), ps.end(), [&](double p) { return p <= q + 1e-12; })) /
                     static_cast<double>(ps.size());
    worst = std::max(worst, std::abs(f - q));
    ecdf += fmt::format("{}{:.2f}", d == 1 ? "" : " ", f);
  }
  out.require(worst <= 0.1, "null p-value ECDF");

  // Placebo runs written by the pipeline.
  int files = 0;
  if (std::filesystem::exists(placebo_dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(placebo_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("placebo_", 0) != 0 || entry.path().extension() != ".json") continue;
      const auto j = read_json(entry.path());
      ++files;
      ++recounts;
      if (recount(j) != j.at("p_value").get<double>()) ++mismatches;
    }
  }
  out.require(files > 0, "no pipeline placebo files to recount");
  out.require(mismatches == 0, fmt::format("{} recount mismatches", mismatches));
  out.note(fmt::format("{} recounts agree; extreme p = 1/{}; null ECDF at deciles [{}], max deviation {:.2f}, "
                       "{} placebo exclusions",
                       recounts, extreme.entries.size(), ecdf, worst, excluded));
  return out;
}

Outcome effect_arithmetic(const std::vector<ScmProblem>& problems) {
  Outcome out;
  const auto w = default_windows(2014, {2010, 2011, 2012, 2013, 2014, 2015, 2016, 2017, 2018, 2019, 2021});
  out.require(w.strict_years == std::vector<Year>{2017, 2018, 2019, 2021}, "strict window");
  double worst = 0.0;
  int summaries = 0;
  for (const auto& p : problems) {
    for (int e = 0; e < 5; ++e) {
      const auto fit = fit_estimator(p, static_cast<EstimatorTag>(e));
      const auto fw = default_windows(p.treatment_year, fit.periods);
      out.require(fw.strict_years == w.strict_years, "fixture strict window");
      for (auto mode : {SdBasisMode::DonorPrePooled, SdBasisMode::DonorPreUnitMeans, SdBasisMode::None}) {
        for (const auto& win : {fw.full_post, fw.strict}) {
          const auto s = summarize_effect(p, fit, win, mode);
          worst = std::max(worst, std::abs(s.att_sd_units * s.sd_basis - s.att_points));
          ++summaries;
        }
      }
    }
  }
  out.require(worst <= 1e-9, "att-sd-units x sd-basis");
  out.note(fmt::format("strict window {{2017, 2018, 2019, 2021}}; {} summaries, max |sd x basis - att| = {:.1e}",
                       summaries, worst));
  return out;
}

Outcome simulator_recovery() {
  Outcome out;
  const auto start = Clock::now();
  double err_nocov = 0.0, err_ferman = 0.0, bias_nocov = 0.0, bias_ferman = 0.0;
  const int seeds = 200;
  for (int s = 0; s < seeds; ++s) {
    DgpSpec spec;
    spec.outcomes = {"numeracy_y3"};
    spec.covariates = false;
    spec.seed = 5000 + static_cast<std::uint64_t>(s);
    spec.effect_path = step_effect(spec, 3, 50.0);
    const auto sim = generate(spec);
    const auto pool = build_pool(sim.panel, DonorFilterSpec{{}, {}, sim.truth.treated});
    const auto p = build_problem(sim.panel, pool, "numeracy_y3", 2014, {});
    const auto win = default_windows(2014, p.periods()).strict;
    const double a = summarize_effect(fit_abadie_nocov(p), win, 1.0, SdBasisMode::None).att_points - 50.0;
    const double b = summarize_effect(fit_ferman(p), win, 1.0, SdBasisMode::None).att_points - 50.0;
    err_nocov += std::abs(a);
    err_ferman += std::abs(b);
    bias_nocov += a;
    bias_ferman += b;
  }
  err_nocov /= seeds;
  err_ferman /= seeds;
  bias_nocov /= seeds;
  bias_ferman /= seeds;
  const double elapsed = seconds_since(start);
  out.require(err_nocov < 5.0, "nocov mean absolute error");
  out.require(err_ferman < 5.0, "ferman mean absolute error");
  out.require(elapsed < 600.0, "runtime");
  out.note(fmt::format("200 seeds, mean |error| nocov {:.2f} ferman {:.2f}, mean bias nocov {:+.2f} ferman {:+.2f}, "
                       "{:.1f} s",
                       err_nocov, err_ferman, bias_nocov, bias_ferman, elapsed));
  return out;
}

std::vector<std::string> csv_header(const std::string& text) {
  const auto records = csv::parse(text);
  return records.empty() ? std::vector<std::string>{} : records.front().fields;
}

std::size_t line_count(const std::string& text) { return csv::parse(text).size(); }

Outcome pipeline_shapes(const std::filesystem::path& out_dir, const RunConfig& config) {
  Outcome out;
  const bool update = std::getenv("SYNTHCTL_UPDATE_GOLDEN") != nullptr;
  const auto golden = kSource / "tests/golden";
  std::vector<std::pair<std::string, std::string>> files;  // (command dir, file)
  for (const auto& o : config.outcomes) {
    for (const char* ext : {".csv", ".md"}) {
      files.push_back({"fit", "table1_weights_" + o + ext});
      files.push_back({"fit", "table2_balance_" + o + ext});
    }
    files.push_back({"placebo", "figure2_placebo_" + o + ".csv"});
  }
  for (const char* ext : {".csv", ".md"}) {
    files.push_back({"placebo", std::string("table3_pvalues") + ext});
    files.push_back({"loo", std::string("table4_loo") + ext});
  }

  // Structure.
  for (const auto& o : config.outcomes) {
    const auto t1 = testing::read_text(out_dir / "fit" / ("table1_weights_" + o + ".csv"));
    out.require(csv_header(t1) == std::vector<std::string>{"School name", "Weight"}, "table 1 header");
    const auto t2 = testing::read_text(out_dir / "fit" / ("table2_balance_" + o + ".csv"));
    out.require(csv_header(t2).size() == 3, "table 2 columns");
    out.require(line_count(t2) == 1 + config.covariates.size(), "table 2 rows");
    const auto fig = testing::read_text(out_dir / "placebo" / ("figure2_placebo_" + o + ".csv"));
    std::set<std::string> units;
    const auto records = csv::parse(fig);
    for (std::size_t r = 1; r < records.size(); ++r) units.insert(records[r].fields.at(0));
    out.require(units.size() == 109, "figure 2 polyline count " + std::to_string(units.size()));
    const auto svg = testing::read_text(out_dir / "placebo" / ("figure2_placebo_" + o + ".svg"));
    std::size_t lines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
    out.require(lines >= 109, "figure 2 svg polylines");
  }
  const auto t3 = testing::read_text(out_dir / "placebo/table3_pvalues.csv");
  out.require(csv_header(t3) == std::vector<std::string>{"", "Year 3", "Year 5"}, "table 3 header");
  out.require(line_count(t3) == 3, "table 3 rows");
  const auto t4 = testing::read_text(out_dir / "loo/table4_loo.csv");
  out.require(csv_header(t4).size() == config.outcomes.size(), "table 4 columns");
  out.require(line_count(t4) == 4, "table 4 rows");

  // Goldens.
  int compared = 0, differing = 0;
  for (const auto& [cmd, name] : files) {
    const auto produced = testing::read_text(out_dir / cmd / name);
    if (update) {
      std::filesystem::create_directories(golden);
      std::ofstream(golden / name, std::ios::binary) << produced;
      continue;
    }
    ++compared;
    if (!std::filesystem::exists(golden / name) || testing::read_text(golden / name) != produced) {
      ++differing;
      out.note("golden differs: " + name);
    }
  }
  if (update) {
    out.note(fmt::format("rewrote {} golden files", files.size()));
  } else {
    out.require(differing == 0, fmt::format("{} of {} golden files differ", differing, compared));
    out.note(fmt::format("tables 1-4 structure checked; {} golden files byte-exact; 109 placebo polylines per outcome",
                         compared));
  }
  return out;
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[std::filesystem::relative(e.path(), dir).string()] = testing::read_text(e.path());
  }
  return files;
}

Outcome determinism(const RunConfig& base, const std::filesystem::path& placebo_jobs1) {
  Outcome out;
  const auto start = Clock::now();
  int comparisons = 0;
  auto run_into = [&](Command cmd, const std::filesystem::path& dir, unsigned jobs) {
    RunConfig c = base;
    override_output(c, dir);
    std::ostringstream err;
    if (run_command(cmd, c, jobs, err) != 0) throw std::runtime_error(err.str());
    return cmd == Command::Simulate ? snapshot(dir) : snapshot(dir / std::string(to_string(cmd)));
  };

  for (auto cmd : {Command::Fit, Command::Loo, Command::Sensitivity, Command::Simulate}) {
    testing::TempDir ref_dir;
    const auto ref = run_into(cmd, ref_dir.path(), 1);
    for (unsigned jobs = 1; jobs <= 8; ++jobs) {
      testing::TempDir dir;
      const auto again = run_into(cmd, dir.path(), jobs);
      ++comparisons;
      if (again != ref) out.require(false, fmt::format("{} differs at --jobs {}", to_string(cmd), jobs));
    }
  }
  {
    // Report needs a fit directory next to it.
    testing::TempDir a, b;
    run_into(Command::Fit, a.path(), 1);
    run_into(Command::Fit, b.path(), 8);
    ++comparisons;
    if (run_into(Command::Report, a.path(), 1) != run_into(Command::Report, b.path(), 8))
      out.require(false, "report differs");
  }
  {
    testing::TempDir dir;
    const auto again = run_into(Command::Placebo, dir.path(), 8);
    ++comparisons;
    if (again != snapshot(placebo_jobs1)) out.require(false, "placebo differs between --jobs 1 and 8");
  }
  out.note(fmt::format("{} repeated runs byte-identical (fit, loo, sensitivity, simulate at --jobs 1..8; "
                       "report; placebo at --jobs 1 and 8), {:.0f} s",
                       comparisons, seconds_since(start)));
  return out;
}

bool emit(int n, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.note(std::string("exception: ") + e.what());
  }
  std::string detail;
  for (const auto& s : o.notes) detail += (detail.empty() ? "" : "; ") + s;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  // Criteria listed here are still run and printed. A FAIL among them does
  // not fail the process, but an unexpected PASS does, so the list cannot
  // go stale unnoticed.
  std::vector<int> expect_fail;
  CLI::App app{"synthctl acceptance criteria"};
  app.add_option("--expect-fail", expect_fail, "criteria known to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  // Pipeline outputs shared by criteria 4, 7 and 8.
  testing::TempDir pipeline;
  RunConfig config = load_config(kSource / "configs/main_spec.json");
  override_output(config, pipeline.path());
  std::string pipeline_error;
  for (auto cmd : {Command::Fit, Command::Placebo, Command::Loo}) {
    std::ostringstream err;
    if (run_command(cmd, config, 1, err) != 0) pipeline_error += err.str();
  }
  const auto ws = prepare(config);

  std::map<int, bool> results;
  results[1] = emit(1, "solver matches the grid oracle", solver_oracle);
  results[2] = emit(2, "l1-ball pre-fit never worse than simplex", feasible_set_inclusion);
  results[3] = emit(3, "exact-fit recovery", exact_fit_recovery);
  results[4] = emit(4, "exact p-values", [&] { return inference(pipeline.path() / "placebo"); });
  results[5] = emit(5, "effect arithmetic", [&] { return effect_arithmetic(ws.problems); });
  results[6] = emit(6, "simulator ATT recovery", simulator_recovery);
  results[7] = emit(7, "pipeline tables and figure data", [&] {
    if (!pipeline_error.empty()) throw std::runtime_error(pipeline_error);
    return pipeline_shapes(pipeline.path(), config);
  });
  results[8] = emit(8, "determinism across runs and --jobs", [&] { return determinism(config, pipeline.path() / "placebo"); });

  int passed = 0;
  bool ok = true;
  for (const auto& [n, pass] : results) {
    passed += pass ? 1 : 0;
    const bool expected = std::find(expect_fail.begin(), expect_fail.end(), n) != expect_fail.end();
    if (pass && expected) {
      std::cout << "note: criterion " << n << " passed but is listed in --expect-fail\n";
      ok = false;
    } else if (!pass && expected) {
      std::cout << "note: criterion " << n << " failed as expected\n";
    } else if (!pass) {
      ok = false;
    }
  }
  std::cout << passed << " of " << results.size() << " criteria passed" << std::endl;
  return ok ? 0 : 1;
}
