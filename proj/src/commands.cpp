#include "synthctl/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "synthctl/csv.hpp"
#include "synthctl/error.hpp"
#include "synthctl/inference.hpp"
#include "synthctl/parallel.hpp"
#include "synthctl/report.hpp"
#include "synthctl/serialize.hpp"

namespace synthctl {

namespace {

constexpr std::string_view kCommandNames[] = {"fit", "placebo", "loo", "sensitivity", "simulate", "report"};

std::filesystem::path command_dir(const RunConfig& c, Command cmd) {
  return c.output_dir / std::string(to_string(cmd));
}

// A command owns its subdirectory; stale files from an earlier run would
// break byte-identical reruns.
void reset_dir(const std::filesystem::path& dir) {
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
}

void finish(ReportBundle& bundle, const RunConfig& c, Command cmd) {
  ojson manifest;
  manifest["command"] = std::string(to_string(cmd));
  manifest["fingerprint"] = c.fingerprint;
  manifest["config"] = c.canonical;
  ojson files = ojson::array();
  for (const auto& [name, content] : bundle.files) files.push_back({{"name", name}, {"fnv1a", fnv1a_hex(content)}});
  manifest["files"] = files;
  bundle.add("manifest.json", manifest.dump(2) + "\n");
  const auto dir = command_dir(c, cmd);
  reset_dir(dir);
  bundle.write(dir);
}

std::string json_text(const ojson& j) { return j.dump(2) + "\n"; }

std::vector<std::string> read_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto records = csv::parse(line);
  return records.empty() ? std::vector<std::string>{} : records.front().fields;
}

// Donors ordered by their mean weight across fits, ties by pool order.
std::vector<std::string> top_donors(const std::vector<ScmFit>& fits, int k) {
  if (fits.empty()) return {};
  const auto& donors = fits.front().donors;
  std::vector<double> mean(donors.size(), 0.0);
  for (const auto& f : fits) {
    for (std::size_t d = 0; d < donors.size(); ++d) mean[d] += f.weights(static_cast<Eigen::Index>(d));
  }
  std::vector<std::size_t> order(donors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < order.size() && static_cast<int>(out.size()) < k; ++i) {
    if (mean[order[i]] > 0.0) out.push_back(donors[order[i]]);
  }
  return out;
}

std::string treated_name(const Workspace& ws) {
  const auto& u = ws.panel.units()[ws.panel.unit_index(ws.pool.treated)];
  return u.name.empty() ? u.id : u.name;
}

void add_percentiles(ReportBundle& bundle, const RunConfig& c, const Workspace& ws, const std::vector<ScmFit>& fits) {
  std::vector<std::string> units{ws.pool.treated};
  for (auto& d : top_donors(fits, c.percentiles.top_donors)) units.push_back(d);
  std::vector<std::string> population;
  if (!c.percentiles.whole_panel) population = ws.pool.members();
  auto table = percentile_table(ws.panel, units, c.outcomes, c.treatment_year, population);
  bundle.add("percentiles.json", json_text(to_json(table)));
  bundle.add_table("table5_percentiles", render_percentile_table(table, c.outcomes, &ws.panel));
}

void add_fit_outputs(ReportBundle& bundle, const RunConfig& c, const Workspace& ws, const std::vector<ScmFit>& fits,
                     const std::vector<std::vector<BalanceRow>>& balances) {
  const std::string tname = treated_name(ws);
  std::vector<EffectSummary> effects;
  for (std::size_t o = 0; o < fits.size(); ++o) {
    const auto& fit = fits[o];
    const auto& key = fit.outcome;
    const ScmProblem& p = ws.problems[o];
    bundle.add_table("table1_weights_" + key, render_weights_table(fit, &ws.panel));
    if (!balances[o].empty()) bundle.add_table("table2_balance_" + key, render_balance_table(balances[o], tname));
    bundle.add_figure("figure1_path_" + key, render_gap_figure(fit, FigureStyle::Path), c.svg);
    bundle.add_figure("gap_" + key, render_gap_figure(fit, FigureStyle::Gap), c.svg);
    const auto w = default_windows(c.treatment_year, fit.periods, c.strict_offset);
    const double basis = sd_basis(p, c.sd_mode);
    effects.push_back(summarize_effect(fit, w.full_post, basis, c.sd_mode));
    if (!w.strict_years.empty()) effects.push_back(summarize_effect(fit, w.strict, basis, c.sd_mode));
  }
  ojson ej = ojson::array();
  for (const auto& e : effects) ej.push_back(to_json(e));
  bundle.add("effects.json", json_text(ej));
  bundle.add_table("effects", render_effect_table(effects));
  add_percentiles(bundle, c, ws, fits);
}

}  // namespace

std::optional<Command> parse_command(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kCommandNames); ++i) {
    if (kCommandNames[i] == name) return static_cast<Command>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Command command) { return kCommandNames[static_cast<int>(command)]; }

Workspace prepare(const RunConfig& c) {
  if (c.data.schools.empty()) throw Error(ErrorCode::ConfigError, "config key 'data.schools' is required");
  const auto header = read_header(c.data.schools);
  for (const auto& o : c.outcomes) {
    if (std::find(header.begin() + std::min<std::size_t>(3, header.size()), header.end(), o) == header.end()) {
      throw Error(ErrorCode::UnknownOutcome, "unknown outcome '" + o + "'");
    }
  }
  IngestConfig ingest;
  ingest.attributes_file = c.data.attributes;
  ingest.outcome_keys = c.outcomes;
  ingest.exclude_years = c.data.exclude_years;

  Workspace ws;
  ws.panel = load_panel(c.data.schools, ingest);
  if (c.data.income) ws.panel = join_income(ws.panel, load_income(*c.data.income));
  validate_against(c, ws.panel);
  ws.pool = build_pool(ws.panel, c.donor_filter);
  for (const auto& o : c.outcomes) {
    ws.problems.push_back(build_problem(ws.panel, ws.pool, o, c.treatment_year, c.covariates, c.solver));
  }
  return ws;
}

void cmd_fit(const RunConfig& c, unsigned jobs) {
  const Workspace ws = prepare(c);
  auto fits = parallel_map(ws.problems.size(), jobs, [&](std::size_t o) {
    return fit_estimator(ws.problems[o], c.estimator, c.estimator_options);
  });
  ReportBundle bundle;
  std::vector<std::vector<BalanceRow>> balances;
  for (std::size_t o = 0; o < fits.size(); ++o) {
    balances.push_back(covariate_balance(ws.problems[o], fits[o]));
    bundle.add("fit_" + fits[o].outcome + ".json", json_text(to_json(fits[o], &balances.back())));
  }
  add_fit_outputs(bundle, c, ws, fits, balances);
  finish(bundle, c, Command::Fit);
}

void cmd_placebo(const RunConfig& c, unsigned jobs) {
  const Workspace ws = prepare(c);
  ReportBundle bundle;
  std::vector<std::pair<std::string, double>> p_values;
  ojson summary = ojson::array();
  for (const auto& p : ws.problems) {
    PlaceboStudy study = run_placebo(ws.panel, p, c.estimator, c.estimator_options, jobs);
    const auto decision = test_sharp_null(study, c.alpha);
    p_values.emplace_back(p.outcome, study.p_value);
    summary.push_back({{"outcome", p.outcome},
                       {"p_value", study.p_value},
                       {"alpha", c.alpha},
                       {"reject_sharp_null", decision.reject},
                       {"entries", study.entries.size()},
                       {"excluded", study.excluded.size()}});
    bundle.add("placebo_" + p.outcome + ".json", json_text(to_json(study, decision)));
    bundle.add_figure("figure2_placebo_" + p.outcome, render_gap_figure(study), c.svg);
  }
  bundle.add("p_values.json", json_text(summary));
  bundle.add_table("table3_pvalues", render_pvalue_table(p_values, c.alpha));
  finish(bundle, c, Command::Placebo);
}

void cmd_loo(const RunConfig& c, unsigned jobs) {
  const Workspace ws = prepare(c);
  LooStudy study =
      leave_one_out(ws.panel, ws.problems, c.loo_k, c.estimator, c.estimator_options, c.sd_mode, jobs, c.strict_offset);
  ReportBundle bundle;
  bundle.add("loo.json", json_text(to_json(study)));
  bundle.add_table("table4_loo", render_loo_table(study));
  std::vector<SeriesRow> series;
  for (const auto& run : study.runs) {
    for (std::size_t o = 0; o < run.effects.size(); ++o) {
      if (!run.effects[o]) continue;
      const auto& e = *run.effects[o];
      for (std::size_t t = 0; t < e.years.size(); ++t) {
        series.push_back({run.excluded, e.years[t], e.gaps[t], "loo_" + e.outcome});
      }
    }
  }
  bundle.add("loo_gaps.csv", series_csv(series));
  finish(bundle, c, Command::Loo);
}

void cmd_sensitivity(const RunConfig& c, unsigned jobs) {
  const Workspace ws = prepare(c);
  auto cells = sensitivity_sweep(ws.problems, c.sensitivity_estimators, c.estimator_options, c.sd_mode, jobs,
                                 c.strict_offset);
  ReportBundle bundle;
  ojson all = ojson::array();
  for (const auto& cell : cells) {
    ojson j;
    j["estimator"] = std::string(to_string(cell.estimator));
    j["outcome"] = cell.outcome;
    j["fit"] = cell.fit ? to_json(*cell.fit) : ojson(nullptr);
    j["full_post"] = cell.full_post ? to_json(*cell.full_post) : ojson(nullptr);
    j["strict"] = cell.strict ? to_json(*cell.strict) : ojson(nullptr);
    j["error"] = cell.error.empty() ? ojson(nullptr) : ojson(cell.error);
    all.push_back(j);
    if (cell.fit) {
      const std::string stem = std::string(to_string(cell.estimator)) + "_" + cell.outcome;
      bundle.add_figure("path_" + stem, render_gap_figure(*cell.fit, FigureStyle::Path), c.svg);
    }
  }
  bundle.add("sweep.json", json_text(all));
  bundle.add_table("sensitivity", render_sweep_table(cells));
  finish(bundle, c, Command::Sensitivity);
}

void cmd_simulate(const RunConfig& c) {
  if (!c.simulate) throw Error(ErrorCode::ConfigError, "config has no 'simulate' section");
  DgpSpec spec = c.simulate->spec;
  spec.seed = c.seed;
  const Simulation sim = generate(spec);
  write_simulation(sim, c.simulate->output);
}

void cmd_report(const RunConfig& c) {
  const Workspace ws = prepare(c);
  const auto fit_dir = command_dir(c, Command::Fit);
  if (!std::filesystem::exists(fit_dir / "manifest.json")) {
    throw Error(ErrorCode::IoError, "no fit results in " + fit_dir.string() + "; run the fit command first");
  }
  ReportBundle bundle;
  std::vector<ScmFit> fits;
  std::vector<std::vector<BalanceRow>> balances;
  for (const auto& o : c.outcomes) {
    const auto j = read_json(fit_dir / ("fit_" + o + ".json"));
    fits.push_back(fit_from_json(j));
    balances.push_back(balance_from_json(j));
  }
  add_fit_outputs(bundle, c, ws, fits, balances);

  std::string md = "# Synthetic control report\n\nConfig fingerprint: " + c.fingerprint + "\n\n";
  auto append = [&](const Table& t) { md += t.to_markdown() + "\n"; };
  for (std::size_t o = 0; o < fits.size(); ++o) {
    append(render_weights_table(fits[o], &ws.panel));
    if (!balances[o].empty()) append(render_balance_table(balances[o], treated_name(ws)));
  }

  const auto placebo_dir = command_dir(c, Command::Placebo);
  if (std::filesystem::exists(placebo_dir / "manifest.json")) {
    std::vector<std::pair<std::string, double>> p_values;
    for (const auto& o : c.outcomes) {
      const auto study = placebo_from_json(read_json(placebo_dir / ("placebo_" + o + ".json")));
      p_values.emplace_back(o, study.p_value);
      bundle.add_figure("figure2_placebo_" + o, render_gap_figure(study), c.svg);
    }
    const auto t = render_pvalue_table(p_values, c.alpha);
    bundle.add_table("table3_pvalues", t);
    append(t);
  }
  const auto loo_dir = command_dir(c, Command::Loo);
  if (std::filesystem::exists(loo_dir / "manifest.json")) {
    const auto t = render_loo_table(loo_from_json(read_json(loo_dir / "loo.json")));
    bundle.add_table("table4_loo", t);
    append(t);
  }
  bundle.add("report.md", md);
  finish(bundle, c, Command::Report);
}

int run_command(Command command, const RunConfig& c, unsigned jobs, std::ostream& err) {
  try {
    switch (command) {
      case Command::Fit: cmd_fit(c, jobs); break;
      case Command::Placebo: cmd_placebo(c, jobs); break;
      case Command::Loo: cmd_loo(c, jobs); break;
      case Command::Sensitivity: cmd_sensitivity(c, jobs); break;
      case Command::Simulate: cmd_simulate(c); break;
      case Command::Report: cmd_report(c); break;
    }
    std::error_code ec;
    std::filesystem::remove(c.output_dir / "error.json", ec);
    return 0;
  } catch (const Error& e) {
    ojson report;
    report["command"] = std::string(to_string(command));
    report["error"] = std::string(to_string(e.code()));
    report["message"] = e.what();
    report["fingerprint"] = c.fingerprint;
    err << report.dump() << '\n';
    try {
      std::filesystem::create_directories(c.output_dir);
      std::ofstream(c.output_dir / "error.json", std::ios::binary) << report.dump(2) << '\n';
    } catch (const std::exception&) {
    }
    return 1;
  }
}

}  // namespace synthctl
