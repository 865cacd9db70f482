#include "synthctl/report.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "synthctl/csv.hpp"
#include "synthctl/error.hpp"
#include "synthctl/pool.hpp"
#include "synthctl/svg.hpp"

namespace synthctl {

namespace {

const std::regex kOutcomeKey{R"(^([A-Za-z]+)_[yY](\d+)$)"};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string unit_name(const PanelDataset* panel, const std::string& id) {
  if (panel) {
    if (auto idx = panel->find_unit(id)) {
      const auto& name = panel->units()[*idx].name;
      if (!name.empty()) return name;
    }
  }
  return id;
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else out += c;
  }
  return out;
}

}  // namespace

std::string Table::to_csv() const {
  std::ostringstream out;
  csv::write_row(out, header);
  for (const auto& r : rows) csv::write_row(out, r);
  return out.str();
}

std::string Table::to_markdown() const {
  std::string s;
  if (!title.empty()) s += "### " + title + "\n\n";
  s += "|";
  for (const auto& h : header) s += " " + md_cell(h) + " |";
  s += "\n|";
  for (std::size_t c = 0; c < header.size(); ++c) s += c == 0 ? " :--- |" : " ---: |";
  s += "\n";
  for (const auto& r : rows) {
    s += "|";
    for (const auto& cell : r) s += " " + md_cell(cell) + " |";
    s += "\n";
  }
  if (!notes.empty()) {
    s += "\n";
    for (const auto& n : notes) s += "Note. " + n + "\n";
  }
  return s;
}

std::string outcome_label(const std::string& key) {
  std::smatch m;
  if (std::regex_match(key, m, kOutcomeKey)) return "Year-" + m[2].str() + " " + capitalize(m[1].str());
  return key;
}

std::string covariate_label(const std::string& key, const std::string& treated_name) {
  static const std::map<std::string, std::string> labels{
      {"attendance_share", "Attendance (share)"},
      {"enrolments_fte", "Enrolments (FTE)"},
      {"icsea", "ICSEA"},
      {kIncomeCovariate, "Postcode mean taxable income"},
      {"female_share", "Females (share)"},
      {"mean_class_size", "Mean class size"},
      {"lbote_pct", "Non-English language background (share)"},
      {"year_first_teacher", "Year of first teacher"},
  };
  if (key == kRadialDistance) return "Radial distance for " + treated_name;
  auto it = labels.find(key);
  return it == labels.end() ? key : it->second;
}

std::string fixed2(double v) {
  std::string s = fmt::format("{:.2f}", v);
  if (s == "-0.00") s = "0.00";
  return s;
}

Table render_weights_table(const ScmFit& fit, const PanelDataset* panel, double threshold) {
  std::vector<std::size_t> order(fit.donors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double wa = fit.weights(static_cast<Eigen::Index>(a));
    const double wb = fit.weights(static_cast<Eigen::Index>(b));
    if (wa != wb) return wa > wb;
    return fit.donors[a] < fit.donors[b];
  });

  Table t;
  t.title = "Donor weights: " + outcome_label(fit.outcome);
  t.header = {"School name", "Weight"};
  std::size_t omitted = 0;
  for (std::size_t d : order) {
    const double w = fit.weights(static_cast<Eigen::Index>(d));
    if (w >= threshold) {
      t.rows.push_back({unit_name(panel, fit.donors[d]), fmt::format("{:.3f}", w)});
    } else if (w != 0.0) {
      ++omitted;
    }
  }
  t.notes.push_back(
      "Weights used to construct the synthetic control. They sum to one, although the printed values may not due to "
      "rounding.");
  if (omitted > 0) {
    t.notes.push_back(fmt::format("{} donor(s) with non-zero weight below {} are omitted.", omitted, threshold));
  }
  return t;
}

std::vector<BalanceRow> covariate_balance(const ScmProblem& problem, const ScmFit& fit) {
  std::vector<BalanceRow> rows;
  for (std::size_t k = 0; k < problem.covariate_keys.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    BalanceRow r;
    r.covariate = problem.covariate_keys[k];
    r.treated = problem.treated_covariates(ki);
    double s = 0.0;
    for (Eigen::Index j = 0; j < fit.weights.size(); ++j) {
      if (fit.weights(j) != 0.0) s += fit.weights(j) * problem.donor_covariates(ki, j);
    }
    r.synthetic = s;
    rows.push_back(r);
  }
  return rows;
}

Table render_balance_table(const std::vector<BalanceRow>& rows, const std::string& treated_name) {
  Table t;
  t.title = "Covariate balance";
  t.header = {"", treated_name, "Synthetic " + treated_name};
  for (const auto& r : rows) {
    t.rows.push_back({covariate_label(r.covariate, treated_name), fixed2(r.treated), fixed2(r.synthetic)});
  }
  t.notes.push_back("Mean value of each covariate over the pre-treatment years.");
  return t;
}

Table render_pvalue_table(const std::vector<std::pair<std::string, double>>& p_values, double alpha) {
  Table t;
  t.title = "Exact p-values";
  bool pivot = !p_values.empty();
  std::vector<std::string> subjects;
  std::vector<int> levels;
  std::map<std::pair<std::string, int>, double> cells;
  for (const auto& [key, p] : p_values) {
    std::smatch m;
    if (!std::regex_match(key, m, kOutcomeKey)) {
      pivot = false;
      break;
    }
    const std::string subject = capitalize(m[1].str());
    const int level = std::stoi(m[2].str());
    if (std::find(subjects.begin(), subjects.end(), subject) == subjects.end()) subjects.push_back(subject);
    if (std::find(levels.begin(), levels.end(), level) == levels.end()) levels.push_back(level);
    cells[{subject, level}] = p;
  }
  if (pivot) {
    std::sort(levels.begin(), levels.end());
    t.header.push_back("");
    for (int l : levels) t.header.push_back(fmt::format("Year {}", l));
    for (const auto& s : subjects) {
      std::vector<std::string> row{s};
      for (int l : levels) {
        auto it = cells.find({s, l});
        row.push_back(it == cells.end() ? "" : fmt::format("{:.3f}", it->second));
      }
      t.rows.push_back(std::move(row));
    }
  } else {
    t.header = {"Outcome", "p-value"};
    for (const auto& [key, p] : p_values) t.rows.push_back({key, fmt::format("{:.3f}", p)});
  }
  t.notes.push_back(fmt::format(
      "The hypothesis tested is the sharp null of no effect for any unit and period. The significance level is {}.",
      alpha));
  return t;
}

Table render_effect_table(const std::vector<EffectSummary>& effects) {
  Table t;
  t.title = "Average treatment effects";
  t.header = {"Outcome", "Window", "ATT (points)", "ATT (s.d.)", "s.d. basis", "Basis"};
  for (const auto& e : effects) {
    t.rows.push_back({outcome_label(e.outcome), fmt::format("{}-{}", e.window.first, e.window.last),
                      fixed2(e.att_points), fixed2(e.att_sd_units), fixed2(e.sd_basis), std::string(to_string(e.sd_mode))});
  }
  return t;
}

Table render_loo_table(const LooStudy& study) {
  Table t;
  t.title = "Leave-one-out estimates";
  for (const auto& o : study.outcomes) t.header.push_back(outcome_label(o));
  std::vector<std::string> mean, sd, range;
  for (const auto& a : study.aggregates) {
    if (a.runs == 0) {
      mean.emplace_back("");
      sd.emplace_back("");
      range.emplace_back("");
      continue;
    }
    mean.push_back(fixed2(a.mean));
    sd.push_back("(" + fixed2(a.sd) + ")");
    range.push_back("[" + fixed2(a.min) + ", " + fixed2(a.max) + "]");
  }
  t.rows = {mean, sd, range};
  t.notes.push_back(fmt::format(
      "The main specification is run {} times, leaving out in turn one of the top-{} donors. Cells report the mean, "
      "standard deviation and range of the average effect from {} years after treatment.",
      study.runs.size(), study.runs.size(), kStrictOffset));
  return t;
}

Table render_sweep_table(const std::vector<SweepCell>& cells) {
  Table t;
  t.title = "Sensitivity to the estimator";
  t.header = {"Estimator", "Outcome", "Pre-MSPE", "ATT full post", "ATT strict", "Error"};
  for (const auto& c : cells) {
    t.rows.push_back({std::string(to_string(c.estimator)), outcome_label(c.outcome),
                      c.fit ? fixed2(c.fit->pre_mspe) : "", c.full_post ? fixed2(c.full_post->att_points) : "",
                      c.strict ? fixed2(c.strict->att_points) : "", c.error});
  }
  return t;
}

Table render_percentile_table(const PercentileTable& table, const std::vector<std::string>& outcomes,
                              const PanelDataset* panel) {
  Table t;
  t.title = "Percentile rankings";
  t.header.push_back("School name");
  for (const auto& o : outcomes) {
    const std::string l = outcome_label(o);
    t.header.push_back(l + " Pre");
    t.header.push_back(l + " Post");
    t.header.push_back(l + " Diff.");
  }
  std::map<std::pair<std::string, std::string>, const PercentileRow*> lookup;
  std::vector<std::string> units;
  for (const auto& r : table.rows) {
    lookup[{r.unit_id, r.outcome}] = &r;
    if (std::find(units.begin(), units.end(), r.unit_id) == units.end()) units.push_back(r.unit_id);
  }
  for (const auto& u : units) {
    std::vector<std::string> row{unit_name(panel, u)};
    for (const auto& o : outcomes) {
      auto it = lookup.find({u, o});
      if (it == lookup.end()) {
        row.insert(row.end(), {"", "", ""});
      } else {
        row.push_back(std::to_string(it->second->pre_percentile));
        row.push_back(std::to_string(it->second->post_percentile));
        row.push_back(std::to_string(it->second->difference));
      }
    }
    t.rows.push_back(std::move(row));
  }
  t.notes.push_back(fmt::format(
      "Percentile ranks of mean outcomes before and from {} among {} units; the difference is post minus pre.",
      table.split_year, table.population));
  return t;
}

std::string series_csv(const std::vector<SeriesRow>& rows) {
  std::ostringstream out;
  csv::write_row(out, {"unit_id", "year", "value", "role"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.unit_id, std::to_string(r.year), csv::format_number(r.value), r.role});
  }
  return out.str();
}

Figure render_gap_figure(const ScmFit& fit, FigureStyle style) {
  Figure f;
  svg::LineChart chart;
  chart.x_label = "Year";
  chart.vertical_rule = static_cast<double>(fit.treatment_year);
  std::vector<double> xs;
  for (Year y : fit.periods) xs.push_back(static_cast<double>(y));
  auto values = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  if (style == FigureStyle::Path) {
    chart.title = outcome_label(fit.outcome) + ": treated and synthetic paths";
    chart.y_label = outcome_label(fit.outcome);
    svg::Polyline treated{xs, values(fit.observed), "#000000", 2.0, false, 1.0, "Treated"};
    svg::Polyline synth{xs, values(fit.counterfactual), "#1f77b4", 2.0, true, 1.0, "Synthetic"};
    chart.lines = {treated, synth};
    for (std::size_t t = 0; t < fit.periods.size(); ++t) {
      f.series.push_back({fit.treated, fit.periods[t], fit.observed(static_cast<Eigen::Index>(t)), "treated"});
    }
    for (std::size_t t = 0; t < fit.periods.size(); ++t) {
      f.series.push_back({fit.treated, fit.periods[t], fit.counterfactual(static_cast<Eigen::Index>(t)), "synthetic"});
    }
  } else {
    chart.title = outcome_label(fit.outcome) + ": gap between treated and synthetic";
    chart.y_label = "Gap";
    chart.zero_rule = true;
    chart.lines = {svg::Polyline{xs, values(fit.gaps), "#000000", 2.0, false, 1.0, "Gap"}};
    for (std::size_t t = 0; t < fit.periods.size(); ++t) {
      f.series.push_back({fit.treated, fit.periods[t], fit.gaps(static_cast<Eigen::Index>(t)), "gap"});
    }
  }
  f.svg = svg::render(chart);
  return f;
}

Figure render_gap_figure(const PlaceboStudy& study) {
  Figure f;
  svg::LineChart chart;
  chart.title = outcome_label(study.outcome) + ": placebo gaps";
  chart.x_label = "Year";
  chart.y_label = "Gap";
  chart.zero_rule = true;
  chart.vertical_rule = static_cast<double>(study.treatment_year);
  std::vector<double> xs;
  for (Year y : study.periods) xs.push_back(static_cast<double>(y));

  bool labelled = false;
  for (const auto& e : study.entries) {
    const bool treated = e.unit_id == study.treated;
    for (std::size_t t = 0; t < study.periods.size(); ++t) {
      f.series.push_back({e.unit_id, study.periods[t], e.gaps(static_cast<Eigen::Index>(t)), treated ? "treated" : "placebo"});
    }
    if (treated) continue;
    svg::Polyline line{xs, std::vector<double>(e.gaps.data(), e.gaps.data() + e.gaps.size()), "#999999", 1.0, false, 0.6,
                       labelled ? "" : "Placebo units"};
    labelled = true;
    chart.lines.push_back(std::move(line));
  }
  const auto& te = study.treated_entry();
  chart.lines.push_back(svg::Polyline{xs, std::vector<double>(te.gaps.data(), te.gaps.data() + te.gaps.size()),
                                      "#000000", 2.5, false, 1.0, "Treated"});
  f.svg = svg::render(chart);
  return f;
}

void ReportBundle::add_table(const std::string& stem, const Table& table) {
  add(stem + ".csv", table.to_csv());
  add(stem + ".md", table.to_markdown());
}

void ReportBundle::add_figure(const std::string& stem, const Figure& figure, bool svg) {
  add(stem + ".csv", series_csv(figure.series));
  if (svg) add(stem + ".svg", figure.svg);
}

void ReportBundle::write(const std::filesystem::path& dir) const {
  for (const auto& [name, content] : files) {
    const auto path = dir / name;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
  }
}

}  // namespace synthctl
