#pragma once

// Tables, plot-ready series and SVG figures. Renderers only round; every
// printed number comes straight from a fit, study or summary.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "synthctl/analysis.hpp"
#include "synthctl/inference.hpp"

namespace synthctl {

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;

  std::string to_csv() const;
  std::string to_markdown() const;
};

/// "numeracy_y3" -> "Year-3 Numeracy"; other keys are returned unchanged.
std::string outcome_label(const std::string& key);
std::string covariate_label(const std::string& key, const std::string& treated_name = "the treated unit");

/// Two decimals with "-0.00" printed as "0.00".
std::string fixed2(double v);

inline constexpr double kWeightPrintThreshold = 0.0005;

/// Donors with weight >= threshold, descending by weight (ties by id), three
/// decimals. Names come from the panel when given.
Table render_weights_table(const ScmFit& fit, const PanelDataset* panel = nullptr,
                           double threshold = kWeightPrintThreshold);

struct BalanceRow {
  std::string covariate;
  double treated = 0.0;
  double synthetic = 0.0;  // sum_j w_j x_kj on raw covariate values
};

std::vector<BalanceRow> covariate_balance(const ScmProblem& problem, const ScmFit& fit);
Table render_balance_table(const std::vector<BalanceRow>& rows, const std::string& treated_name);

/// Subjects as rows and year levels as columns when every outcome key reads
/// "<subject>_y<level>"; otherwise one row per outcome.
Table render_pvalue_table(const std::vector<std::pair<std::string, double>>& p_values, double alpha);

Table render_effect_table(const std::vector<EffectSummary>& effects);

/// Mean, "(sd)" and "[min, max]" rows with one column per outcome.
Table render_loo_table(const LooStudy& study);

Table render_sweep_table(const std::vector<SweepCell>& cells);

/// Rows follow the units of the table, columns Pre/Post/Diff per outcome.
Table render_percentile_table(const PercentileTable& table, const std::vector<std::string>& outcomes,
                              const PanelDataset* panel = nullptr);

struct SeriesRow {
  std::string unit_id;
  Year year = 0;
  double value = 0.0;
  std::string role;
};

/// Header unit_id,year,value,role; values printed round-trip exact.
std::string series_csv(const std::vector<SeriesRow>& rows);

enum class FigureStyle { Path, Gap };

struct Figure {
  std::string svg;
  std::vector<SeriesRow> series;
};

/// Path: observed ("treated") and counterfactual ("synthetic") outcomes.
/// Gap: observed minus counterfactual ("gap") with a zero rule.
Figure render_gap_figure(const ScmFit& fit, FigureStyle style);
/// Placebo spaghetti: one polyline per entry, the treated one highlighted.
Figure render_gap_figure(const PlaceboStudy& study);

/// Output files keyed by relative path, written in key order.
struct ReportBundle {
  std::map<std::string, std::string> files;

  void add(const std::string& name, std::string content) { files[name] = std::move(content); }
  void add_table(const std::string& stem, const Table& table);
  void add_figure(const std::string& stem, const Figure& figure, bool svg = true);
  void write(const std::filesystem::path& dir) const;
};

}  // namespace synthctl
