#pragma once

// Effect summaries and robustness drivers built on top of the estimators.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synthctl/estimators.hpp"

namespace synthctl {

/// How the standard-deviation divisor of an effect is computed from the
/// donor outcomes of the same problem.
enum class SdBasisMode {
  DonorPrePooled,     // sample sd of all donor pre-period unit-years
  DonorPreUnitMeans,  // sample sd of the donors' pre-period means
  None,               // divisor 1
};

std::string_view to_string(SdBasisMode mode);
SdBasisMode parse_sd_basis(std::string_view name);  // throws InvalidArgument

double sd_basis(const ScmProblem& problem, SdBasisMode mode);

struct EffectSummary {
  std::string outcome;
  YearRange window;
  std::vector<Year> years;  // index years inside the window
  std::vector<double> gaps;
  double att_points = 0.0;
  double att_sd_units = 0.0;
  double sd_basis = 1.0;
  SdBasisMode sd_mode = SdBasisMode::DonorPrePooled;
};

/// Mean gap over the index years of the window. The window must lie in the
/// post-treatment years. Throws InvalidWindow or EmptyWindow.
EffectSummary summarize_effect(const ScmFit& fit, YearRange window, double basis, SdBasisMode mode);
EffectSummary summarize_effect(const ScmProblem& problem, const ScmFit& fit, YearRange window,
                               SdBasisMode mode);

struct DefaultWindows {
  YearRange full_post;
  YearRange strict;  // starts strict_offset years after treatment
  std::vector<Year> full_post_years;
  std::vector<Year> strict_years;  // empty when the index ends too early
};

inline constexpr int kStrictOffset = 3;

DefaultWindows default_windows(Year treatment_year, const std::vector<Year>& periods,
                               int strict_offset = kStrictOffset);

struct LooRun {
  std::string excluded;
  double baseline_weight = 0.0;  // mean across outcomes
  std::vector<std::optional<EffectSummary>> effects;  // one per outcome
  std::vector<std::string> errors;                    // empty string when the fit succeeded
};

struct LooAggregate {
  std::string outcome;
  int runs = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
};

struct LooStudy {
  EstimatorTag estimator = EstimatorTag::AbadieNested;
  std::vector<std::string> outcomes;
  std::vector<EffectSummary> baseline;
  std::vector<LooRun> runs;
  std::vector<LooAggregate> aggregates;
};

/// Ranks donors by their mean baseline weight across outcomes, then refits
/// every outcome once per top-k donor with that donor removed. All problems
/// must share one pool. Effects use the strict window.
LooStudy leave_one_out(const PanelDataset& panel, const std::vector<ScmProblem>& problems, int k,
                       EstimatorTag estimator = EstimatorTag::AbadieNested,
                       const EstimatorOptions& options = {}, SdBasisMode mode = SdBasisMode::DonorPrePooled,
                       unsigned jobs = 1, int strict_offset = kStrictOffset);

struct SweepCell {
  EstimatorTag estimator = EstimatorTag::AbadieNoCov;
  std::string outcome;
  std::optional<ScmFit> fit;
  std::optional<EffectSummary> full_post;
  std::optional<EffectSummary> strict;
  std::string error;
};

inline const std::vector<EstimatorTag> kSensitivityEstimators{
    EstimatorTag::AbadieNoCov, EstimatorTag::FermanDemeaned, EstimatorTag::HsiaoOls, EstimatorTag::ChernL1};

/// One cell per (estimator, outcome), estimator-major. Failures are kept in
/// the cell and the sweep continues.
std::vector<SweepCell> sensitivity_sweep(const std::vector<ScmProblem>& problems,
                                         const std::vector<EstimatorTag>& estimators = kSensitivityEstimators,
                                         const EstimatorOptions& options = {},
                                         SdBasisMode mode = SdBasisMode::DonorPrePooled, unsigned jobs = 1,
                                         int strict_offset = kStrictOffset);

struct PercentileRow {
  std::string unit_id;
  std::string outcome;
  double pre_mean = 0.0;
  double post_mean = 0.0;
  int pre_percentile = 0;
  int post_percentile = 0;
  int difference = 0;
};

struct PercentileTable {
  Year split_year = 0;
  std::size_t population = 0;
  std::vector<PercentileRow> rows;  // unit-major, outcomes in the given order
};

/// Ceiling-rank percentile: round(100 * #{p : mean_p <= mean_u} / N).
int ceiling_percentile(const std::vector<double>& population, double value);

/// Ranks `units` among `population` (all units when empty) on their mean
/// outcome before and from split_year. Every listed unit must belong to the
/// population.
PercentileTable percentile_table(const PanelDataset& panel, const std::vector<std::string>& units,
                                 const std::vector<std::string>& outcome_keys, Year split_year,
                                 const std::vector<std::string>& population = {});

}  // namespace synthctl
