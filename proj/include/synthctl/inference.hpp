#pragma once

// Placebo permutation inference for a single treated unit.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "synthctl/error.hpp"
#include "synthctl/estimators.hpp"

namespace synthctl {

/// Post-period MSPE over pre-period MSPE. No square root is taken.
/// Throws ZeroPreFit when the pre-period MSPE is below 1e-12.
double rmspe_ratio(const Eigen::VectorXd& pre_gaps, const Eigen::VectorXd& post_gaps);

struct PlaceboEntry {
  std::string unit_id;
  double pre_mspe = 0.0;
  double post_mspe = 0.0;
  double ratio = 0.0;
  Eigen::VectorXd gaps;  // over PlaceboStudy::periods
};

struct ExcludedUnit {
  std::string unit_id;
  std::string code;
  std::string reason;
};

struct PlaceboStudy {
  std::string outcome;
  EstimatorTag estimator = EstimatorTag::AbadieNested;
  std::string treated;
  Year treatment_year = 0;
  std::vector<Year> periods;
  Eigen::Index pre_count = 0;
  std::vector<PlaceboEntry> entries;  // sorted by unit id
  std::size_t treated_index = 0;
  double p_value = 1.0;
  std::vector<ExcludedUnit> excluded;

  const PlaceboEntry& treated_entry() const { return entries.at(treated_index); }
};

/// Share of ratios at least as large as the treated ratio, the treated
/// ratio included in `ratios`. Ratios within 1e-12 below count as ties.
double exact_p_value(std::span<const double> ratios, double treated_ratio);

/// Refits the estimator with every pool member in turn as the treated unit.
/// Placebo pools are the original donors minus the pseudo-treated unit, so
/// the true treated unit never serves as a donor. Units whose fit fails are
/// listed in `excluded` and left out of the p-value.
PlaceboStudy run_placebo(const PanelDataset& panel, const ScmProblem& problem, EstimatorTag estimator,
                         const EstimatorOptions& options = {}, unsigned jobs = 1);

struct SharpNullDecision {
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
};

/// Rejects the sharp null of no effect anywhere when p <= alpha.
SharpNullDecision test_sharp_null(const PlaceboStudy& study, double alpha);
SharpNullDecision test_sharp_null(double p_value, double alpha);

}  // namespace synthctl
