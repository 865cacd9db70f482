#pragma once

// Estimation problems and the five synthetic control estimators.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "synthctl/panel.hpp"
#include "synthctl/pool.hpp"
#include "synthctl/solver.hpp"

namespace synthctl {

enum class EstimatorTag { AbadieNested, AbadieNoCov, FermanDemeaned, HsiaoOls, ChernL1 };

/// Stable names used in configs and reports: abadie_nested, abadie_nocov,
/// ferman, hsiao, chern.
std::string_view to_string(EstimatorTag tag);
EstimatorTag parse_estimator(std::string_view name);  // throws InvalidArgument

struct EstimatorOptions {
  // Hsiao: cap on donor regressors; negative means T0 - 2.
  int hsiao_max_regressors = -1;
  double chern_bound = 1.0;
  // Nested: total Nelder-Mead evaluations shared by all starts.
  int v_evaluations = 2000;
};

/// A fully resolved estimation task. Outcome rows are ordered pre periods
/// then post periods; donor columns follow pool.donors.
struct ScmProblem {
  DonorPool pool;
  std::string outcome;
  Year treatment_year = 0;
  std::vector<Year> pre_periods;
  std::vector<Year> post_periods;
  std::vector<std::string> covariate_keys;
  SolverSettings settings;

  Eigen::VectorXd treated_outcome;  // T
  Eigen::MatrixXd donor_outcomes;   // T x J
  Eigen::VectorXd treated_covariates;  // K, raw collapsed values
  Eigen::MatrixXd donor_covariates;    // K x J

  Eigen::Index pre_count() const { return static_cast<Eigen::Index>(pre_periods.size()); }
  Eigen::Index donor_count() const { return donor_outcomes.cols(); }
  std::vector<Year> periods() const;
};

/// Collapses covariates over the pre-treatment years and gathers outcomes
/// for the pool members. Covariate keys naming a pool feature (such as the
/// radial distance) are read from the pool.
ScmProblem build_problem(const PanelDataset& panel, const DonorPool& pool, const std::string& outcome,
                         Year treatment_year, const std::vector<std::string>& covariate_keys,
                         const SolverSettings& settings = {});

struct ScmFit {
  EstimatorTag estimator = EstimatorTag::AbadieNested;
  std::string outcome;
  std::string treated;
  Year treatment_year = 0;
  std::vector<std::string> donors;
  Eigen::VectorXd weights;                     // aligned with donors
  std::vector<std::string> covariate_keys;
  std::optional<Eigen::VectorXd> importances;  // nested only, aligned with covariate_keys
  std::optional<double> intercept;             // Hsiao only
  std::vector<Year> periods;
  Eigen::Index pre_count = 0;
  Eigen::VectorXd observed;
  Eigen::VectorXd counterfactual;
  Eigen::VectorXd gaps;
  double pre_mspe = 0.0;
  double post_mspe = 0.0;
  nlohmann::json diagnostics = nlohmann::json::object();

  Eigen::VectorXd pre_gaps() const { return gaps.head(pre_count); }
  Eigen::VectorXd post_gaps() const { return gaps.tail(gaps.size() - pre_count); }
};

ScmFit fit_abadie_nested(const ScmProblem& problem, const EstimatorOptions& options = {});
ScmFit fit_abadie_nocov(const ScmProblem& problem);
ScmFit fit_ferman(const ScmProblem& problem);
ScmFit fit_hsiao(const ScmProblem& problem, int max_regressors = -1);
ScmFit fit_chern(const ScmProblem& problem, double bound = 1.0);

ScmFit fit_estimator(const ScmProblem& problem, EstimatorTag tag, const EstimatorOptions& options = {});

/// Covariates z-scored against the donor mean and sample standard
/// deviation (scale 1 when the deviation is zero or J < 2). Returns the
/// treated column first, then donors.
Eigen::MatrixXd standardize_covariates(const ScmProblem& problem);

}  // namespace synthctl
