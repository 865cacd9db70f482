#include "synthctl/inference.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <variant>

#include "synthctl/parallel.hpp"

namespace synthctl {

namespace {

double mean_square(const Eigen::VectorXd& v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += v(i) * v(i);
  return acc / static_cast<double>(v.size());
}

using Outcome = std::variant<PlaceboEntry, ExcludedUnit>;

Outcome placebo_one(const PanelDataset& panel, const ScmProblem& base, const std::string& unit,
                    EstimatorTag estimator, const EstimatorOptions& options) {
  try {
    ScmFit fit;
    if (unit == base.pool.treated) {
      fit = fit_estimator(base, estimator, options);
    } else {
      std::vector<std::string> donors;
      for (const auto& d : base.pool.donors) {
        if (d != unit) donors.push_back(d);
      }
      DonorPool pool = make_pool(panel, unit, std::move(donors));
      ScmProblem p = build_problem(panel, pool, base.outcome, base.treatment_year, base.covariate_keys,
                                   base.settings);
      fit = fit_estimator(p, estimator, options);
    }
    PlaceboEntry e;
    e.unit_id = unit;
    e.pre_mspe = fit.pre_mspe;
    e.post_mspe = fit.post_mspe;
    e.ratio = rmspe_ratio(fit.pre_gaps(), fit.post_gaps());
    e.gaps = fit.gaps;
    return e;
  } catch (const Error& err) {
    return ExcludedUnit{unit, std::string(to_string(err.code())), err.what()};
  }
}

}  // namespace

double rmspe_ratio(const Eigen::VectorXd& pre_gaps, const Eigen::VectorXd& post_gaps) {
  if (pre_gaps.size() == 0 || post_gaps.size() == 0) {
    throw Error(ErrorCode::InvalidArgument, "RMSPE ratio needs non-empty pre and post gaps");
  }
  const double pre = mean_square(pre_gaps);
  if (pre < 1e-12) {
    throw Error(ErrorCode::ZeroPreFit, "pre-period MSPE is zero; the RMSPE ratio is undefined");
  }
  return mean_square(post_gaps) / pre;
}

double exact_p_value(std::span<const double> ratios, double treated_ratio) {
  if (ratios.empty()) throw Error(ErrorCode::InferenceImpossible, "no placebo ratios");
  const auto at_least = std::count_if(ratios.begin(), ratios.end(),
                                      [&](double r) { return r >= treated_ratio - 1e-12; });
  return static_cast<double>(at_least) / static_cast<double>(ratios.size());
}

PlaceboStudy run_placebo(const PanelDataset& panel, const ScmProblem& problem, EstimatorTag estimator,
                         const EstimatorOptions& options, unsigned jobs) {
  std::vector<std::string> units = problem.pool.members();
  std::sort(units.begin(), units.end());

  auto results = parallel_map(units.size(), jobs, [&](std::size_t i) {
    return placebo_one(panel, problem, units[i], estimator, options);
  });

  PlaceboStudy study;
  study.outcome = problem.outcome;
  study.estimator = estimator;
  study.treated = problem.pool.treated;
  study.treatment_year = problem.treatment_year;
  study.periods = problem.periods();
  study.pre_count = problem.pre_count();
  std::optional<std::size_t> treated_at;
  for (auto& r : results) {
    if (auto* e = std::get_if<PlaceboEntry>(&r)) {
      if (e->unit_id == study.treated) treated_at = study.entries.size();
      study.entries.push_back(std::move(*e));
    } else {
      study.excluded.push_back(std::get<ExcludedUnit>(std::move(r)));
    }
  }
  if (!treated_at) {
    std::string why = "treated unit could not be fitted";
    for (const auto& x : study.excluded) {
      if (x.unit_id == study.treated) why += ": " + x.reason;
    }
    throw Error(ErrorCode::InferenceImpossible, why);
  }
  if (study.entries.size() < 2) {
    throw Error(ErrorCode::InferenceImpossible, "fewer than two placebo fits succeeded");
  }
  study.treated_index = *treated_at;
  std::vector<double> ratios;
  ratios.reserve(study.entries.size());
  for (const auto& e : study.entries) ratios.push_back(e.ratio);
  study.p_value = exact_p_value(ratios, study.entries[*treated_at].ratio);
  return study;
}

SharpNullDecision test_sharp_null(double p_value, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie strictly between 0 and 1");
  }
  return {p_value, alpha, p_value <= alpha};
}

SharpNullDecision test_sharp_null(const PlaceboStudy& study, double alpha) {
  return test_sharp_null(study.p_value, alpha);
}

}  // namespace synthctl
