#include "synthctl/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "synthctl/error.hpp"
#include "synthctl/nelder_mead.hpp"

namespace synthctl {

namespace {

using nlohmann::json;

constexpr std::string_view kNames[] = {"abadie_nested", "abadie_nocov", "ferman", "hsiao", "chern"};

// Sum of w_j * y_j over non-zero weights, left to right. Donors with zero
// weight never touch the rounding, so dropping one is bit-neutral.
double weighted_sum(const Eigen::VectorXd& w, const Eigen::MatrixXd& y, Eigen::Index row) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) != 0.0) acc += w(j) * y(row, j);
  }
  return acc;
}

double mean_of(const Eigen::VectorXd& v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += v(i);
  return acc / static_cast<double>(v.size());
}

double mean_square(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += v(i) * v(i);
  return acc / static_cast<double>(v.size());
}

ScmFit make_fit(const ScmProblem& p, EstimatorTag tag, Eigen::VectorXd weights,
                Eigen::VectorXd counterfactual) {
  ScmFit fit;
  fit.estimator = tag;
  fit.outcome = p.outcome;
  fit.treated = p.pool.treated;
  fit.treatment_year = p.treatment_year;
  fit.donors = p.pool.donors;
  fit.weights = std::move(weights);
  fit.periods = p.periods();
  fit.pre_count = p.pre_count();
  fit.observed = p.treated_outcome;
  fit.counterfactual = std::move(counterfactual);
  fit.gaps = fit.observed - fit.counterfactual;
  fit.pre_mspe = mean_square(fit.pre_gaps());
  fit.post_mspe = mean_square(fit.post_gaps());
  return fit;
}

Eigen::VectorXd linear_path(const Eigen::VectorXd& w, const Eigen::MatrixXd& y, double offset) {
  Eigen::VectorXd out(y.rows());
  for (Eigen::Index t = 0; t < y.rows(); ++t) out(t) = offset + weighted_sum(w, y, t);
  return out;
}

void record_solve(json& diag, const SolveResult& r) {
  diag["solver_iterations"] = r.iterations;
  diag["solver_converged"] = r.converged;
  diag["solver_refined"] = r.refined;
  diag["non_unique"] = r.non_unique;
}

// Importances from K-1 free logits; the last logit is pinned at zero.
Eigen::VectorXd softmax_importance(const Eigen::VectorXd& theta) {
  const Eigen::Index k = theta.size() + 1;
  Eigen::VectorXd logits(k);
  logits.head(k - 1) = theta;
  logits(k - 1) = 0.0;
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp().matrix();
  double total = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) total += e(i);
  return e / total;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

std::string_view to_string(EstimatorTag tag) { return kNames[static_cast<int>(tag)]; }

EstimatorTag parse_estimator(std::string_view name) {
  for (int i = 0; i < 5; ++i) {
    if (kNames[i] == name) return static_cast<EstimatorTag>(i);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(name) + "'");
}

std::vector<Year> ScmProblem::periods() const {
  std::vector<Year> out = pre_periods;
  out.insert(out.end(), post_periods.begin(), post_periods.end());
  return out;
}

ScmProblem build_problem(const PanelDataset& panel, const DonorPool& pool, const std::string& outcome,
                         Year treatment_year, const std::vector<std::string>& covariate_keys,
                         const SolverSettings& settings) {
  const CellMatrix& y = panel.outcome(outcome);
  ScmProblem p;
  p.pool = pool;
  p.outcome = outcome;
  p.treatment_year = treatment_year;
  p.covariate_keys = covariate_keys;
  p.settings = settings;
  for (Year t : panel.periods()) (t < treatment_year ? p.pre_periods : p.post_periods).push_back(t);
  if (p.pre_periods.empty()) {
    throw Error(ErrorCode::EmptyPrePeriod,
                "no index year precedes treatment year " + std::to_string(treatment_year));
  }
  if (p.post_periods.empty()) {
    throw Error(ErrorCode::InvalidWindow,
                "no index year at or after treatment year " + std::to_string(treatment_year));
  }

  const auto members = pool.members();
  std::vector<std::size_t> rows;
  rows.reserve(members.size());
  for (const auto& id : members) rows.push_back(panel.unit_index(id));

  const auto periods = p.periods();
  const auto t_count = static_cast<Eigen::Index>(periods.size());
  const auto j_count = static_cast<Eigen::Index>(pool.donors.size());
  Eigen::MatrixXd all(t_count, j_count + 1);
  std::ostringstream missing;
  int n_missing = 0;
  for (Eigen::Index c = 0; c <= j_count; ++c) {
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const auto col = *panel.period_index(periods[static_cast<std::size_t>(t)]);
      auto v = y.at(rows[static_cast<std::size_t>(c)], col);
      if (!v) {
        if (n_missing < 20) {
          missing << (n_missing ? ", " : "") << "(" << members[static_cast<std::size_t>(c)] << ", "
                  << periods[static_cast<std::size_t>(t)] << ")";
        }
        ++n_missing;
        continue;
      }
      all(t, c) = *v;
    }
  }
  if (n_missing) {
    throw Error(ErrorCode::MissingOutcome, "outcome '" + outcome + "' missing for " +
                                               std::to_string(n_missing) + " unit-years: " + missing.str());
  }
  p.treated_outcome = all.col(0);
  p.donor_outcomes = all.rightCols(j_count);

  const auto k_count = static_cast<Eigen::Index>(covariate_keys.size());
  p.treated_covariates.resize(k_count);
  p.donor_covariates.resize(k_count, j_count);
  const YearRange window{p.pre_periods.front(), p.pre_periods.back()};
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto& key = covariate_keys[static_cast<std::size_t>(k)];
    std::vector<double> values;
    if (auto it = pool.features.find(key); it != pool.features.end()) {
      values = it->second;
    } else {
      values = collapse_covariate(panel, key, window, rows);
    }
    p.treated_covariates(k) = values[0];
    for (Eigen::Index j = 0; j < j_count; ++j) p.donor_covariates(k, j) = values[static_cast<std::size_t>(j + 1)];
  }
  return p;
}

Eigen::MatrixXd standardize_covariates(const ScmProblem& p) {
  const Eigen::Index k = p.donor_covariates.rows();
  const Eigen::Index j = p.donor_covariates.cols();
  Eigen::MatrixXd z(k, j + 1);
  for (Eigen::Index r = 0; r < k; ++r) {
    double mean = 0.0;
    for (Eigen::Index c = 0; c < j; ++c) mean += p.donor_covariates(r, c);
    mean /= static_cast<double>(j);
    double scale = 1.0;
    if (j >= 2) {
      double ss = 0.0;
      for (Eigen::Index c = 0; c < j; ++c) {
        const double d = p.donor_covariates(r, c) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(j - 1));
      if (sd > 0.0 && std::isfinite(sd)) scale = sd;
    }
    z(r, 0) = (p.treated_covariates(r) - mean) / scale;
    for (Eigen::Index c = 0; c < j; ++c) z(r, c + 1) = (p.donor_covariates(r, c) - mean) / scale;
  }
  return z;
}

ScmFit fit_abadie_nested(const ScmProblem& p, const EstimatorOptions& options) {
  const Eigen::Index k = static_cast<Eigen::Index>(p.covariate_keys.size());
  if (k == 0) {
    throw Error(ErrorCode::InvalidArgument, "the nested estimator needs at least one covariate");
  }
  const Eigen::MatrixXd z = standardize_covariates(p);
  const Eigen::VectorXd x1 = z.col(0);
  const Eigen::MatrixXd x0 = z.rightCols(z.cols() - 1);
  const Eigen::VectorXd y1 = p.treated_outcome.head(p.pre_count());
  const Eigen::MatrixXd y0 = p.donor_outcomes.topRows(p.pre_count());

  struct Candidate {
    Eigen::VectorXd v;
    SolveResult inner;
    double loss = 0.0;
  };
  std::optional<Candidate> best;
  int evaluations = 0;
  auto consider = [&](const Eigen::VectorXd& v) {
    ++evaluations;
    SolveResult inner = solve_simplex_wls(x1, x0, v, p.settings);
    const Eigen::VectorXd resid = y1 - y0 * inner.weights;
    const double loss = resid.squaredNorm();
    if (!best || loss < best->loss || (loss == best->loss && lex_less(v, best->v))) {
      best = Candidate{v, std::move(inner), loss};
    }
    return loss;
  };

  int starts = 1;
  if (k == 1) {
    consider(Eigen::VectorXd::Ones(1));
  } else {
    std::vector<Eigen::VectorXd> seeds;
    seeds.push_back(Eigen::VectorXd::Zero(k - 1));
    const double off = 0.2 / static_cast<double>(k - 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      Eigen::VectorXd v = Eigen::VectorXd::Constant(k, off);
      v(i) = 0.8;
      seeds.push_back((v.head(k - 1).array() / v(k - 1)).log().matrix());
    }
    starts = static_cast<int>(seeds.size());
    NelderMeadOptions nm;
    nm.max_evaluations = std::max(k + 1, static_cast<Eigen::Index>(options.v_evaluations / starts));
    for (const auto& seed : seeds) {
      nelder_mead([&](const Eigen::VectorXd& theta) { return consider(softmax_importance(theta)); }, seed, nm);
    }
  }

  Eigen::VectorXd cf = linear_path(best->inner.weights, p.donor_outcomes, 0.0);
  ScmFit fit = make_fit(p, EstimatorTag::AbadieNested, best->inner.weights, std::move(cf));
  fit.covariate_keys = p.covariate_keys;
  fit.importances = best->v;
  record_solve(fit.diagnostics, best->inner);
  fit.diagnostics["v_loss"] = best->loss;
  fit.diagnostics["v_evaluations"] = evaluations;
  fit.diagnostics["v_starts"] = starts;
  fit.diagnostics["covariate_standardization"] = "donor mean and sample standard deviation";
  return fit;
}

ScmFit fit_abadie_nocov(const ScmProblem& p) {
  const Eigen::Index t0 = p.pre_count();
  const Eigen::VectorXd v = DiagonalImportance::uniform(t0).values();
  SolveResult r = solve_simplex_wls(p.treated_outcome.head(t0), p.donor_outcomes.topRows(t0), v, p.settings);
  Eigen::VectorXd cf = linear_path(r.weights, p.donor_outcomes, 0.0);
  ScmFit fit = make_fit(p, EstimatorTag::AbadieNoCov, r.weights, std::move(cf));
  record_solve(fit.diagnostics, r);
  return fit;
}

ScmFit fit_ferman(const ScmProblem& p) {
  const Eigen::Index t0 = p.pre_count();
  const Eigen::Index j = p.donor_count();
  const double treated_mean = mean_of(p.treated_outcome.head(t0));
  Eigen::MatrixXd demeaned = p.donor_outcomes;
  for (Eigen::Index c = 0; c < j; ++c) {
    const double m = mean_of(p.donor_outcomes.col(c).head(t0));
    demeaned.col(c).array() -= m;
  }
  const Eigen::VectorXd y1 = (p.treated_outcome.head(t0).array() - treated_mean).matrix();
  SolveResult r = solve_simplex_wls(y1, demeaned.topRows(t0), DiagonalImportance::uniform(t0).values(),
                                    p.settings);
  Eigen::VectorXd cf = linear_path(r.weights, demeaned, treated_mean);
  ScmFit fit = make_fit(p, EstimatorTag::FermanDemeaned, r.weights, std::move(cf));
  record_solve(fit.diagnostics, r);
  fit.diagnostics["treated_pre_mean"] = treated_mean;
  return fit;
}

ScmFit fit_hsiao(const ScmProblem& p, int max_regressors) {
  const Eigen::Index t0 = p.pre_count();
  const Eigen::Index j = p.donor_count();
  const Eigen::Index cap =
      max_regressors < 0 ? std::max<Eigen::Index>(0, t0 - 2) : static_cast<Eigen::Index>(max_regressors);

  std::vector<Eigen::Index> chosen;
  json selection = json::object();
  if (j <= cap) {
    chosen.resize(static_cast<std::size_t>(j));
    std::iota(chosen.begin(), chosen.end(), Eigen::Index{0});
    selection["rule"] = "all donors";
  } else {
    // Rank donors by their weight in the no-covariate simplex fit.
    const ScmFit anchor = fit_abadie_nocov(p);
    std::vector<Eigen::Index> order;
    for (Eigen::Index c = 0; c < j; ++c) {
      if (anchor.weights(c) > 0.0) order.push_back(c);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return anchor.weights(a) > anchor.weights(b); });
    if (static_cast<Eigen::Index>(order.size()) > cap) order.resize(static_cast<std::size_t>(cap));
    chosen = order;
    selection["rule"] = "top donors by abadie_nocov weight";
    json ranked = json::array();
    for (auto c : chosen) ranked.push_back({{"unit_id", p.pool.donors[static_cast<std::size_t>(c)]},
                                            {"nocov_weight", anchor.weights(c)}});
    selection["selected"] = ranked;
  }
  selection["max_regressors"] = cap;

  Eigen::MatrixXd x(t0, static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t s = 0; s < chosen.size(); ++s) {
    x.col(static_cast<Eigen::Index>(s)) = p.donor_outcomes.col(chosen[s]).head(t0);
  }
  OlsResult ols = solve_ols(p.treated_outcome.head(t0), x, true);

  Eigen::VectorXd w = Eigen::VectorXd::Zero(j);
  for (std::size_t s = 0; s < chosen.size(); ++s) w(chosen[s]) = ols.weights(static_cast<Eigen::Index>(s));
  Eigen::VectorXd cf = linear_path(w, p.donor_outcomes, ols.intercept);
  ScmFit fit = make_fit(p, EstimatorTag::HsiaoOls, std::move(w), std::move(cf));
  fit.intercept = ols.intercept;
  fit.diagnostics["donor_selection"] = selection;
  fit.diagnostics["ols_rank"] = ols.rank;
  fit.diagnostics["ols_rss"] = ols.objective;
  return fit;
}

ScmFit fit_chern(const ScmProblem& p, double bound) {
  const Eigen::Index t0 = p.pre_count();
  SolveResult r = solve_l1_ball_ls(p.treated_outcome.head(t0), p.donor_outcomes.topRows(t0), bound, p.settings);
  Eigen::VectorXd cf = linear_path(r.weights, p.donor_outcomes, 0.0);
  ScmFit fit = make_fit(p, EstimatorTag::ChernL1, r.weights, std::move(cf));
  record_solve(fit.diagnostics, r);
  fit.diagnostics["l1_bound"] = bound;
  fit.diagnostics["l1_norm"] = r.weights.lpNorm<1>();
  return fit;
}

ScmFit fit_estimator(const ScmProblem& problem, EstimatorTag tag, const EstimatorOptions& options) {
  switch (tag) {
    case EstimatorTag::AbadieNested: return fit_abadie_nested(problem, options);
    case EstimatorTag::AbadieNoCov: return fit_abadie_nocov(problem);
    case EstimatorTag::FermanDemeaned: return fit_ferman(problem);
    case EstimatorTag::HsiaoOls: return fit_hsiao(problem, options.hsiao_max_regressors);
    case EstimatorTag::ChernL1: return fit_chern(problem, options.chern_bound);
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled estimator");
}

}  // namespace synthctl
