#include "synthctl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synthctl/error.hpp"
#include "synthctl/parallel.hpp"

namespace synthctl {

namespace {

constexpr std::string_view kSdNames[] = {"donor-pre-pooled", "donor-pre-unit-means", "none"};

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string_view to_string(SdBasisMode mode) { return kSdNames[static_cast<int>(mode)]; }

SdBasisMode parse_sd_basis(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (kSdNames[i] == name) return static_cast<SdBasisMode>(i);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown sd basis '" + std::string(name) + "'");
}

double sd_basis(const ScmProblem& p, SdBasisMode mode) {
  const Eigen::Index t0 = p.pre_count();
  std::vector<double> xs;
  switch (mode) {
    case SdBasisMode::None:
      return 1.0;
    case SdBasisMode::DonorPrePooled:
      for (Eigen::Index j = 0; j < p.donor_count(); ++j) {
        for (Eigen::Index t = 0; t < t0; ++t) xs.push_back(p.donor_outcomes(t, j));
      }
      break;
    case SdBasisMode::DonorPreUnitMeans:
      for (Eigen::Index j = 0; j < p.donor_count(); ++j) {
        double m = 0.0;
        for (Eigen::Index t = 0; t < t0; ++t) m += p.donor_outcomes(t, j);
        xs.push_back(m / static_cast<double>(t0));
      }
      break;
  }
  const double sd = sample_sd(xs);
  if (!(sd > 0.0)) {
    throw Error(ErrorCode::InvalidValue, "standard-deviation basis for '" + p.outcome + "' is zero");
  }
  return sd;
}

EffectSummary summarize_effect(const ScmFit& fit, YearRange window, double basis, SdBasisMode mode) {
  if (window.first > window.last) {
    throw Error(ErrorCode::InvalidWindow, "effect window ends before it starts");
  }
  const auto post_start = static_cast<std::size_t>(fit.pre_count);
  if (post_start < fit.periods.size() && window.first < fit.periods[post_start]) {
    throw Error(ErrorCode::InvalidWindow, "effect window " + std::to_string(window.first) + "-" +
                                              std::to_string(window.last) + " reaches into the pre-period");
  }
  EffectSummary s;
  s.outcome = fit.outcome;
  s.window = window;
  s.sd_basis = basis;
  s.sd_mode = mode;
  double acc = 0.0;
  for (std::size_t t = post_start; t < fit.periods.size(); ++t) {
    const Year y = fit.periods[t];
    if (y < window.first || y > window.last) continue;
    const double g = fit.gaps(static_cast<Eigen::Index>(t));
    s.years.push_back(y);
    s.gaps.push_back(g);
    acc += g;
  }
  if (s.years.empty()) {
    throw Error(ErrorCode::EmptyWindow, "no post-treatment index year in " + std::to_string(window.first) +
                                            "-" + std::to_string(window.last));
  }
  s.att_points = acc / static_cast<double>(s.years.size());
  s.att_sd_units = s.att_points / basis;
  return s;
}

EffectSummary summarize_effect(const ScmProblem& problem, const ScmFit& fit, YearRange window,
                               SdBasisMode mode) {
  return summarize_effect(fit, window, sd_basis(problem, mode), mode);
}

DefaultWindows default_windows(Year treatment_year, const std::vector<Year>& periods, int strict_offset) {
  DefaultWindows w;
  const Year last = periods.empty() ? treatment_year : periods.back();
  w.full_post = {treatment_year, last};
  w.strict = {treatment_year + strict_offset, last};
  for (Year y : periods) {
    if (y >= treatment_year) w.full_post_years.push_back(y);
    if (y >= treatment_year + strict_offset) w.strict_years.push_back(y);
  }
  return w;
}

LooStudy leave_one_out(const PanelDataset& panel, const std::vector<ScmProblem>& problems, int k,
                       EstimatorTag estimator, const EstimatorOptions& options, SdBasisMode mode,
                       unsigned jobs, int strict_offset) {
  if (problems.empty()) throw Error(ErrorCode::InvalidArgument, "leave-one-out needs at least one outcome");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "leave-one-out needs k >= 1");
  const DonorPool& pool = problems.front().pool;
  for (const auto& p : problems) {
    if (p.pool.treated != pool.treated || p.pool.donors != pool.donors) {
      throw Error(ErrorCode::InvalidArgument, "leave-one-out problems must share one donor pool");
    }
  }

  LooStudy study;
  study.estimator = estimator;
  const auto windows = default_windows(problems.front().treatment_year, panel.periods(), strict_offset);
  auto baselines = parallel_map(problems.size(), jobs,
                                [&](std::size_t i) { return fit_estimator(problems[i], estimator, options); });

  const std::size_t j = pool.donors.size();
  std::vector<double> mean_weight(j, 0.0);
  for (std::size_t o = 0; o < problems.size(); ++o) {
    study.outcomes.push_back(problems[o].outcome);
    study.baseline.push_back(summarize_effect(problems[o], baselines[o], windows.strict, mode));
    for (std::size_t d = 0; d < j; ++d) mean_weight[d] += baselines[o].weights(static_cast<Eigen::Index>(d));
  }
  for (auto& w : mean_weight) w /= static_cast<double>(problems.size());

  std::vector<std::size_t> ranked;
  for (std::size_t d = 0; d < j; ++d) {
    if (mean_weight[d] > 0.0) ranked.push_back(d);
  }
  if (static_cast<std::size_t>(k) > ranked.size()) {
    throw Error(ErrorCode::InvalidArgument, "k = " + std::to_string(k) + " exceeds the " +
                                                std::to_string(ranked.size()) + " donors with positive weight");
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return mean_weight[a] > mean_weight[b]; });
  ranked.resize(static_cast<std::size_t>(k));

  const std::size_t n_out = problems.size();
  struct Cell {
    std::optional<EffectSummary> effect;
    std::string error;
  };
  auto cells = parallel_map(ranked.size() * n_out, jobs, [&](std::size_t idx) {
    const std::string& drop = pool.donors[ranked[idx / n_out]];
    const ScmProblem& base = problems[idx % n_out];
    Cell cell;
    try {
      std::vector<std::string> donors;
      for (const auto& d : pool.donors) {
        if (d != drop) donors.push_back(d);
      }
      DonorPool reduced = make_pool(panel, pool.treated, std::move(donors));
      ScmProblem p = build_problem(panel, reduced, base.outcome, base.treatment_year, base.covariate_keys,
                                   base.settings);
      ScmFit fit = fit_estimator(p, estimator, options);
      cell.effect = summarize_effect(p, fit, windows.strict, mode);
    } catch (const Error& e) {
      cell.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    return cell;
  });

  for (std::size_t r = 0; r < ranked.size(); ++r) {
    LooRun run;
    run.excluded = pool.donors[ranked[r]];
    run.baseline_weight = mean_weight[ranked[r]];
    for (std::size_t o = 0; o < n_out; ++o) {
      auto& c = cells[r * n_out + o];
      run.effects.push_back(std::move(c.effect));
      run.errors.push_back(std::move(c.error));
    }
    study.runs.push_back(std::move(run));
  }

  for (std::size_t o = 0; o < n_out; ++o) {
    LooAggregate agg;
    agg.outcome = study.outcomes[o];
    std::vector<double> xs;
    for (const auto& run : study.runs) {
      if (run.effects[o]) xs.push_back(run.effects[o]->att_points);
    }
    agg.runs = static_cast<int>(xs.size());
    if (!xs.empty()) {
      agg.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
      agg.sd = sample_sd(xs);
      agg.min = *std::min_element(xs.begin(), xs.end());
      agg.max = *std::max_element(xs.begin(), xs.end());
    }
    study.aggregates.push_back(agg);
  }
  return study;
}

std::vector<SweepCell> sensitivity_sweep(const std::vector<ScmProblem>& problems,
                                         const std::vector<EstimatorTag>& estimators,
                                         const EstimatorOptions& options, SdBasisMode mode, unsigned jobs,
                                         int strict_offset) {
  const std::size_t n_out = problems.size();
  return parallel_map(estimators.size() * n_out, jobs, [&](std::size_t idx) {
    const ScmProblem& p = problems[idx % n_out];
    SweepCell cell;
    cell.estimator = estimators[idx / n_out];
    cell.outcome = p.outcome;
    try {
      ScmFit fit = fit_estimator(p, cell.estimator, options);
      const auto w = default_windows(p.treatment_year, fit.periods, strict_offset);
      const double basis = sd_basis(p, mode);
      cell.full_post = summarize_effect(fit, w.full_post, basis, mode);
      if (!w.strict_years.empty()) cell.strict = summarize_effect(fit, w.strict, basis, mode);
      cell.fit = std::move(fit);
    } catch (const Error& e) {
      cell.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    return cell;
  });
}

int ceiling_percentile(const std::vector<double>& population, double value) {
  const auto rank = std::count_if(population.begin(), population.end(), [&](double x) { return x <= value; });
  return static_cast<int>(std::lround(100.0 * static_cast<double>(rank) / static_cast<double>(population.size())));
}

PercentileTable percentile_table(const PanelDataset& panel, const std::vector<std::string>& units,
                                 const std::vector<std::string>& outcome_keys, Year split_year,
                                 const std::vector<std::string>& population) {
  if (!panel.period_index(split_year)) {
    throw Error(ErrorCode::InvalidWindow, "split year " + std::to_string(split_year) + " is not in the index");
  }
  const auto& periods = panel.periods();
  if (periods.front() >= split_year) {
    throw Error(ErrorCode::InvalidWindow, "no index year precedes split year " + std::to_string(split_year));
  }
  std::vector<std::size_t> rows;
  if (population.empty()) {
    rows.resize(panel.unit_count());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  } else {
    for (const auto& id : population) rows.push_back(panel.unit_index(id));
  }
  std::vector<std::size_t> where;
  for (const auto& id : units) {
    const auto r = panel.unit_index(id);
    auto it = std::find(rows.begin(), rows.end(), r);
    if (it == rows.end()) {
      throw Error(ErrorCode::InvalidArgument, "unit '" + id + "' is not in the ranking population");
    }
    where.push_back(static_cast<std::size_t>(it - rows.begin()));
  }

  PercentileTable table;
  table.split_year = split_year;
  table.population = rows.size();
  const YearRange pre{periods.front(), split_year - 1};
  const YearRange post{split_year, periods.back()};
  std::vector<std::vector<double>> pre_means, post_means;
  for (const auto& key : outcome_keys) {
    pre_means.push_back(collapse_outcome(panel, key, pre, rows));
    post_means.push_back(collapse_outcome(panel, key, post, rows));
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (std::size_t o = 0; o < outcome_keys.size(); ++o) {
      PercentileRow row;
      row.unit_id = units[u];
      row.outcome = outcome_keys[o];
      row.pre_mean = pre_means[o][where[u]];
      row.post_mean = post_means[o][where[u]];
      row.pre_percentile = ceiling_percentile(pre_means[o], row.pre_mean);
      row.post_percentile = ceiling_percentile(post_means[o], row.post_mean);
      row.difference = row.post_percentile - row.pre_percentile;
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace synthctl
