#include "synthctl/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <set>

#include "synthctl/error.hpp"

namespace synthctl {

namespace {

struct UnitDraw {
  double quality = 0.0;
  std::vector<double> alpha;                 // per outcome
  std::vector<std::vector<double>> loading;  // outcome x factor
  std::vector<double> covariate_base;        // per time-varying covariate
};

const std::vector<std::string> kCovariates{"attendance_share", "enrolments_fte", "female_share", "icsea",
                                           "mean_class_size"};

// Location, level and yearly wobble of each time-varying covariate.
struct CovariateShape {
  double mean;
  double sd;
  double yearly_sd;
};
const CovariateShape kShapes[] = {
    {0.93, 0.015, 0.005}, {260.0, 90.0, 12.0}, {0.48, 0.03, 0.01}, {1030.0, 45.0, 4.0}, {23.5, 1.8, 0.6}};

double round_to(double v, int decimals) {
  if (decimals < 0) return v;
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

}  // namespace

double NormalStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double NormalStream::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::vector<double> step_effect(const DgpSpec& spec, int start, double size) {
  std::vector<double> path;
  int index = 0;
  for (Year y = spec.treatment_year; y <= spec.last_year; ++y) {
    if (spec.gap_year && y == *spec.gap_year) continue;
    path.push_back(index++ >= start ? size : 0.0);
  }
  return path;
}

Simulation generate(const DgpSpec& spec) {
  if (spec.units < 2) throw Error(ErrorCode::InvalidArgument, "simulation needs at least two units");
  if (spec.factors < 1) throw Error(ErrorCode::InvalidArgument, "simulation needs at least one factor");
  if (spec.first_year >= spec.treatment_year || spec.treatment_year > spec.last_year) {
    throw Error(ErrorCode::InvalidArgument, "treatment year must split the simulated years");
  }
  if (spec.treated_in_hull && (spec.hull_size < 1 || spec.hull_size > spec.units - 1)) {
    throw Error(ErrorCode::InvalidArgument, "hull size must be between 1 and the donor count");
  }

  NormalStream rng(spec.seed);
  const auto n = static_cast<std::size_t>(spec.units);
  const std::size_t n_out = spec.outcomes.size();
  const auto n_fac = static_cast<std::size_t>(spec.factors);

  std::vector<Year> years;
  for (Year y = spec.first_year; y <= spec.last_year; ++y) years.push_back(y);
  const std::size_t n_t = years.size();

  // Factor paths per outcome: a common upward trend plus random shocks.
  std::vector<std::vector<std::vector<double>>> delta(n_out, std::vector<std::vector<double>>(n_t));
  for (std::size_t o = 0; o < n_out; ++o) {
    for (std::size_t t = 0; t < n_t; ++t) {
      delta[o][t].resize(n_fac);
      delta[o][t][0] = 2.0 * static_cast<double>(t);
      for (std::size_t f = 1; f < n_fac; ++f) delta[o][t][f] = 8.0 * rng.normal();
    }
  }

  std::vector<UnitDraw> draws(n);
  for (auto& d : draws) {
    d.quality = rng.normal();
    for (std::size_t o = 0; o < n_out; ++o) {
      d.alpha.push_back(28.0 * d.quality + 10.0 * rng.normal());
      std::vector<double> lam(n_fac);
      lam[0] = spec.loading_scale * (1.0 + 0.4 * rng.normal());
      for (std::size_t f = 1; f < n_fac; ++f) lam[f] = spec.loading_scale * rng.normal();
      d.loading.push_back(std::move(lam));
    }
    for (std::size_t c = 0; c < kCovariates.size(); ++c) {
      double base = kShapes[c].mean + kShapes[c].sd * rng.normal();
      if (kCovariates[c] == "icsea") base += 20.0 * d.quality;
      d.covariate_base.push_back(base);
    }
  }

  std::vector<std::vector<double>> covariate_cells(kCovariates.size(), std::vector<double>(n * n_t));
  for (std::size_t c = 0; c < kCovariates.size(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < n_t; ++t) {
        covariate_cells[c][i * n_t + t] = draws[i].covariate_base[c] + kShapes[c].yearly_sd * rng.normal();
      }
    }
  }

  SimTruth truth;
  std::vector<std::size_t> hull;
  if (spec.treated_in_hull) {
    std::set<std::size_t> picked;
    while (picked.size() < static_cast<std::size_t>(spec.hull_size)) {
      picked.insert(1 + static_cast<std::size_t>(rng.bits() % (n - 1)));
    }
    hull.assign(picked.begin(), picked.end());
    std::vector<double> w;
    double total = 0.0;
    for (std::size_t k = 0; k < hull.size(); ++k) {
      w.push_back(-std::log(1.0 - rng.uniform()));
      total += w.back();
    }
    for (auto& x : w) x /= total;
    UnitDraw& tr = draws[0];
    for (std::size_t o = 0; o < n_out; ++o) {
      tr.alpha[o] = 0.0;
      for (std::size_t f = 0; f < n_fac; ++f) tr.loading[o][f] = 0.0;
      for (std::size_t k = 0; k < hull.size(); ++k) {
        tr.alpha[o] += w[k] * draws[hull[k]].alpha[o];
        for (std::size_t f = 0; f < n_fac; ++f) tr.loading[o][f] += w[k] * draws[hull[k]].loading[o][f];
      }
    }
    for (auto& cells : covariate_cells) {
      for (std::size_t t = 0; t < n_t; ++t) {
        double v = 0.0;
        for (std::size_t k = 0; k < hull.size(); ++k) v += w[k] * cells[hull[k] * n_t + t];
        cells[t] = v;
      }
    }
    truth.hull_weights = w;
  }

  // Effect per calendar year (zero before treatment and in the gap year).
  auto effect_for = [&](std::size_t o) {
    std::vector<double> out(n_t, 0.0);
    const auto it = spec.outcome_effects.find(spec.outcomes[o]);
    const auto& path = it != spec.outcome_effects.end() ? it->second : spec.effect_path;
    std::size_t k = 0;
    for (std::size_t t = 0; t < n_t; ++t) {
      if (years[t] < spec.treatment_year || (spec.gap_year && years[t] == *spec.gap_year)) continue;
      if (k < path.size()) out[t] = path[k];
      ++k;
    }
    return out;
  };

  std::vector<UnitRecord> units(n);
  std::vector<std::string> postcodes;
  for (int p = 0; p < std::max(4, spec.units / 3); ++p) postcodes.push_back(std::to_string(2280 + p));
  for (std::size_t i = 0; i < n; ++i) {
    UnitRecord& u = units[i];
    u.id = fmt::format("U{:03d}", i + 1);
    u.name = i == 0 ? "Treated Public School" : fmt::format("Donor {:03d} Public School", i);
    const double lat = i == 0 ? -32.9620 : -32.9620 + 0.25 * rng.normal();
    const double lon = i == 0 ? 151.6930 : 151.6930 + 0.25 * rng.normal();
    u.attributes["latitude"] = round_to(lat, 4);
    u.attributes["longitude"] = round_to(lon, 4);
    u.attributes["postcode"] = i == 0 ? std::string("2290") : postcodes[rng.bits() % postcodes.size()];
    u.attributes["remoteness"] = std::string("Major Cities of Australia");
    u.attributes["coeducational"] = true;
    u.attributes["grade_span"] = std::string("K-6");
    u.attributes["lbote_pct"] = round_to(10.0 + 5.0 * rng.uniform(), 1);
    u.attributes["year_first_teacher"] = std::floor(1860.0 + 140.0 * rng.uniform());
  }

  const int decimals = spec.noise_sd > 0.0 ? 2 : -1;
  std::map<std::string, CellMatrix> outcomes;
  for (std::size_t o = 0; o < n_out; ++o) {
    const double mu = 400.0 + 20.0 * static_cast<double>(o);
    const auto effect = effect_for(o);
    CellMatrix m(n, n_t);
    std::vector<double> cf;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < n_t; ++t) {
        double y0 = mu + draws[i].alpha[o];
        for (std::size_t f = 0; f < n_fac; ++f) y0 += draws[i].loading[o][f] * delta[o][t][f];
        const double noise = spec.noise_sd * rng.normal();
        if (spec.gap_year && years[t] == *spec.gap_year) continue;
        y0 += noise;
        if (i == 0) cf.push_back(y0);
        m.set(i, t, round_to(y0 + (i == 0 ? effect[t] : 0.0), decimals));
      }
    }
    truth.counterfactual[spec.outcomes[o]] = std::move(cf);
    std::vector<double> eff;
    for (std::size_t t = 0; t < n_t; ++t) {
      if (!(spec.gap_year && years[t] == *spec.gap_year)) eff.push_back(effect[t]);
    }
    truth.effect[spec.outcomes[o]] = std::move(eff);
    outcomes.emplace(spec.outcomes[o], std::move(m));
  }

  std::map<std::string, CovariateSeries> covariates;
  if (spec.covariates) {
    for (std::size_t c = 0; c < kCovariates.size(); ++c) {
      CellMatrix m(n, n_t);
      const int dec = kCovariates[c] == "enrolments_fte" || kCovariates[c] == "icsea" ? 1 : 3;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < n_t; ++t) {
          m.set(i, t, round_to(covariate_cells[c][i * n_t + t], decimals < 0 ? -1 : dec));
        }
      }
      covariates.emplace(kCovariates[c], CovariateSeries::make_varying(std::move(m)));
    }
  }

  // Numeric static attributes double as fixed covariates, as on load.
  for (const char* key : {"latitude", "longitude", "lbote_pct", "year_first_teacher"}) {
    std::vector<std::optional<double>> values;
    for (const auto& u : units) values.push_back(u.number(key));
    covariates.emplace(key, CovariateSeries::make_fixed(std::move(values)));
  }

  std::vector<IncomeRow> income_rows;
  std::vector<std::string> all_postcodes = postcodes;
  all_postcodes.push_back("2290");
  std::sort(all_postcodes.begin(), all_postcodes.end());
  all_postcodes.erase(std::unique(all_postcodes.begin(), all_postcodes.end()), all_postcodes.end());
  for (const auto& pc : all_postcodes) {
    const double base = 64000.0 + 9000.0 * rng.normal();
    for (std::size_t t = 0; t < n_t; ++t) {
      income_rows.push_back({pc, years[t], std::round(base * std::pow(1.025, static_cast<double>(t)) * 100.0) / 100.0});
    }
  }

  Simulation sim;
  sim.spec = spec;
  sim.income = IncomeTable(std::move(income_rows));
  PanelDataset full(std::move(units), years, std::move(outcomes), std::move(covariates));
  sim.panel = spec.gap_year ? drop_period(full, *spec.gap_year) : std::move(full);
  truth.treated = sim.panel.units()[0].id;
  truth.periods = sim.panel.periods();
  for (auto h : hull) truth.hull_donors.push_back(sim.panel.units()[h].id);
  sim.truth = std::move(truth);
  return sim;
}

void write_simulation(const Simulation& sim, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (sim.spec.gap_year && sim.spec.write_gap_rows) {
    // Re-insert the gap year with empty outcome cells, as in the source data.
    const PanelDataset& p = sim.panel;
    std::vector<Year> years = p.periods();
    years.push_back(*sim.spec.gap_year);
    std::sort(years.begin(), years.end());
    const auto gap = static_cast<std::size_t>(std::find(years.begin(), years.end(), *sim.spec.gap_year) - years.begin());
    auto widen = [&](const CellMatrix& m) {
      CellMatrix out(m.rows(), years.size());
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
          if (auto v = m.at(r, c)) out.set(r, c < gap ? c : c + 1, *v);
        }
      }
      return out;
    };
    std::map<std::string, CellMatrix> outcomes;
    for (const auto& [k, m] : p.outcomes()) outcomes.emplace(k, widen(m));
    std::map<std::string, CovariateSeries> covs;
    for (const auto& [k, s] : p.covariates()) {
      if (s.kind != CovariateKind::TimeVarying) continue;
      CellMatrix m = widen(s.varying);
      // Covariates were still collected in the gap year; carry the previous year forward.
      for (std::size_t r = 0; r < m.rows(); ++r) {
        if (gap > 0) {
          if (auto v = m.at(r, gap - 1)) m.set(r, gap, *v);
        }
      }
      covs.emplace(k, CovariateSeries::make_varying(std::move(m)));
    }
    PanelDataset wide(p.units(), years, std::move(outcomes), std::move(covs));
    write_panel(wide, dir / "schools.csv", dir / "attributes.csv");
  } else {
    write_panel(sim.panel, dir / "schools.csv", dir / "attributes.csv");
  }
  write_income(sim.income, dir / "income.csv");

  nlohmann::ordered_json t;
  t["treated"] = sim.truth.treated;
  t["seed"] = sim.spec.seed;
  t["noise_sd"] = sim.spec.noise_sd;
  t["treatment_year"] = sim.spec.treatment_year;
  t["periods"] = sim.truth.periods;
  t["hull_donors"] = sim.truth.hull_donors;
  t["hull_weights"] = sim.truth.hull_weights;
  t["counterfactual"] = sim.truth.counterfactual;
  t["effect"] = sim.truth.effect;
  std::ofstream out(dir / "truth.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "truth.json").string());
  out << t.dump(2) << '\n';
}

}  // namespace synthctl
