#include "synthctl/serialize.hpp"

#include <fstream>
#include <sstream>

#include "synthctl/error.hpp"

namespace synthctl {

namespace {

ojson vec(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd to_vec(const ojson& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("malformed ") + what + " document: " + e.what());
  }
}

}  // namespace

ojson to_json(const ScmFit& fit, const std::vector<BalanceRow>* balance) {
  ojson j;
  j["kind"] = "fit";
  j["estimator"] = std::string(to_string(fit.estimator));
  j["outcome"] = fit.outcome;
  j["treated"] = fit.treated;
  j["treatment_year"] = fit.treatment_year;
  j["periods"] = fit.periods;
  j["pre_count"] = fit.pre_count;
  ojson donors = ojson::array();
  for (std::size_t d = 0; d < fit.donors.size(); ++d) {
    donors.push_back({{"unit_id", fit.donors[d]}, {"weight", fit.weights(static_cast<Eigen::Index>(d))}});
  }
  j["donors"] = donors;
  if (fit.importances) {
    ojson imp = ojson::array();
    for (std::size_t k = 0; k < fit.covariate_keys.size(); ++k) {
      imp.push_back({{"covariate", fit.covariate_keys[k]}, {"importance", (*fit.importances)(static_cast<Eigen::Index>(k))}});
    }
    j["importances"] = imp;
  } else {
    j["importances"] = nullptr;
  }
  j["intercept"] = fit.intercept ? ojson(*fit.intercept) : ojson(nullptr);
  j["observed"] = vec(fit.observed);
  j["counterfactual"] = vec(fit.counterfactual);
  j["gaps"] = vec(fit.gaps);
  j["pre_mspe"] = fit.pre_mspe;
  j["post_mspe"] = fit.post_mspe;
  if (balance) {
    ojson rows = ojson::array();
    for (const auto& r : *balance) {
      rows.push_back({{"covariate", r.covariate}, {"treated", r.treated}, {"synthetic", r.synthetic}});
    }
    j["balance"] = rows;
  }
  j["diagnostics"] = ojson::parse(fit.diagnostics.dump());
  return j;
}

std::vector<BalanceRow> balance_from_json(const ojson& j) {
  return guarded("fit", [&] {
    std::vector<BalanceRow> rows;
    if (!j.contains("balance")) return rows;
    for (const auto& r : j.at("balance")) {
      rows.push_back({r.at("covariate").get<std::string>(), r.at("treated").get<double>(), r.at("synthetic").get<double>()});
    }
    return rows;
  });
}

ScmFit fit_from_json(const ojson& j) {
  return guarded("fit", [&] {
    ScmFit fit;
    fit.estimator = parse_estimator(j.at("estimator").get<std::string>());
    fit.outcome = j.at("outcome").get<std::string>();
    fit.treated = j.at("treated").get<std::string>();
    fit.treatment_year = j.at("treatment_year").get<Year>();
    fit.periods = j.at("periods").get<std::vector<Year>>();
    fit.pre_count = j.at("pre_count").get<Eigen::Index>();
    const auto& donors = j.at("donors");
    fit.weights.resize(static_cast<Eigen::Index>(donors.size()));
    for (std::size_t d = 0; d < donors.size(); ++d) {
      fit.donors.push_back(donors[d].at("unit_id").get<std::string>());
      fit.weights(static_cast<Eigen::Index>(d)) = donors[d].at("weight").get<double>();
    }
    if (!j.at("importances").is_null()) {
      const auto& imp = j.at("importances");
      Eigen::VectorXd v(static_cast<Eigen::Index>(imp.size()));
      for (std::size_t k = 0; k < imp.size(); ++k) {
        fit.covariate_keys.push_back(imp[k].at("covariate").get<std::string>());
        v(static_cast<Eigen::Index>(k)) = imp[k].at("importance").get<double>();
      }
      fit.importances = v;
    }
    if (!j.at("intercept").is_null()) fit.intercept = j.at("intercept").get<double>();
    fit.observed = to_vec(j.at("observed"));
    fit.counterfactual = to_vec(j.at("counterfactual"));
    fit.gaps = to_vec(j.at("gaps"));
    fit.pre_mspe = j.at("pre_mspe").get<double>();
    fit.post_mspe = j.at("post_mspe").get<double>();
    fit.diagnostics = nlohmann::json::parse(j.at("diagnostics").dump());
    return fit;
  });
}

ojson to_json(const EffectSummary& s) {
  ojson j;
  j["outcome"] = s.outcome;
  j["window"] = {s.window.first, s.window.last};
  j["years"] = s.years;
  j["gaps"] = s.gaps;
  j["att_points"] = s.att_points;
  j["att_sd_units"] = s.att_sd_units;
  j["sd_basis"] = s.sd_basis;
  j["sd_basis_mode"] = std::string(to_string(s.sd_mode));
  return j;
}

EffectSummary effect_from_json(const ojson& j) {
  return guarded("effect", [&] {
    EffectSummary s;
    s.outcome = j.at("outcome").get<std::string>();
    s.window = {j.at("window").at(0).get<Year>(), j.at("window").at(1).get<Year>()};
    s.years = j.at("years").get<std::vector<Year>>();
    s.gaps = j.at("gaps").get<std::vector<double>>();
    s.att_points = j.at("att_points").get<double>();
    s.att_sd_units = j.at("att_sd_units").get<double>();
    s.sd_basis = j.at("sd_basis").get<double>();
    s.sd_mode = parse_sd_basis(j.at("sd_basis_mode").get<std::string>());
    return s;
  });
}

ojson to_json(const PlaceboStudy& study, const SharpNullDecision& decision) {
  ojson j;
  j["kind"] = "placebo";
  j["outcome"] = study.outcome;
  j["estimator"] = std::string(to_string(study.estimator));
  j["treated"] = study.treated;
  j["treatment_year"] = study.treatment_year;
  j["periods"] = study.periods;
  j["pre_count"] = study.pre_count;
  j["entry_count"] = study.entries.size();
  j["p_value"] = study.p_value;
  j["alpha"] = decision.alpha;
  j["reject_sharp_null"] = decision.reject;
  ojson entries = ojson::array();
  for (const auto& e : study.entries) {
    entries.push_back({{"unit_id", e.unit_id},
                       {"treated", e.unit_id == study.treated},
                       {"pre_mspe", e.pre_mspe},
                       {"post_mspe", e.post_mspe},
                       {"rmspe_ratio", e.ratio},
                       {"gaps", vec(e.gaps)}});
  }
  j["entries"] = entries;
  ojson excluded = ojson::array();
  for (const auto& x : study.excluded) {
    excluded.push_back({{"unit_id", x.unit_id}, {"code", x.code}, {"reason", x.reason}});
  }
  j["excluded"] = excluded;
  return j;
}

PlaceboStudy placebo_from_json(const ojson& j) {
  return guarded("placebo", [&] {
    PlaceboStudy s;
    s.outcome = j.at("outcome").get<std::string>();
    s.estimator = parse_estimator(j.at("estimator").get<std::string>());
    s.treated = j.at("treated").get<std::string>();
    s.treatment_year = j.at("treatment_year").get<Year>();
    s.periods = j.at("periods").get<std::vector<Year>>();
    s.pre_count = j.at("pre_count").get<Eigen::Index>();
    s.p_value = j.at("p_value").get<double>();
    for (const auto& e : j.at("entries")) {
      PlaceboEntry entry;
      entry.unit_id = e.at("unit_id").get<std::string>();
      entry.pre_mspe = e.at("pre_mspe").get<double>();
      entry.post_mspe = e.at("post_mspe").get<double>();
      entry.ratio = e.at("rmspe_ratio").get<double>();
      entry.gaps = to_vec(e.at("gaps"));
      if (entry.unit_id == s.treated) s.treated_index = s.entries.size();
      s.entries.push_back(std::move(entry));
    }
    for (const auto& x : j.at("excluded")) {
      s.excluded.push_back({x.at("unit_id").get<std::string>(), x.at("code").get<std::string>(),
                            x.at("reason").get<std::string>()});
    }
    return s;
  });
}

ojson to_json(const LooStudy& study) {
  ojson j;
  j["kind"] = "leave_one_out";
  j["estimator"] = std::string(to_string(study.estimator));
  j["outcomes"] = study.outcomes;
  ojson base = ojson::array();
  for (const auto& b : study.baseline) base.push_back(to_json(b));
  j["baseline"] = base;
  ojson runs = ojson::array();
  for (const auto& r : study.runs) {
    ojson effects = ojson::array();
    for (std::size_t o = 0; o < r.effects.size(); ++o) {
      if (r.effects[o]) {
        effects.push_back(to_json(*r.effects[o]));
      } else {
        effects.push_back({{"outcome", study.outcomes[o]}, {"error", r.errors[o]}});
      }
    }
    runs.push_back({{"excluded", r.excluded}, {"baseline_weight", r.baseline_weight}, {"effects", effects}});
  }
  j["runs"] = runs;
  ojson aggs = ojson::array();
  for (const auto& a : study.aggregates) {
    aggs.push_back({{"outcome", a.outcome}, {"runs", a.runs}, {"mean", a.mean}, {"sd", a.sd}, {"min", a.min}, {"max", a.max}});
  }
  j["aggregates"] = aggs;
  return j;
}

LooStudy loo_from_json(const ojson& j) {
  return guarded("leave-one-out", [&] {
    LooStudy s;
    s.estimator = parse_estimator(j.at("estimator").get<std::string>());
    s.outcomes = j.at("outcomes").get<std::vector<std::string>>();
    for (const auto& b : j.at("baseline")) s.baseline.push_back(effect_from_json(b));
    for (const auto& r : j.at("runs")) {
      LooRun run;
      run.excluded = r.at("excluded").get<std::string>();
      run.baseline_weight = r.at("baseline_weight").get<double>();
      for (const auto& e : r.at("effects")) {
        if (e.contains("error")) {
          run.effects.emplace_back();
          run.errors.push_back(e.at("error").get<std::string>());
        } else {
          run.effects.push_back(effect_from_json(e));
          run.errors.emplace_back();
        }
      }
      s.runs.push_back(std::move(run));
    }
    for (const auto& a : j.at("aggregates")) {
      s.aggregates.push_back({a.at("outcome").get<std::string>(), a.at("runs").get<int>(), a.at("mean").get<double>(),
                              a.at("sd").get<double>(), a.at("min").get<double>(), a.at("max").get<double>()});
    }
    return s;
  });
}

ojson to_json(const PercentileTable& table) {
  ojson j;
  j["kind"] = "percentiles";
  j["split_year"] = table.split_year;
  j["population"] = table.population;
  ojson rows = ojson::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"unit_id", r.unit_id},
                    {"outcome", r.outcome},
                    {"pre_mean", r.pre_mean},
                    {"post_mean", r.post_mean},
                    {"pre_percentile", r.pre_percentile},
                    {"post_percentile", r.post_percentile},
                    {"difference", r.difference}});
  }
  j["rows"] = rows;
  return j;
}

void write_json(const std::filesystem::path& path, const ojson& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ojson read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return ojson::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaMismatch, path.string() + ": " + e.what());
  }
}

}  // namespace synthctl
