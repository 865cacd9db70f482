#include "synthctl/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "synthctl/error.hpp"

namespace synthctl {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

// Reads typed keys from one JSON object and remembers which were consumed,
// so leftovers can be reported as unknown.
class Section {
 public:
  Section(const ojson& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail(where() + "expected an object");
  }

  template <class T>
  std::optional<T> get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(where(key) + "has the wrong type");
    }
  }

  template <class T>
  T require(const std::string& key) {
    auto v = get<T>(key);
    if (!v) fail(where(key) + "is required");
    return *v;
  }

  const ojson* sub(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) fail(where(key) + "is not a recognised key");
    }
  }

  std::string where(const std::string& key = {}) const {
    std::string path = name_.empty() ? key : (key.empty() ? name_ : name_ + "." + key);
    return path.empty() ? std::string("config: ") : "config key '" + path + "' ";
  }

 private:
  const ojson& j_;
  std::string name_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

AttributeValue to_attribute(const ojson& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>();
  fail("config key 'donor_filter.equals." + key + "' must be a string, boolean or number");
}

ojson attribute_json(const AttributeValue& v) {
  return std::visit([](const auto& x) { return ojson(x); }, v);
}

void parse_simulate(const ojson& j, const std::filesystem::path& base, RunConfig& c, ojson& canon) {
  Section s(j, "simulate");
  SimulateConfig sim;
  const auto out = s.require<std::string>("output");
  sim.output = resolve(base, out);
  DgpSpec& d = sim.spec;
  if (auto v = s.get<int>("units")) d.units = *v;
  if (auto v = s.get<Year>("first_year")) d.first_year = *v;
  if (auto v = s.get<Year>("last_year")) d.last_year = *v;
  if (const auto* g = s.sub("gap_year")) {
    d.gap_year = g->get<Year>();
  } else if (j.contains("gap_year")) {
    d.gap_year.reset();
  }
  if (auto v = s.get<bool>("write_gap_rows")) d.write_gap_rows = *v;
  d.treatment_year = c.treatment_year;
  if (!c.outcomes.empty()) d.outcomes = c.outcomes;
  if (auto v = s.get<int>("factors")) d.factors = *v;
  if (auto v = s.get<double>("loading_scale")) d.loading_scale = *v;
  if (auto v = s.get<double>("noise_sd")) d.noise_sd = *v;
  if (auto v = s.get<bool>("treated_in_hull")) d.treated_in_hull = *v;
  if (auto v = s.get<int>("hull_size")) d.hull_size = *v;
  if (auto v = s.get<bool>("covariates")) d.covariates = *v;
  int effect_start = 0;
  double effect_size = 0.0;
  if (const auto* e = s.sub("effect")) {
    Section es(*e, "simulate.effect");
    effect_start = es.require<int>("start");
    effect_size = es.require<double>("size");
    es.finish();
  }
  d.effect_path = step_effect(d, effect_start, effect_size);
  if (const auto* oe = s.sub("outcome_effects")) {
    Section os(*oe, "simulate.outcome_effects");
    for (const auto& [key, val] : oe->items()) {
      Section es(val, "simulate.outcome_effects." + key);
      d.outcome_effects[key] = step_effect(d, es.require<int>("start"), es.require<double>("size"));
      es.finish();
      (void)os.sub(key);
    }
    os.finish();
  }
  s.finish();
  if (d.units < 2) fail("config key 'simulate.units' must be at least 2");
  if (d.last_year <= d.first_year) fail("config key 'simulate.last_year' must follow first_year");

  ojson sc;
  sc["output"] = out;
  sc["units"] = d.units;
  sc["first_year"] = d.first_year;
  sc["last_year"] = d.last_year;
  sc["gap_year"] = d.gap_year ? ojson(*d.gap_year) : ojson(nullptr);
  sc["write_gap_rows"] = d.write_gap_rows;
  sc["factors"] = d.factors;
  sc["loading_scale"] = d.loading_scale;
  sc["noise_sd"] = d.noise_sd;
  sc["treated_in_hull"] = d.treated_in_hull;
  sc["hull_size"] = d.hull_size;
  sc["covariates"] = d.covariates;
  sc["effect"] = {{"start", effect_start}, {"size", effect_size}};
  ojson oe = ojson::object();
  for (const auto& [k, v] : d.outcome_effects) oe[k] = v;
  sc["outcome_effects"] = oe;
  canon["simulate"] = sc;
  c.simulate = std::move(sim);
}

void refresh_fingerprint(RunConfig& c) {
  c.canonical["seed"] = c.seed;
  if (c.simulate) c.simulate->spec.seed = c.seed;
  c.fingerprint = fnv1a_hex(c.canonical.dump());
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ojson root;
  try {
    root = ojson::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  ojson canon;
  Section top(root, "");

  if (const auto* d = top.sub("data")) {
    Section s(*d, "data");
    const auto schools = s.require<std::string>("schools");
    c.data.schools = resolve(base_dir, schools);
    ojson dc;
    dc["schools"] = schools;
    if (auto a = s.get<std::string>("attributes")) {
      c.data.attributes = resolve(base_dir, *a);
      dc["attributes"] = *a;
    }
    if (auto i = s.get<std::string>("income")) {
      c.data.income = resolve(base_dir, *i);
      dc["income"] = *i;
    }
    if (auto ex = s.get<std::vector<Year>>("exclude_years")) c.data.exclude_years = {ex->begin(), ex->end()};
    dc["exclude_years"] = std::vector<Year>(c.data.exclude_years.begin(), c.data.exclude_years.end());
    s.finish();
    canon["data"] = dc;
  }

  c.treated = top.get<std::string>("treated").value_or("");
  c.treatment_year = top.get<Year>("treatment_year").value_or(2014);
  canon["treated"] = c.treated;
  canon["treatment_year"] = c.treatment_year;

  ojson fc = {{"equals", ojson::object()}, {"ranges", ojson::object()}};
  if (const auto* f = top.sub("donor_filter")) {
    Section s(*f, "donor_filter");
    if (const auto* eq = s.sub("equals")) {
      if (!eq->is_object()) fail("config key 'donor_filter.equals' must be an object");
      for (const auto& [key, val] : eq->items()) {
        c.donor_filter.equals.push_back({key, to_attribute(val, key)});
        fc["equals"][key] = attribute_json(c.donor_filter.equals.back().value);
      }
    }
    if (const auto* rg = s.sub("ranges")) {
      if (!rg->is_object()) fail("config key 'donor_filter.ranges' must be an object");
      for (const auto& [key, val] : rg->items()) {
        if (!val.is_array() || val.size() != 2 || !val[0].is_number() || !val[1].is_number()) {
          fail("config key 'donor_filter.ranges." + key + "' must be [min, max]");
        }
        RangePredicate r{key, val[0].get<double>(), val[1].get<double>()};
        if (r.min > r.max) fail("config key 'donor_filter.ranges." + key + "' has min > max");
        c.donor_filter.ranges.push_back(r);
        fc["ranges"][key] = {r.min, r.max};
      }
    }
    s.finish();
  }
  c.donor_filter.anchor = c.treated;
  canon["donor_filter"] = fc;

  c.outcomes = top.get<std::vector<std::string>>("outcomes").value_or(std::vector<std::string>{});
  c.covariates = top.get<std::vector<std::string>>("covariates").value_or(std::vector<std::string>{});
  canon["outcomes"] = c.outcomes;
  canon["covariates"] = c.covariates;

  if (const auto* e = top.sub("estimator")) {
    Section s(*e, "estimator");
    try {
      if (auto n = s.get<std::string>("name")) c.estimator = parse_estimator(*n);
    } catch (const Error& err) {
      fail(std::string("config key 'estimator.name': ") + err.what());
    }
    if (auto v = s.get<int>("v_evaluations")) c.estimator_options.v_evaluations = *v;
    if (auto v = s.get<int>("hsiao_max_regressors")) c.estimator_options.hsiao_max_regressors = *v;
    if (auto v = s.get<double>("chern_bound")) c.estimator_options.chern_bound = *v;
    s.finish();
  }
  if (c.estimator_options.chern_bound <= 0.0) fail("config key 'estimator.chern_bound' must be positive");
  if (c.estimator_options.v_evaluations < 1) fail("config key 'estimator.v_evaluations' must be positive");
  canon["estimator"] = {{"name", std::string(to_string(c.estimator))},
                        {"v_evaluations", c.estimator_options.v_evaluations},
                        {"hsiao_max_regressors", c.estimator_options.hsiao_max_regressors},
                        {"chern_bound", c.estimator_options.chern_bound}};

  if (const auto* sv = top.sub("sensitivity")) {
    Section s(*sv, "sensitivity");
    if (auto names = s.get<std::vector<std::string>>("estimators")) {
      c.sensitivity_estimators.clear();
      for (const auto& n : *names) {
        try {
          c.sensitivity_estimators.push_back(parse_estimator(n));
        } catch (const Error& err) {
          fail(std::string("config key 'sensitivity.estimators': ") + err.what());
        }
      }
    }
    s.finish();
  }
  {
    std::vector<std::string> names;
    for (auto t : c.sensitivity_estimators) names.emplace_back(to_string(t));
    canon["sensitivity"] = {{"estimators", names}};
  }

  if (const auto* w = top.sub("windows")) {
    Section s(*w, "windows");
    if (auto v = s.get<int>("strict_offset")) c.strict_offset = *v;
    s.finish();
  }
  if (c.strict_offset < 0) fail("config key 'windows.strict_offset' must be non-negative");
  canon["windows"] = {{"strict_offset", c.strict_offset}};

  if (const auto* inf = top.sub("inference")) {
    Section s(*inf, "inference");
    if (auto v = s.get<double>("alpha")) c.alpha = *v;
    s.finish();
  }
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("config key 'inference.alpha' must lie in (0, 1)");
  canon["inference"] = {{"alpha", c.alpha}};

  if (const auto* ef = top.sub("effects")) {
    Section s(*ef, "effects");
    try {
      if (auto v = s.get<std::string>("sd_basis")) c.sd_mode = parse_sd_basis(*v);
    } catch (const Error& err) {
      fail(std::string("config key 'effects.sd_basis': ") + err.what());
    }
    s.finish();
  }
  canon["effects"] = {{"sd_basis", std::string(to_string(c.sd_mode))}};

  if (const auto* l = top.sub("loo")) {
    Section s(*l, "loo");
    if (auto v = s.get<int>("k")) c.loo_k = *v;
    s.finish();
  }
  if (c.loo_k < 1) fail("config key 'loo.k' must be at least 1");
  canon["loo"] = {{"k", c.loo_k}};

  if (const auto* p = top.sub("percentiles")) {
    Section s(*p, "percentiles");
    if (auto v = s.get<int>("top_donors")) c.percentiles.top_donors = *v;
    if (auto v = s.get<std::string>("population")) {
      if (*v == "pool") c.percentiles.whole_panel = false;
      else if (*v == "panel") c.percentiles.whole_panel = true;
      else fail("config key 'percentiles.population' must be \"pool\" or \"panel\"");
    }
    s.finish();
  }
  canon["percentiles"] = {{"top_donors", c.percentiles.top_donors},
                          {"population", c.percentiles.whole_panel ? "panel" : "pool"}};

  if (const auto* r = top.sub("report")) {
    Section s(*r, "report");
    if (auto v = s.get<bool>("svg")) c.svg = *v;
    s.finish();
  }
  canon["report"] = {{"svg", c.svg}};

  if (const auto* sv = top.sub("solver")) {
    Section s(*sv, "solver");
    if (auto v = s.get<double>("objective_tol")) c.solver.objective_tol = *v;
    if (auto v = s.get<int>("max_iterations")) c.solver.max_iterations = *v;
    if (auto v = s.get<int>("power_iterations")) c.solver.power_iterations = *v;
    s.finish();
  }
  canon["solver"] = {{"objective_tol", c.solver.objective_tol},
                     {"max_iterations", c.solver.max_iterations},
                     {"power_iterations", c.solver.power_iterations}};

  c.output_dir = resolve(base_dir, top.get<std::string>("output_dir").value_or("out"));
  c.seed = top.get<std::uint64_t>("seed").value_or(20140101);

  if (const auto* sim = top.sub("simulate")) parse_simulate(*sim, base_dir, c, canon);
  top.finish();

  c.canonical = std::move(canon);
  refresh_fingerprint(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  RunConfig c = parse_config(ss.str(), base);
  c.source = path;
  return c;
}

void override_output(RunConfig& config, const std::filesystem::path& dir) {
  config.output_dir = dir;
  if (config.simulate) config.simulate->output = dir;
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  refresh_fingerprint(config);
}

void validate_against(const RunConfig& c, const PanelDataset& panel) {
  if (c.treated.empty()) throw Error(ErrorCode::ConfigError, "config key 'treated' is required");
  (void)panel.unit_index(c.treated);
  if (c.outcomes.empty()) throw Error(ErrorCode::ConfigError, "config key 'outcomes' must list at least one outcome");
  for (const auto& o : c.outcomes) (void)panel.outcome(o);
  for (const auto& k : c.covariates) {
    if (k != kRadialDistance && !panel.has_covariate(k)) {
      throw Error(ErrorCode::UnknownCovariate, "unknown covariate '" + k + "'");
    }
  }
  if (!panel.period_index(c.treatment_year)) {
    bool after = false;
    for (Year y : panel.periods()) after = after || y > c.treatment_year;
    if (!after) throw Error(ErrorCode::InvalidWindow, fmt::format("treatment year {} has no post periods", c.treatment_year));
  }
  auto check_attr = [&](const std::string& key) {
    for (const auto& u : panel.units()) {
      if (u.attribute(key)) return;
    }
    throw Error(ErrorCode::UnknownAttribute, "unknown attribute '" + key + "' in donor_filter");
  };
  for (const auto& e : c.donor_filter.equals) check_attr(e.key);
  for (const auto& r : c.donor_filter.ranges) check_attr(r.key);
}

}  // namespace synthctl
