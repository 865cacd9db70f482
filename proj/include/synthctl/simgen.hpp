#pragma once

// Known-counterfactual panel generator.
//
// Outcomes follow a linear factor model
//   y_it = mu + alpha_i + sum_f lambda_if * delta_tf + eps_it
// with two or more latent factors. When `treated_in_hull` is set, the
// treated unit's effect, loadings and time-varying covariates are a convex
// combination of `hull_size` donors, so a zero-noise synthetic control can
// reproduce its untreated path exactly. Random draws come from
// std::mt19937_64 with Box-Muller normals, both fully specified, so a seed
// reproduces the files byte for byte on any platform.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "synthctl/panel.hpp"

namespace synthctl {

/// Portable normal draws on top of std::mt19937_64.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // in [0, 1), 53 random bits
  double normal();   // Box-Muller, caches the second draw
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct DgpSpec {
  int units = 109;
  Year first_year = 2010;
  Year last_year = 2021;
  std::optional<Year> gap_year = 2020;
  // Keep rows for the gap year in the written schools file, with empty
  // outcome cells, as the real data would.
  bool write_gap_rows = true;
  Year treatment_year = 2014;
  std::vector<std::string> outcomes{"reading_y3", "reading_y5", "numeracy_y3", "numeracy_y5"};
  int factors = 2;
  double loading_scale = 1.0;
  double noise_sd = 5.0;
  // Additive effect per post-treatment index year, in order; missing
  // entries count as zero. Applied to every outcome unless overridden.
  std::vector<double> effect_path;
  std::map<std::string, std::vector<double>> outcome_effects;
  bool treated_in_hull = true;
  int hull_size = 3;
  bool covariates = true;
  std::uint64_t seed = 20140101;
};

/// Effect of `size` from the `start`-th post year (0-based) onwards.
std::vector<double> step_effect(const DgpSpec& spec, int start, double size);

struct SimTruth {
  std::string treated;
  std::vector<Year> periods;
  std::map<std::string, std::vector<double>> counterfactual;  // treated Y(0)
  std::map<std::string, std::vector<double>> effect;
  std::vector<std::string> hull_donors;
  std::vector<double> hull_weights;
};

struct Simulation {
  PanelDataset panel;  // gap year already removed
  IncomeTable income;
  SimTruth truth;
  DgpSpec spec;
};

Simulation generate(const DgpSpec& spec);

/// Writes schools.csv, attributes.csv, income.csv and truth.json.
void write_simulation(const Simulation& sim, const std::filesystem::path& dir);

}  // namespace synthctl
