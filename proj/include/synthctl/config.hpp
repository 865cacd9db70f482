#pragma once

// Declarative run configuration. The file is JSON with comments allowed;
// relative paths resolve against the directory holding the file. Unknown
// keys are rejected so a typo cannot silently fall back to a default.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthctl/analysis.hpp"
#include "synthctl/pool.hpp"
#include "synthctl/simgen.hpp"

namespace synthctl {

struct DataConfig {
  std::filesystem::path schools;
  std::optional<std::filesystem::path> attributes;
  std::optional<std::filesystem::path> income;
  std::set<Year> exclude_years{2020};
};

struct PercentileConfig {
  int top_donors = 8;      // rows: treated plus the top donors of the first fit
  bool whole_panel = false;  // rank against all units instead of the pool
};

struct SimulateConfig {
  std::filesystem::path output;
  DgpSpec spec;
};

struct RunConfig {
  std::filesystem::path source;
  DataConfig data;
  std::string treated;
  Year treatment_year = 2014;
  DonorFilterSpec donor_filter;
  std::vector<std::string> outcomes;
  std::vector<std::string> covariates;
  EstimatorTag estimator = EstimatorTag::AbadieNested;
  EstimatorOptions estimator_options;
  std::vector<EstimatorTag> sensitivity_estimators = kSensitivityEstimators;
  int strict_offset = kStrictOffset;
  double alpha = 0.05;
  SdBasisMode sd_mode = SdBasisMode::DonorPrePooled;
  int loo_k = 8;
  PercentileConfig percentiles;
  bool svg = true;
  SolverSettings solver;
  std::filesystem::path output_dir;
  std::uint64_t seed = 20140101;
  std::optional<SimulateConfig> simulate;

  // Configuration with defaults filled in and paths as written, excluding
  // the output directory. Hashed into the fingerprint.
  nlohmann::ordered_json canonical;
  std::string fingerprint;
};

/// Throws ConfigError (or IoError when the file cannot be read).
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Overrides applied after loading. The output directory also redirects
/// the simulate output and is not part of the fingerprint; the seed is.
void override_output(RunConfig& config, const std::filesystem::path& dir);
void override_seed(RunConfig& config, std::uint64_t seed);

/// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Checks that the treated unit, outcomes, covariates and predicate
/// attributes exist in the panel. Throws the matching Unknown* error.
void validate_against(const RunConfig& config, const PanelDataset& panel);

}  // namespace synthctl
