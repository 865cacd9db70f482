#pragma once

// The six subcommands. Each reads a RunConfig, writes a deterministic
// output directory and throws synthctl::Error on failure; run_command
// turns failures into exit codes and a machine-readable report.

#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "synthctl/config.hpp"
#include "synthctl/estimators.hpp"

namespace synthctl {

enum class Command { Fit, Placebo, Loo, Sensitivity, Simulate, Report };

std::optional<Command> parse_command(std::string_view name);
std::string_view to_string(Command command);

/// Data loaded and validated for a config: panel (income joined), pool and
/// one problem per configured outcome.
struct Workspace {
  PanelDataset panel;
  DonorPool pool;
  std::vector<ScmProblem> problems;
};

Workspace prepare(const RunConfig& config);

/// Each writes into <output_dir>/<command> (simulate: the simulate output).
void cmd_fit(const RunConfig& config, unsigned jobs = 1);
void cmd_placebo(const RunConfig& config, unsigned jobs = 1);
void cmd_loo(const RunConfig& config, unsigned jobs = 1);
void cmd_sensitivity(const RunConfig& config, unsigned jobs = 1);
void cmd_simulate(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// 0 on success; 1 after printing a JSON error report to `err` and, when
/// possible, writing it to <output_dir>/error.json.
int run_command(Command command, const RunConfig& config, unsigned jobs, std::ostream& err);

}  // namespace synthctl
