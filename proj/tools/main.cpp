#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthctl/commands.hpp"
#include "synthctl/config.hpp"
#include "synthctl/error.hpp"

namespace {

constexpr int kUsageError = 2;

struct Flags {
  std::string config;
  unsigned jobs = 1;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic control estimation, placebo inference and robustness reports"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "synthctl 0.1.0");

  Flags flags;
  const char* names[] = {"fit", "placebo", "loo", "sensitivity", "simulate", "report"};
  const char* help[] = {
      "Fit the configured estimator on every outcome",
      "Placebo permutation study and exact p-values",
      "Leave-one-out refits over the top-k donors",
      "Run the sensitivity estimators on every outcome",
      "Generate a known-counterfactual panel",
      "Re-render tables and figures from saved results",
  };
  for (int i = 0; i < 6; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", flags.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_option("--out", flags.out, "Output directory (overrides the config)");
    sub->add_option("--seed", flags.seed, "Seed (overrides the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  const auto* chosen = app.get_subcommands().front();
  const auto command = synthctl::parse_command(chosen->get_name());
  if (!command) return kUsageError;

  synthctl::RunConfig config;
  try {
    config = synthctl::load_config(flags.config);
    if (flags.out) synthctl::override_output(config, *flags.out);
    if (flags.seed) synthctl::override_seed(config, *flags.seed);
  } catch (const synthctl::Error& e) {
    nlohmann::ordered_json report;
    report["command"] = chosen->get_name();
    report["error"] = std::string(synthctl::to_string(e.code()));
    report["message"] = e.what();
    std::cerr << report.dump() << '\n';
    return 1;
  }
  return synthctl::run_command(*command, config, flags.jobs, std::cerr);
}
