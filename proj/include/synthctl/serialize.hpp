#pragma once

// JSON report schema. Every number a table prints can be recomputed from
// these documents, and the readers accept exactly what the writers emit.

#include <filesystem>

#include <json.hpp>

#include "synthctl/analysis.hpp"
#include "synthctl/inference.hpp"
#include "synthctl/report.hpp"

namespace synthctl {

using ojson = nlohmann::ordered_json;

/// The balance rows, when given, are stored under "balance".
ojson to_json(const ScmFit& fit, const std::vector<BalanceRow>* balance = nullptr);
ScmFit fit_from_json(const ojson& j);
std::vector<BalanceRow> balance_from_json(const ojson& fit_json);

ojson to_json(const EffectSummary& s);
EffectSummary effect_from_json(const ojson& j);

ojson to_json(const PlaceboStudy& study, const SharpNullDecision& decision);
PlaceboStudy placebo_from_json(const ojson& j);

ojson to_json(const LooStudy& study);
LooStudy loo_from_json(const ojson& j);

ojson to_json(const PercentileTable& table);

/// Writes `j.dump(2)` plus a trailing newline.
void write_json(const std::filesystem::path& path, const ojson& j);
ojson read_json(const std::filesystem::path& path);

}  // namespace synthctl
