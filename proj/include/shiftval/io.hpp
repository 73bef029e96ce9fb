#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "shiftval/calibration.hpp"
#include "shiftval/diagnostics.hpp"
#include "shiftval/estimators.hpp"
#include "shiftval/montecarlo.hpp"
#include "shiftval/simulation.hpp"

namespace shiftval {

using Json = nlohmann::json;

inline constexpr const char* kFormatVersion = "1.0";

// Hex SHA-256 of the compact dump (object keys are sorted, so equal configs
// hash equally regardless of key order in the source file).
std::string config_hash(const Json& config);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Dataset CSV: header x_1..x_p,a,y,s; missing a / y are empty fields; numbers
// use 17 significant digits so values round-trip exactly.
std::string dataset_to_csv(const PooledDataset& data);
PooledDataset dataset_from_csv(const std::string& text,
                               std::optional<DatasetKind> kind = std::nullopt);
void write_dataset_csv(const PooledDataset& data, const std::filesystem::path& path);
PooledDataset read_dataset_csv(const std::filesystem::path& path,
                               std::optional<DatasetKind> kind = std::nullopt);

// Missing keys keep their defaults; unknown keys are rejected.
SimulationConfig simulation_config_from_json(const Json& j);
Json to_json(const SimulationConfig& config);

// {"type": "linear", "intercept": b, "coeffs": [...]} or {"type": "constant", "action": +-1}.
Policy policy_from_json(const Json& j);
Json to_json(const Policy& policy);

CandidateSet candidates_from_json(const Json& j);

// Nuisance recipe for p covariates; oracle parts are attached by the caller.
FitRecipe recipe_from_json(const Json& j, std::size_t p);
Json to_json(const FitRecipe& recipe);

McConfig mc_config_from_json(const Json& j);

Json to_json(const WeightFitInfo& info);
Json to_json(const NewtonInfo& info);
Json to_json(const EstimateReport& report);
Json to_json(const Selection& selection, CalibrationMethod method);
Json to_json(const PositivityReport& report);
Json to_json(const McSummary& summary);
std::string mc_summary_csv(const McSummary& summary);

}  // namespace shiftval
