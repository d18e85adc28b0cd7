#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "ietkit/core.hpp"
#include "ietkit/scenario.hpp"

namespace iet {

// Array files are plain CSV: optional "# key=value" metadata comments
// (label, day, repeat), an optional col_1..col_N header, then one line per
// row.  Parse failures report the 1-based line number.
IetArray read_array_csv(const std::filesystem::path& path);
void write_array_csv(const std::filesystem::path& path, const IetArray& array);

// Scenario and threshold-table documents are JSON with a closed field set:
// unknown names and missing names are both hard errors.
ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec read_scenario(const std::filesystem::path& path);
void write_scenario(const std::filesystem::path& path, const ScenarioSpec& spec);

ThresholdTable threshold_table_from_json(const nlohmann::json& j);
nlohmann::json threshold_table_to_json(const ThresholdTable& table);
ThresholdTable read_threshold_table(const std::filesystem::path& path);
void write_threshold_table(const std::filesystem::path& path,
                           const ThresholdTable& table);

// Writes "<prefix>_scatter.txt" (index,value over the vectorized array) and
// "<prefix>_polygon.txt" (value,relative frequency of the filtered values;
// empty when the filter removes everything).
void emit_plot_data(const IetArray& array, double filtration_level,
                    const std::filesystem::path& out_prefix);

// Stable content hash of a scenario document, for run manifests.
std::uint64_t scenario_fingerprint(const ScenarioSpec& spec);

// Process exit codes the command line tool promises: 0 clean, 2 hypervisor,
// 3 measure again, 4 hiding suspected.
int verdict_exit_code(VerdictKind kind);

} // namespace iet
