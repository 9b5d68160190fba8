#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "guiguard/harness.hpp"

namespace guiguard::report {

inline constexpr const char* kRecognitionJson = "recognition_report.json";
inline constexpr const char* kRecognitionText = "recognition_summary.txt";
inline constexpr const char* kFidelityJson = "fidelity_report.json";
inline constexpr const char* kFidelityText = "fidelity_table.txt";
inline constexpr const char* kSweepJson = "graded_sweep.json";
inline constexpr const char* kSweepText = "graded_sweep.txt";

nlohmann::json metrics_to_json(const metrics::MetricsReport& r);
nlohmann::json recognition_to_json(const RecognitionRun& run, const RunConfig& config);
nlohmann::json fidelity_to_json(const FidelityRun& run, const RunConfig& config);
nlohmann::json sweep_to_json(const SweepRun& run, const RunConfig& config);

// Text tables are rendered from the JSON alone so `report --in` can
// reproduce them. Undefined values print as "n/a".
std::string render_text(const nlohmann::json& report);

// Writes "<json>, <txt>" into `dir`; returns both paths. Throws Error{kIoFailure}.
std::vector<std::filesystem::path> emit(const nlohmann::json& report,
                                        const std::filesystem::path& dir);

// Re-renders every known report JSON found in `dir`; returns the text files.
std::vector<std::filesystem::path> rerender(const std::filesystem::path& dir);

// Stable JSON text (sorted keys, 2-space indent, trailing newline).
std::string dump(const nlohmann::json& j);

}  // namespace guiguard::report
