#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "guiguard/matcher.hpp"
#include "guiguard/metrics.hpp"
#include "guiguard/model.hpp"
#include "guiguard/model_client.hpp"
#include "guiguard/protector.hpp"

namespace guiguard {

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  RecognitionStrategy recognition_mode = RecognitionStrategy::kJoint;
  MatchConfig match;
  std::optional<EndpointConfig> recognition;
  std::vector<EndpointConfig> planners;  // one fidelity-table row each
  std::optional<EndpointConfig> judge;
  std::vector<ProtectionPolicy> policies;
  int max_history = 8;
  bool global_memory = false;
  bool write_images = false;
};

// Relative paths are resolved against the config file's directory; policy
// seeds default to the global seed. Throws Error{kConfigError}.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json run_config_to_json(const RunConfig& c);

// The four graded protection modes with one operator.
std::vector<ProtectionPolicy> graded_policies(Operator op, std::uint64_t seed);

// ---- recognition -----------------------------------------------------------

struct RecognitionDetail {
  std::string trajectory_id;
  int step = 0;
  std::vector<std::string> prompt_hashes;
  int parse_errors = 0;
  int none_items = 0;
  int inconsistencies = 0;
  std::optional<std::string> error;  // set when the screenshot was excluded
};

struct RecognitionRun {
  metrics::MetricsReport all;
  std::map<std::string, metrics::MetricsReport> by_platform;
  std::vector<RecognitionDetail> details;
};

RecognitionRun run_recognition_eval(const RunConfig& config, const Dataset& dataset,
                                    const ModelClient& recognizer);
// Loads the dataset and builds the client from `config.recognition`.
RecognitionRun run_recognition_eval(const RunConfig& config);

// ---- planner replay and fidelity -------------------------------------------

struct PlanRecord {
  std::string trajectory_id;
  int step = 0;
  std::string condition;  // "baseline" or a policy name
  std::string plan;
  std::string prompt_hash;  // whole request
  std::string text_hash;    // text parts only
  double latency_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct PlanLog {
  std::string model;
  std::string trajectory_id;
  std::string condition;
  std::vector<PlanRecord> records;
};

inline constexpr const char* kBaselineCondition = "baseline";
inline constexpr const char* kFailedStepMarker = "[step failed]";

struct ReplayOptions {
  int max_history = 8;  // screenshots; oldest dropped first
};

std::string build_planner_prompt(std::string_view goal, int step,
                                 const std::vector<std::string>& history);

// Baseline replay when `protection` is null; history is the planner's own
// prior plans. Protected replay masks the current and historical screenshots
// with the trajectory's annotated elements and takes the plan history from
// `baseline` so the text context stays byte-identical. Throws
// Error{kMissingBaseline} for a protected replay without a baseline.
PlanLog run_planner_replay(const Trajectory& trajectory, const ProtectionPolicy* protection,
                           const ModelClient& planner, const PlanLog* baseline = nullptr,
                           const ReplayOptions& options = {},
                           ReplacementMemory* memory = nullptr);

struct JudgeFailure {
  std::string model;
  std::string method;
  std::string trajectory_id;
  int step = 0;
  std::string reason;
};

struct FidelityRun {
  metrics::FidelityTable table;
  std::vector<metrics::FidelityRecord> records;
  std::map<std::string, std::map<std::string, double>> coverage;  // model -> method
  std::vector<JudgeFailure> failures;
  std::vector<PlanLog> plan_logs;
};

FidelityRun run_fidelity_eval(const RunConfig& config, const Dataset& dataset,
                              const std::vector<std::pair<std::string, ModelClient>>& planners,
                              const ModelClient& judge_client);
FidelityRun run_fidelity_eval(const RunConfig& config);

// ---- graded sweep -----------------------------------------------------------

struct SweepRow {
  ProtectionPolicy policy;
  std::array<long, 3> selected_by_risk{};
  long risky_total = 0;
  long screenshots = 0;

  std::optional<double> fraction(RiskLevel r) const;
  std::optional<double> total_fraction() const;
};

struct SweepRun {
  std::vector<SweepRow> rows;
};

// Throws Error{kEmptyPolicyList}. Writes protected images under
// `config.output_dir/images/<policy>/` when `config.write_images`.
SweepRun run_graded_sweep(const RunConfig& config, const Dataset& dataset);
SweepRun run_graded_sweep(const RunConfig& config);

}  // namespace guiguard
