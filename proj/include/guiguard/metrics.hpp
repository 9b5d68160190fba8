#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "guiguard/matcher.hpp"
#include "guiguard/model.hpp"

namespace guiguard::metrics {

// Undefined ratios (empty denominators) are std::nullopt, never 0.
using Ratio = std::optional<double>;

struct ScreenshotEval {
  std::string trajectory_id;
  int step = 0;
  Platform platform = Platform::kAndroid;
  std::vector<PrivacyElement> gt;
  std::vector<PrivacyElement> pred;  // risky predictions only
  MatchSet matches;
};

enum class LabelDimension { kRisk, kCategory, kNecessity };

// Throws Error{kEmptyInput} for empty or misaligned input.
double binary_detection_accuracy(const std::vector<bool>& truth, const std::vector<bool>& pred);

// Pooled TP / (TP + FN). Throws Error{kNoGroundTruth}.
double element_recall(std::span<const MatchSet> match_sets);

// Over matched pairs only. Throws Error{kNoMatches}.
double label_accuracy(std::span<const ScreenshotEval> evals, LabelDimension dimension);

// Fraction of gt elements matched with all three labels correct.
// Throws Error{kNoGroundTruth}.
double overall_score(std::span<const ScreenshotEval> evals);

// ratings[i][j]: raters assigning item i to category j. Every row sums to
// `raters`. Throws Error{kInvalidArgument}.
double fleiss_kappa(const std::vector<std::vector<int>>& ratings, int raters);

struct Counts {
  long screenshots = 0;
  long gt_total = 0;
  long matched = 0;  // TP
  long fn = 0;
  long pred_total = 0;
  long failed_screenshots = 0;
};

struct ScreenshotRow {
  std::string trajectory_id;
  int step = 0;
  Platform platform = Platform::kAndroid;
  int gt = 0;
  int pred = 0;
  int matched = 0;
  int fully_correct = 0;
  Ratio precision;  // advisory only
};

struct MetricsReport {
  Ratio binary_accuracy;
  Ratio recall;
  Ratio acc_risk;
  Ratio acc_category;
  Ratio acc_necessity;
  Ratio overall;
  Counts counts;
  std::vector<ScreenshotRow> per_screenshot;
};

// Computes every metric, mapping empty denominators to nullopt.
MetricsReport compute_report(std::span<const ScreenshotEval> evals);

struct FidelityRecord {
  std::string model;
  std::string method;
  Platform platform = Platform::kAndroid;
  std::string task;
  int step = 0;
  double score = 0.0;
};

struct FidelityTable {
  std::vector<std::string> models;   // first-seen order
  std::vector<std::string> methods;  // first-seen order
  std::map<std::string, std::map<std::string, double>> cells;  // model -> method -> mean
  std::map<std::string, std::map<std::string, long>> cell_counts;
  std::map<std::string, double> method_means;    // unweighted over models
  std::map<std::string, std::map<std::string, double>> platform_means;  // model -> platform
  std::map<std::string, double> model_overall;   // unweighted over method cells
  std::map<std::string, double> platform_overall;  // platform -> mean over records
};

// Throws Error{kEmptyLog} or Error{kInvalidArgument} (score outside [0,4]).
FidelityTable fidelity_aggregate(std::span<const FidelityRecord> records);

}  // namespace guiguard::metrics
