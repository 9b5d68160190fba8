#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guiguard/model.hpp"

namespace guiguard::protocol {

enum class RecognitionMode {
  kJoint,
  kDecomposedExtract,   // stage 1: text extraction and grounding
  kDecomposedRisk,      // stage 2: risk level per extracted item
  kDecomposedCategory,  // stage 3: category + necessity for risky items
};

// An item threaded between decomposed stages. `risk` is set once stage 2 ran.
struct StageItem {
  std::string text;
  BoundingBox bbox;
  std::optional<RiskLevel> risk;
};

std::string build_recognition_prompt(std::string_view goal, std::string_view response,
                                     RecognitionMode mode,
                                     std::span<const StageItem> items = {});

struct ParseError {
  int line_number = 0;  // 1-based
  std::string raw_line;
  std::string reason;
};

struct StageInconsistency {
  std::string text;
  std::string reason;
};

struct RecognitionOutput {
  std::vector<PrivacyElement> elements;   // risk != none
  std::vector<PrivacyElement> none_items; // reported with risk "none"
  std::vector<ParseError> parse_errors;
  std::vector<StageInconsistency> inconsistencies;
};

// Total: never throws. Each non-blank, non-heading line becomes exactly one
// element, none-item, or parse error.
RecognitionOutput parse_recognition_output(std::string_view text);

// Stage parsers for the decomposed pipeline.
struct ExtractOutput {
  std::vector<StageItem> items;
  std::vector<ParseError> parse_errors;
};
ExtractOutput parse_extraction_output(std::string_view text);

struct IndexedRisk {
  int item = 0;  // 1-based index into the stage-2 item list
  RiskLevel risk = RiskLevel::kNone;
};
struct RiskOutput {
  std::vector<IndexedRisk> risks;
  std::vector<ParseError> parse_errors;
};
RiskOutput parse_risk_output(std::string_view text);

struct IndexedLabel {
  int item = 0;
  PrivacyCategory category = PrivacyCategory::kCoreIdentity;
  Necessity necessity = Necessity::kNotNecessary;
};
struct CategoryOutput {
  std::vector<IndexedLabel> labels;
  std::vector<ParseError> parse_errors;
};
CategoryOutput parse_category_output(std::string_view text);

// Replacements made while formatting ("|" in text becomes "/").
using SanitizationLog = std::vector<std::string>;

std::string format_element(const PrivacyElement& e, SanitizationLog* log = nullptr);
std::string format_elements(std::span<const PrivacyElement> elements,
                            SanitizationLog* log = nullptr);
std::string format_bbox_json(const BoundingBox& b);

struct JudgeVerdict {
  int score = 0;
  std::string rationale;
};

// Throws Error{kEmptyPlan} when either plan is blank.
std::string build_judge_prompt(std::string_view task_goal, std::string_view baseline_plan,
                               std::string_view protected_plan);

// Last "SCORE: <n>" wins; n must be 0..4. Throws Error{kUnparseableVerdict}.
JudgeVerdict parse_judge_score(std::string_view text);

}  // namespace guiguard::protocol
