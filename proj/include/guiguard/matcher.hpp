#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "guiguard/model.hpp"

namespace guiguard {

enum class CoverageMode {
  kMembership,  // position i of the reference counts iff its char occurs in the other
  kMultiset,    // each char of the other string can be consumed once
};

struct MatchConfig {
  double tau_text = 0.9;
  double tau_iou = 0.7;
  bool case_fold = false;
  CoverageMode coverage = CoverageMode::kMembership;

  // Throws Error{kInvalidArgument} unless both thresholds are in (0, 1].
  void validate() const;
};

struct MatchPair {
  int gt_index = 0;
  int pred_index = 0;
  double iou = 0.0;
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchSet {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;

  int gt_total() const { return static_cast<int>(pairs.size() + unmatched_gt.size()); }
};

// Fraction of reference characters found in `other`. Throws Error{kEmptyText}
// when the reference is empty after normalization.
double coverage_ratio(std::string_view reference, std::string_view other,
                      const MatchConfig& config = {});

bool text_match(std::string_view gt_text, std::string_view pred_text,
                const MatchConfig& config = {});

// Exact integer areas, divided once.
double iou(const BoundingBox& a, const BoundingBox& b);
bool iou_match(const BoundingBox& a, const BoundingBox& b, const MatchConfig& config = {});

// One-to-one assignment over pairs passing text_match and iou_match.
// Candidates are visited in descending IoU (ties: lower gt, then lower pred);
// a candidate is accepted only if the accepted set still extends to a
// maximum-cardinality matching.
MatchSet assign_matches(std::span<const PrivacyElement> gt, std::span<const PrivacyElement> pred,
                        const MatchConfig& config = {});

}  // namespace guiguard
