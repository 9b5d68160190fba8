#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace guiguard {

inline constexpr int kGridMax = 1000;

// Axis-aligned box on the 0-1000 normalized grid, origin top-left.
struct BoundingBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  std::int64_t area() const {
    return static_cast<std::int64_t>(x2 - x1) * static_cast<std::int64_t>(y2 - y1);
  }
  bool valid() const {
    return 0 <= x1 && x1 < x2 && x2 <= kGridMax && 0 <= y1 && y1 < y2 && y2 <= kGridMax;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

enum class RiskLevel { kHigh, kMedium, kLow, kNone };

struct ConfidenceRange {
  int lo;
  int hi;
  friend bool operator==(const ConfidenceRange&, const ConfidenceRange&) = default;
};

// High 80-100, Medium 40-80, Low 0-40, None 0.
constexpr ConfidenceRange confidence_range(RiskLevel r) {
  switch (r) {
    case RiskLevel::kHigh: return {80, 100};
    case RiskLevel::kMedium: return {40, 80};
    case RiskLevel::kLow: return {0, 40};
    case RiskLevel::kNone: return {0, 0};
  }
  return {0, 0};
}

inline constexpr std::array<RiskLevel, 3> kRiskyLevels = {
    RiskLevel::kHigh, RiskLevel::kMedium, RiskLevel::kLow};

std::string_view risk_name(RiskLevel r);  // "high", "medium", "low", "none"
std::optional<RiskLevel> parse_risk(std::string_view s);  // case-insensitive

// GDPR-derived taxonomy. `kUnresolved` is only produced by the decomposed
// recognition pipeline when a stage drops an item; datasets never carry it.
enum class PrivacyCategory : int {
  kUnresolved = 0,
  kCoreIdentity = 1,
  kContactFinancial = 2,
  kTechnicalDevice = 3,
  kBehaviorContext = 4,
  kSensitiveSpecial = 5,
  kInferencesProfiling = 6,
};

constexpr int category_index(PrivacyCategory c) { return static_cast<int>(c); }
std::optional<PrivacyCategory> category_from_index(int index);  // 1..6 only
std::string_view category_name(PrivacyCategory c);

enum class Necessity { kNecessary, kNotNecessary };

std::string_view necessity_name(Necessity n);  // "necessary" / "not_necessary"
std::optional<Necessity> parse_necessity(std::string_view s);

struct PrivacyElement {
  std::string text;
  BoundingBox bbox;
  RiskLevel risk = RiskLevel::kNone;
  std::optional<PrivacyCategory> category;
  Necessity necessity = Necessity::kNotNecessary;

  bool risky() const { return risk != RiskLevel::kNone; }
  friend bool operator==(const PrivacyElement&, const PrivacyElement&) = default;
};

// Empty string when valid, otherwise a description of the first violated
// invariant.
std::string validate_element(const PrivacyElement& e);

enum class Platform { kAndroid, kPC };

std::string_view platform_name(Platform p);  // "Android" / "PC"
std::optional<Platform> parse_platform(std::string_view s);

struct Step {
  int index = 0;
  std::string image;  // file name relative to the trajectory directory
  std::string agent_response;
  std::vector<PrivacyElement> elements;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::string id;
  std::string goal;
  Platform platform = Platform::kAndroid;
  std::vector<Step> steps;
  // Directory the manifest was loaded from; not part of structural equality.
  std::filesystem::path root;

  std::filesystem::path image_path(const Step& s) const { return root / s.image; }

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.id == b.id && a.goal == b.goal && a.platform == b.platform && a.steps == b.steps;
  }
};

using Dataset = std::vector<Trajectory>;

}  // namespace guiguard
