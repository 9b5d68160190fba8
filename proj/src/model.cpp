#include "guiguard/model.hpp"

#include "guiguard/text.hpp"

namespace guiguard {

std::string_view risk_name(RiskLevel r) {
  switch (r) {
    case RiskLevel::kHigh: return "high";
    case RiskLevel::kMedium: return "medium";
    case RiskLevel::kLow: return "low";
    case RiskLevel::kNone: return "none";
  }
  return "none";
}

std::optional<RiskLevel> parse_risk(std::string_view s) {
  const std::string v = text::to_lower_ascii(text::trim(s));
  if (v == "high") return RiskLevel::kHigh;
  if (v == "medium") return RiskLevel::kMedium;
  if (v == "low") return RiskLevel::kLow;
  if (v == "none") return RiskLevel::kNone;
  return std::nullopt;
}

std::optional<PrivacyCategory> category_from_index(int index) {
  if (index < 1 || index > 6) return std::nullopt;
  return static_cast<PrivacyCategory>(index);
}

std::string_view category_name(PrivacyCategory c) {
  switch (c) {
    case PrivacyCategory::kUnresolved: return "Unresolved";
    case PrivacyCategory::kCoreIdentity: return "Core Identity Identifiers";
    case PrivacyCategory::kContactFinancial: return "Contact & Financial";
    case PrivacyCategory::kTechnicalDevice: return "Technical & Device Identifiers";
    case PrivacyCategory::kBehaviorContext: return "Behavior & Context Traces";
    case PrivacyCategory::kSensitiveSpecial: return "Sensitive Special Categories";
    case PrivacyCategory::kInferencesProfiling: return "Inferences & Profiling";
  }
  return "Unresolved";
}

std::string_view necessity_name(Necessity n) {
  return n == Necessity::kNecessary ? "necessary" : "not_necessary";
}

std::optional<Necessity> parse_necessity(std::string_view s) {
  const std::string v = text::to_lower_ascii(text::trim(s));
  if (v == "necessary") return Necessity::kNecessary;
  if (v == "not_necessary" || v == "not necessary" || v == "not-necessary" ||
      v == "unnecessary") {
    return Necessity::kNotNecessary;
  }
  return std::nullopt;
}

std::string_view platform_name(Platform p) { return p == Platform::kAndroid ? "Android" : "PC"; }

std::optional<Platform> parse_platform(std::string_view s) {
  const std::string v = text::to_lower_ascii(text::trim(s));
  if (v == "android") return Platform::kAndroid;
  if (v == "pc") return Platform::kPC;
  return std::nullopt;
}

std::string validate_element(const PrivacyElement& e) {
  if (text::normalize(e.text).empty()) return "text is empty after whitespace normalization";
  if (!e.bbox.valid()) return "bbox violates 0 <= x1 < x2 <= 1000, 0 <= y1 < y2 <= 1000";
  if (e.risky() && !e.category) return "category is required when risk is not none";
  if (!e.risky() && e.category) return "category must be absent when risk is none";
  return {};
}

}  // namespace guiguard
