#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "guiguard/image.hpp"
#include "guiguard/model.hpp"
#include "guiguard/pseudonym.hpp"

namespace guiguard {

enum class ProtectionScope { kHighOnly, kMediumAndHigh, kFullRisk, kFullRiskExceptNecessary };
enum class Operator { kBlackMask, kMosaic, kRandomBlocks, kTextReplace };

std::string_view scope_name(ProtectionScope s);  // "high_only", ...
std::optional<ProtectionScope> parse_scope(std::string_view s);
std::string_view operator_name(Operator op);  // "black_mask", ...
std::optional<Operator> parse_operator(std::string_view s);

inline constexpr std::array<ProtectionScope, 4> kAllScopes = {
    ProtectionScope::kHighOnly, ProtectionScope::kMediumAndHigh, ProtectionScope::kFullRisk,
    ProtectionScope::kFullRiskExceptNecessary};
inline constexpr std::array<Operator, 4> kAllOperators = {
    Operator::kBlackMask, Operator::kMosaic, Operator::kRandomBlocks, Operator::kTextReplace};

enum class MaskColorMode { kAdaptive, kBlack };

struct BlackMaskParams {
  MaskColorMode color = MaskColorMode::kAdaptive;
  bool draw_marker = false;
  std::string marker = "[REDACTED]";
};

struct MosaicParams {
  int block_px = 12;
};

struct RandomBlocksParams {
  double cover_fraction = 0.6;
  int square_px = 0;  // 0: max(8, region_height / 3)
};

struct TextReplaceParams {
  int min_font_px = 6;
  double fill_ratio = 0.7;  // target glyph height relative to the box height
};

struct ProtectionPolicy {
  std::string name;
  ProtectionScope scope = ProtectionScope::kFullRisk;
  Operator op = Operator::kBlackMask;
  BlackMaskParams black_mask;
  MosaicParams mosaic;
  RandomBlocksParams random_blocks;
  TextReplaceParams text_replace;
  std::uint64_t seed = 0;
};

// Throws Error{kInvalidArgument} naming the bad field.
ProtectionPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json policy_to_json(const ProtectionPolicy& p);

struct RegionRecord {
  PrivacyElement element;
  PixelRect pixels;
  Operator op = Operator::kBlackMask;
  std::optional<std::string> pseudonym;
  std::optional<std::string> rendered;  // drawn text, possibly truncated
};

struct ProtectionReport {
  std::string policy_name;
  ProtectionScope scope = ProtectionScope::kFullRisk;
  Operator op = Operator::kBlackMask;
  std::uint64_t seed = 0;
  std::vector<RegionRecord> regions;
  std::array<long, 3> selected_by_risk{};  // High, Medium, Low
  std::array<long, 3> risky_by_risk{};
  long risky_total = 0;

  // (selected of risk r) / (all risky elements); nullopt without risky elements.
  std::optional<double> masked_fraction(RiskLevel r) const;
  // (selected of risk r) / (elements of risk r); nullopt when the class is empty.
  std::optional<double> class_coverage(RiskLevel r) const;
};

nlohmann::json report_to_json(const ProtectionReport& r);

struct Protected {
  Image image;
  ProtectionReport report;
};

std::vector<PrivacyElement> select_regions(std::span<const PrivacyElement> elements,
                                           ProtectionScope scope);

// The colour the black-mask operator will paint for these regions.
Rgb mask_color(const Image& image, std::span<const PixelRect> rects, const BlackMaskParams& params);

// Pixel footprint of the marker drawn inside `rect`, empty if it does not fit.
std::vector<std::pair<int, int>> marker_pixels(const Image& image, const PixelRect& rect,
                                               const BlackMaskParams& params, Rgb mask);

Image apply_black_mask(const Image& image, std::span<const BoundingBox> regions,
                       const BlackMaskParams& params = {});
// Throws Error{kInvalidArgument} when block_px < 2.
Image apply_mosaic(const Image& image, std::span<const BoundingBox> regions, int block_px);
// Throws Error{kInvalidArgument} unless cover_fraction is in (0, 1].
Image apply_random_blocks(const Image& image, std::span<const BoundingBox> regions,
                          std::uint64_t seed, const RandomBlocksParams& params = {});

Protected replace_text(const Image& image, std::span<const PrivacyElement> elements,
                       ReplacementMemory& memory, const TextReplaceParams& params = {});

// select_regions followed by the policy's operator. `memory` is required
// for kTextReplace. Throws Error{kInvalidArgument} otherwise.
Protected protect(const Image& image, std::span<const PrivacyElement> elements,
                  const ProtectionPolicy& policy, ReplacementMemory* memory);

// Slot for generative image replacement; no backend is bundled.
class ImageReplacer {
 public:
  virtual ~ImageReplacer() = default;
  virtual Image replace(const Image& image, std::span<const PrivacyElement> elements) = 0;
};

class UnavailableImageReplacer final : public ImageReplacer {
 public:
  Image replace(const Image& image, std::span<const PrivacyElement> elements) override;
};

}  // namespace guiguard
