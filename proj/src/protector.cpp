#include "guiguard/protector.hpp"

#include <algorithm>
#include <random>
#include <unordered_map>

#include <opencv2/imgproc.hpp>

#include "guiguard/error.hpp"

namespace guiguard {
namespace {

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;

std::vector<PixelRect> to_rects(const Image& image, std::span<const BoundingBox> regions) {
  std::vector<PixelRect> rects;
  rects.reserve(regions.size());
  for (const auto& b : regions) rects.push_back(to_pixels(b, image.width(), image.height()));
  return rects;
}

std::vector<char> union_mask(const Image& image, std::span<const PixelRect> rects) {
  std::vector<char> mask(static_cast<std::size_t>(image.width()) * image.height(), 0);
  for (const auto& r : rects) {
    for (int y = r.y0; y < r.y1; ++y) {
      std::fill_n(mask.begin() + static_cast<long>(y) * image.width() + r.x0, r.width(), 1);
    }
  }
  return mask;
}

void fill_rect(Image& image, const PixelRect& r, Rgb color) {
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) image.set(x, y, color);
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rgb contrasting(Rgb c) { return luminance(c) > 128.0 ? kBlack : kWhite; }

struct TextFit {
  std::string text;
  double scale = 0.0;
  int thickness = 1;
};

cv::Size text_size(const std::string& s, double scale, int thickness) {
  int baseline = 0;
  return cv::getTextSize(s, kFont, scale, thickness, &baseline);
}

// Largest scale whose glyphs fit `width` x `target_height`; below
// `min_height` the text is cut and suffixed with "...".
std::optional<TextFit> fit_text(const std::string& s, int width, int height, double fill_ratio,
                                int min_height) {
  if (s.empty() || width <= 0 || height <= 0) return std::nullopt;
  const double unit_h = text_size(s, 1.0, 1).height;
  const double target_h = std::max(1.0, fill_ratio * height);
  TextFit fit{s, target_h / unit_h, 1};
  const double max_w = 0.95 * width;
  const double w = text_size(s, fit.scale, 1).width;
  if (w > max_w) fit.scale *= max_w / w;
  if (fit.scale * unit_h >= min_height) return fit;

  fit.scale = min_height / unit_h;
  if (min_height > height) return std::nullopt;
  for (std::size_t keep = s.size(); keep-- > 0;) {
    fit.text = s.substr(0, keep) + "...";
    if (text_size(fit.text, fit.scale, 1).width <= max_w) return fit;
  }
  return std::nullopt;
}

// Single-channel glyph coverage, text centred in a w x h canvas.
cv::Mat render_glyphs(int w, int h, const TextFit& fit) {
  cv::Mat mask = cv::Mat::zeros(h, w, CV_8UC1);
  int baseline = 0;
  const cv::Size sz = cv::getTextSize(fit.text, kFont, fit.scale, fit.thickness, &baseline);
  const cv::Point origin((w - sz.width) / 2, (h + sz.height) / 2);
  cv::putText(mask, fit.text, origin, kFont, fit.scale, cv::Scalar(255), fit.thickness, cv::LINE_8);
  return mask;
}

void paint_glyphs(Image& image, const PixelRect& r, const cv::Mat& glyphs, Rgb color) {
  for (int y = 0; y < glyphs.rows; ++y) {
    const auto* row = glyphs.ptr<std::uint8_t>(y);
    for (int x = 0; x < glyphs.cols; ++x) {
      if (row[x]) image.set(r.x0 + x, r.y0 + y, color);
    }
  }
}

std::optional<TextFit> marker_fit(const PixelRect& r, const BlackMaskParams& params) {
  if (!params.draw_marker || params.marker.empty()) return std::nullopt;
  auto fit = fit_text(params.marker, r.width(), r.height(), 0.6, 6);
  if (fit && fit->text != params.marker) return std::nullopt;  // never truncate the marker
  return fit;
}

Rgb border_mode(const Image& image, const PixelRect& r) {
  std::unordered_map<std::uint32_t, long> counts;
  auto add = [&](int x, int y) {
    const Rgb c = image.at(x, y);
    ++counts[(static_cast<std::uint32_t>(c.r) << 16) | (c.g << 8) | c.b];
  };
  const bool top = r.y0 > 0, bottom = r.y1 < image.height();
  const bool left = r.x0 > 0, right = r.x1 < image.width();
  for (int x = std::max(0, r.x0 - 1); x < std::min(image.width(), r.x1 + 1); ++x) {
    if (top) add(x, r.y0 - 1);
    if (bottom) add(x, r.y1);
  }
  for (int y = r.y0; y < r.y1; ++y) {
    if (left) add(r.x0 - 1, y);
    if (right) add(r.x1, y);
  }
  if (counts.empty()) {
    // The box spans the whole image: use its own outermost pixels.
    for (int x = r.x0; x < r.x1; ++x) {
      add(x, r.y0);
      add(x, r.y1 - 1);
    }
  }
  std::uint32_t best = 0;
  long best_n = -1;
  for (const auto& [key, n] : counts) {
    if (n > best_n || (n == best_n && key < best)) {
      best = key;
      best_n = n;
    }
  }
  return {static_cast<std::uint8_t>(best >> 16), static_cast<std::uint8_t>((best >> 8) & 255),
          static_cast<std::uint8_t>(best & 255)};
}

}  // namespace

std::string_view scope_name(ProtectionScope s) {
  switch (s) {
    case ProtectionScope::kHighOnly: return "high_only";
    case ProtectionScope::kMediumAndHigh: return "medium_and_high";
    case ProtectionScope::kFullRisk: return "full_risk";
    case ProtectionScope::kFullRiskExceptNecessary: return "full_risk_except_necessary";
  }
  return "full_risk";
}

std::optional<ProtectionScope> parse_scope(std::string_view s) {
  for (auto scope : kAllScopes) {
    if (scope_name(scope) == s) return scope;
  }
  return std::nullopt;
}

std::string_view operator_name(Operator op) {
  switch (op) {
    case Operator::kBlackMask: return "black_mask";
    case Operator::kMosaic: return "mosaic";
    case Operator::kRandomBlocks: return "random_blocks";
    case Operator::kTextReplace: return "text_replace";
  }
  return "black_mask";
}

std::optional<Operator> parse_operator(std::string_view s) {
  for (auto op : kAllOperators) {
    if (operator_name(op) == s) return op;
  }
  return std::nullopt;
}

std::optional<double> ProtectionReport::masked_fraction(RiskLevel r) const {
  if (r == RiskLevel::kNone || risky_total == 0) return std::nullopt;
  return static_cast<double>(selected_by_risk[static_cast<int>(r)]) / risky_total;
}

std::optional<double> ProtectionReport::class_coverage(RiskLevel r) const {
  if (r == RiskLevel::kNone) return std::nullopt;
  const long n = risky_by_risk[static_cast<int>(r)];
  if (n == 0) return std::nullopt;
  return static_cast<double>(selected_by_risk[static_cast<int>(r)]) / n;
}

std::vector<PrivacyElement> select_regions(std::span<const PrivacyElement> elements,
                                           ProtectionScope scope) {
  std::vector<PrivacyElement> out;
  for (const auto& e : elements) {
    bool keep = false;
    switch (scope) {
      case ProtectionScope::kHighOnly:
        keep = e.risk == RiskLevel::kHigh;
        break;
      case ProtectionScope::kMediumAndHigh:
        keep = e.risk == RiskLevel::kHigh || e.risk == RiskLevel::kMedium;
        break;
      case ProtectionScope::kFullRisk:
        keep = e.risky();
        break;
      case ProtectionScope::kFullRiskExceptNecessary:
        keep = e.risky() && e.necessity != Necessity::kNecessary;
        break;
    }
    if (keep) out.push_back(e);
  }
  return out;
}

Rgb mask_color(const Image& image, std::span<const PixelRect> rects, const BlackMaskParams& params) {
  if (params.color == MaskColorMode::kBlack || rects.empty()) return kBlack;
  const auto inside = union_mask(image, rects);
  std::vector<char> counted(inside.size(), 0);
  double sum = 0.0;
  long n = 0;
  for (const auto& r : rects) {
    const int x0 = std::max(0, r.x0 - 1), x1 = std::min(image.width(), r.x1 + 1);
    const int y0 = std::max(0, r.y0 - 1), y1 = std::min(image.height(), r.y1 + 1);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * image.width() + x;
        if (inside[i] || counted[i]) continue;
        counted[i] = 1;
        sum += luminance(image.at(x, y));
        ++n;
      }
    }
  }
  if (n == 0) return kBlack;
  return sum / n > 128.0 ? kBlack : kWhite;
}

std::vector<std::pair<int, int>> marker_pixels(const Image& image, const PixelRect& rect,
                                               const BlackMaskParams& params, Rgb) {
  std::vector<std::pair<int, int>> out;
  (void)image;
  auto fit = marker_fit(rect, params);
  if (!fit) return out;
  const cv::Mat glyphs = render_glyphs(rect.width(), rect.height(), *fit);
  for (int y = 0; y < glyphs.rows; ++y) {
    for (int x = 0; x < glyphs.cols; ++x) {
      if (glyphs.at<std::uint8_t>(y, x)) out.emplace_back(rect.x0 + x, rect.y0 + y);
    }
  }
  return out;
}

Image apply_black_mask(const Image& image, std::span<const BoundingBox> regions,
                       const BlackMaskParams& params) {
  Image out = image;
  if (regions.empty()) return out;
  const auto rects = to_rects(image, regions);
  const Rgb color = mask_color(image, rects, params);
  for (const auto& r : rects) fill_rect(out, r, color);
  for (const auto& r : rects) {
    if (auto fit = marker_fit(r, params)) {
      paint_glyphs(out, r, render_glyphs(r.width(), r.height(), *fit), contrasting(color));
    }
  }
  return out;
}

Image apply_mosaic(const Image& image, std::span<const BoundingBox> regions, int block_px) {
  if (block_px < 2) throw Error(ErrorCode::kInvalidArgument, "mosaic block_px must be >= 2");
  Image out = image;
  for (const auto& r : to_rects(image, regions)) {
    for (int cy = r.y0; cy < r.y1; cy += block_px) {
      for (int cx = r.x0; cx < r.x1; cx += block_px) {
        const PixelRect cell{cx, cy, std::min(cx + block_px, r.x1), std::min(cy + block_px, r.y1)};
        long sr = 0, sg = 0, sb = 0;
        for (int y = cell.y0; y < cell.y1; ++y) {
          for (int x = cell.x0; x < cell.x1; ++x) {
            const Rgb c = out.at(x, y);
            sr += c.r;
            sg += c.g;
            sb += c.b;
          }
        }
        const long n = cell.area();
        const Rgb mean{static_cast<std::uint8_t>((sr + n / 2) / n),
                       static_cast<std::uint8_t>((sg + n / 2) / n),
                       static_cast<std::uint8_t>((sb + n / 2) / n)};
        fill_rect(out, cell, mean);
      }
    }
  }
  return out;
}

Image apply_random_blocks(const Image& image, std::span<const BoundingBox> regions,
                          std::uint64_t seed, const RandomBlocksParams& params) {
  if (!(params.cover_fraction > 0.0 && params.cover_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "random_blocks cover_fraction must be in (0, 1]");
  }
  if (params.square_px < 0) throw Error(ErrorCode::kInvalidArgument, "square_px must be >= 0");
  Image out = image;
  const auto rects = to_rects(image, regions);
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const PixelRect& r = rects[i];
    const int side = params.square_px > 0 ? params.square_px : std::max(8, r.height() / 3);
    std::vector<PixelRect> tiles;
    for (int y = r.y0; y < r.y1; y += side) {
      for (int x = r.x0; x < r.x1; x += side) {
        tiles.push_back({x, y, std::min(x + side, r.x1), std::min(y + side, r.y1)});
      }
    }
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(i)));
    for (std::size_t k = tiles.size(); k > 1; --k) {
      std::swap(tiles[k - 1], tiles[static_cast<std::size_t>(rng() % k)]);
    }
    const double needed = params.cover_fraction * static_cast<double>(r.area());
    long masked = 0;
    for (const auto& t : tiles) {
      if (static_cast<double>(masked) >= needed) break;
      fill_rect(out, t, kBlack);
      masked += t.area();
    }
  }
  return out;
}

Protected replace_text(const Image& image, std::span<const PrivacyElement> elements,
                       ReplacementMemory& memory, const TextReplaceParams& params) {
  Protected result{image, {}};
  result.report.op = Operator::kTextReplace;
  for (const auto& e : elements) {
    const PixelRect r = to_pixels(e.bbox, image.width(), image.height());
    const Rgb background = border_mode(result.image, r);
    fill_rect(result.image, r, background);

    RegionRecord rec{e, r, Operator::kTextReplace, memory.get_or_assign(e.text, e.category), {}};
    if (auto fit = fit_text(*rec.pseudonym, r.width(), r.height(), params.fill_ratio,
                            params.min_font_px)) {
      paint_glyphs(result.image, r, render_glyphs(r.width(), r.height(), *fit), contrasting(background));
      rec.rendered = fit->text;
    }
    result.report.regions.push_back(std::move(rec));
  }
  return result;
}

Protected protect(const Image& image, std::span<const PrivacyElement> elements,
                  const ProtectionPolicy& policy, ReplacementMemory* memory) {
  const auto selected = select_regions(elements, policy.scope);

  Protected result;
  if (policy.op == Operator::kTextReplace) {
    if (!memory) throw Error(ErrorCode::kInvalidArgument, "text_replace needs a replacement memory");
    result = replace_text(image, selected, *memory, policy.text_replace);
  } else {
    std::vector<BoundingBox> boxes;
    for (const auto& e : selected) boxes.push_back(e.bbox);
    switch (policy.op) {
      case Operator::kBlackMask:
        result.image = apply_black_mask(image, boxes, policy.black_mask);
        break;
      case Operator::kMosaic:
        result.image = apply_mosaic(image, boxes, policy.mosaic.block_px);
        break;
      case Operator::kRandomBlocks:
        result.image = apply_random_blocks(image, boxes, policy.seed, policy.random_blocks);
        break;
      case Operator::kTextReplace:
        break;
    }
    for (const auto& e : selected) {
      result.report.regions.push_back(
          {e, to_pixels(e.bbox, image.width(), image.height()), policy.op, std::nullopt, std::nullopt});
    }
  }

  ProtectionReport& rep = result.report;
  rep.policy_name = policy.name;
  rep.scope = policy.scope;
  rep.op = policy.op;
  rep.seed = policy.seed;
  for (const auto& e : elements) {
    if (!e.risky()) continue;
    ++rep.risky_total;
    ++rep.risky_by_risk[static_cast<int>(e.risk)];
  }
  for (const auto& e : selected) ++rep.selected_by_risk[static_cast<int>(e.risk)];
  return result;
}

Image UnavailableImageReplacer::replace(const Image&, std::span<const PrivacyElement>) {
  throw Error(ErrorCode::kNotImplemented, "generative image replacement has no backend configured");
}

}  // namespace guiguard

namespace guiguard {
namespace {

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("policy field '") + key + "' has the wrong type");
  }
}

}  // namespace

ProtectionPolicy policy_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "policy must be a JSON object");
  ProtectionPolicy p;
  const auto scope = field<std::string>(j, "scope", "full_risk");
  const auto op = field<std::string>(j, "operator", "black_mask");
  if (auto s = parse_scope(scope)) {
    p.scope = *s;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'scope': unknown value '" + scope + "'");
  }
  if (auto o = parse_operator(op)) {
    p.op = *o;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'operator': unknown value '" + op + "'");
  }
  p.name = field<std::string>(j, "name", std::string(scope) + "/" + op);
  p.seed = field<std::uint64_t>(j, "seed", 0);

  const auto color = field<std::string>(j, "mask_color", "adaptive");
  if (color == "adaptive") {
    p.black_mask.color = MaskColorMode::kAdaptive;
  } else if (color == "black") {
    p.black_mask.color = MaskColorMode::kBlack;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'mask_color': expected adaptive or black");
  }
  p.black_mask.draw_marker = field<bool>(j, "draw_marker", false);
  p.black_mask.marker = field<std::string>(j, "marker", p.black_mask.marker);
  p.mosaic.block_px = field<int>(j, "block_px", p.mosaic.block_px);
  p.random_blocks.cover_fraction = field<double>(j, "cover_fraction", p.random_blocks.cover_fraction);
  p.random_blocks.square_px = field<int>(j, "square_px", p.random_blocks.square_px);
  p.text_replace.min_font_px = field<int>(j, "min_font_px", p.text_replace.min_font_px);
  p.text_replace.fill_ratio = field<double>(j, "fill_ratio", p.text_replace.fill_ratio);

  if (p.mosaic.block_px < 2) throw Error(ErrorCode::kInvalidArgument, "policy field 'block_px' must be >= 2");
  if (!(p.random_blocks.cover_fraction > 0.0 && p.random_blocks.cover_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'cover_fraction' must be in (0, 1]");
  }
  if (p.random_blocks.square_px < 0) {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'square_px' must be >= 0");
  }
  if (p.text_replace.min_font_px < 1) {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'min_font_px' must be >= 1");
  }
  if (!(p.text_replace.fill_ratio > 0.0 && p.text_replace.fill_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "policy field 'fill_ratio' must be in (0, 1]");
  }
  return p;
}

nlohmann::json policy_to_json(const ProtectionPolicy& p) {
  nlohmann::json j = {{"name", p.name},
                      {"scope", scope_name(p.scope)},
                      {"operator", operator_name(p.op)},
                      {"seed", p.seed}};
  switch (p.op) {
    case Operator::kBlackMask:
      j["mask_color"] = p.black_mask.color == MaskColorMode::kBlack ? "black" : "adaptive";
      j["draw_marker"] = p.black_mask.draw_marker;
      if (p.black_mask.draw_marker) j["marker"] = p.black_mask.marker;
      break;
    case Operator::kMosaic:
      j["block_px"] = p.mosaic.block_px;
      break;
    case Operator::kRandomBlocks:
      j["cover_fraction"] = p.random_blocks.cover_fraction;
      j["square_px"] = p.random_blocks.square_px;
      break;
    case Operator::kTextReplace:
      j["min_font_px"] = p.text_replace.min_font_px;
      j["fill_ratio"] = p.text_replace.fill_ratio;
      break;
  }
  return j;
}

nlohmann::json report_to_json(const ProtectionReport& r) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& reg : r.regions) {
    nlohmann::json item = {
        {"text", reg.element.text},
        {"risk", risk_name(reg.element.risk)},
        {"bbox", {{"x1", reg.element.bbox.x1}, {"y1", reg.element.bbox.y1},
                  {"x2", reg.element.bbox.x2}, {"y2", reg.element.bbox.y2}}},
        {"pixels", {{"x0", reg.pixels.x0}, {"y0", reg.pixels.y0},
                    {"x1", reg.pixels.x1}, {"y1", reg.pixels.y1}}},
        {"operator", operator_name(reg.op)}};
    if (reg.pseudonym) item["pseudonym"] = *reg.pseudonym;
    if (reg.rendered) item["rendered"] = *reg.rendered;
    regions.push_back(std::move(item));
  }
  auto opt = [](std::optional<double> v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json fractions = nlohmann::json::object(), coverage = nlohmann::json::object();
  for (auto level : kRiskyLevels) {
    fractions[std::string(risk_name(level))] = opt(r.masked_fraction(level));
    coverage[std::string(risk_name(level))] = opt(r.class_coverage(level));
  }
  return {{"policy", r.policy_name},
          {"scope", scope_name(r.scope)},
          {"operator", operator_name(r.op)},
          {"seed", r.seed},
          {"regions", std::move(regions)},
          {"selected_by_risk", {{"high", r.selected_by_risk[0]},
                                {"medium", r.selected_by_risk[1]},
                                {"low", r.selected_by_risk[2]}}},
          {"risky_total", r.risky_total},
          {"masked_fraction", std::move(fractions)},
          {"class_coverage", std::move(coverage)}};
}

}  // namespace guiguard
