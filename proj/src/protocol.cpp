#include "guiguard/protocol.hpp"

#include <cmath>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "guiguard/error.hpp"
#include "guiguard/text.hpp"

namespace guiguard::protocol {
namespace {

constexpr const char* kGoalSlot = "{goal}";
constexpr const char* kResponseSlot = "{response}";

constexpr const char* kJointTemplate = R"(Agent's goal and response
goal: {goal}
response: {response}

Role
You are a privacy classifier.

Risk levels
Use exactly these four labels: high, medium, low, none.
high: Information that can directly identify or contact a person.
Includes: name/id, exact address or location, email address, phone number, ID/passport number, IP address, device ID, account ID, user ID, bank card number, password, authentication tokens.
medium: Information that can reasonably infer a person's behavior, preferences, or identity, but does not directly identify them.
Includes: browsing history, search history, call history, chat content, follow/subscribe lists, calendar/schedule, to-do list, shopping cart items, order history, nearby places in location, distance from "home" or "current location", company name, school name, job title, internal project names.
low: Technical or contextual information that only becomes privacy-relevant after analysis or correlation with other data.
Includes: time, device parameters, recommended content, installed applications, generic search queries without clear target, non-specific system messages, references to previously detected private info.
none: Public or generic content that anyone can find on the internet and that does not target a person.
Includes: other people's names/ids, public posts, news headlines, public ads, general desktop/application UI text, fixed icons, slogans, public creator profiles and posts, comments/bullets that are clearly public, generic help texts.

Privacy category
1. Core Identity Identifiers - uniquely identify a person on their own.
   - Examples: real name, national ID/passport/student/employee numbers, account/ID that uniquely maps to a person.
2. Contact & Financial - directly contacts a person or links to funds.
   - Examples: email, phone, home address, bank card, payment account.
3. Technical & Device Identifiers - enable cross-session/device tracking.
   - Examples: installed applications, location, timestamps, verification code, device ID, IMEI, MAC, ad ID, cookie ID, browser fingerprint, IP.
4. Behavior & Context Traces - records stitching actions.
   - Examples: searches history.
5. Sensitive Special Categories - highest priority.
   - Examples: health/medical, religion, political views, union membership, sexual orientation/sex life, biometric/genetic data used for identification.
6. Inferences & Profiling - labels/scores/preferences derived from raw data.
   - Examples: interests/preferences, credit/risk scores, audience segments, similarity scores.

Task
Given a screenshot taken while the Agent is working toward its goal, and the Agent's goal and response above:
1. First, scan the entire screenshot and identify ALL text items and Non-text areas containing private information.
2. Then, for each meaningful item or region, classify its privacy risk level.
3. For items with privacy risk (high, medium, or low), assign one of the six categories below.
4. For each item, decide whether this information is strictly necessary for the Agent to achieve its goal.
"Strictly necessary" means that if this item were fully masked or removed, the Agent would not be able to correctly complete the task.

Output format
For each item with privacy risk, output one line in the following format (do NOT output the format template itself, only the actual data):

[exact text or description] | [risk level] | [category number(Category Name)] | [coordinates JSON] | [necessity]

Where:
- First field: for textual items, the exact visible text from the screenshot (verbatim); for non-text items, a concise description of the visible content (e.g. "face of a person", "bank card image").
- Second field: one of "high", "medium", "low".
- Third field: category number and name (1-6 above) for items with privacy risk (high/medium/low); use "-" for items with risk level "none".
- Fourth field: precise coordinates in normalized coordinates (0-1000 scale), as a JSON object like {"x1":80, "y1":250, "x2":740, "y2":350} where x1,y1 is the top-left corner and x2,y2 is the bottom-right corner. Use a 0-1000 coordinate system where (0,0) is top-left and (1000,1000) is bottom-right.
- Fifth field: "necessary" if the item is strictly required for the Agent to correctly complete its goal; otherwise "not_necessary".

Examples
john.smith@gmail.com | high | 2(Contact & Financial) | {"x1":80, "y1":250, "x2":740, "y2":350} | necessary

Notes
- For textual items, use the exact text from the screenshot (verbatim).
- For non-text items, use a concise, clear description of the visible content.
- If the same item appears multiple times in the screenshot, please identify all of them and do not ignore them.
)";

constexpr const char* kContextHeader = R"(Agent's goal and response
goal: {goal}
response: {response}

)";

constexpr const char* kExtractBody = R"(Role
You are a privacy classifier. This is sub-task 1 of 3: text extraction and grounding.

Task
Scan the entire screenshot and list ALL text items and non-text areas that could contain private information, together with their bounding boxes. Do not assign risk levels or categories yet.

Output format
One line per item (do NOT output the format template itself, only the actual data):

[exact text or description] | [coordinates JSON]

Coordinates use the 0-1000 normalized scale as a JSON object like {"x1":80, "y1":250, "x2":740, "y2":350} where x1,y1 is the top-left corner and x2,y2 is the bottom-right corner.
If the same item appears multiple times in the screenshot, list every occurrence.
)";

constexpr const char* kRiskBody = R"(Role
You are a privacy classifier. This is sub-task 2 of 3: risk-level prediction.

Risk levels
Use exactly these four labels: high, medium, low, none.
high: Information that can directly identify or contact a person.
medium: Information that can reasonably infer a person's behavior, preferences, or identity, but does not directly identify them.
low: Technical or contextual information that only becomes privacy-relevant after analysis or correlation with other data.
none: Public or generic content that anyone can find on the internet and that does not target a person.

Task
For each extracted item below, predict its privacy risk level.

Output format
One line per item:

[item number] | [risk level]

Extracted items
)";

constexpr const char* kCategoryBody = R"(Role
You are a privacy classifier. This is sub-task 3 of 3: category prediction.

Privacy category
1. Core Identity Identifiers - uniquely identify a person on their own.
2. Contact & Financial - directly contacts a person or links to funds.
3. Technical & Device Identifiers - enable cross-session/device tracking.
4. Behavior & Context Traces - records stitching actions.
5. Sensitive Special Categories - highest priority.
6. Inferences & Profiling - labels/scores/preferences derived from raw data.

Task
Each item below was judged to carry privacy risk. Assign one of the six categories, and decide whether the item is strictly necessary for the Agent to achieve its goal ("strictly necessary" means that if this item were fully masked or removed, the Agent would not be able to correctly complete the task).

Output format
One line per item:

[item number] | [category number(Category Name)] | [necessity]

where necessity is "necessary" or "not_necessary".

Items with privacy risk
)";

constexpr const char* kJudgeTemplate = R"(You are evaluating whether a GUI agent's plan stayed semantically consistent after privacy protection was applied to its screenshots.

Task goal:
{goal}

Baseline plan (unprotected screenshots):
<<<BASELINE
{baseline}
BASELINE>>>

Protected plan (privacy-protected screenshots):
<<<PROTECTED
{protected}
PROTECTED>>>

Scoring rubric (integer 0-4):
4 - Semantically identical: same intent, same target elements, same next action.
3 - Same intent and action type; minor differences in wording or in how a target is described.
2 - Same overall intent, but a different target element or a different action.
1 - Weakly related: the plan still concerns the task but would lead somewhere else.
0 - Unrelated or contradictory plans, or the protected plan gives up.

Treat anonymized or substituted values (for example a pseudonymized name, email, or number standing in for the original) as equivalent when they play the same functional role in the plan; do not penalize such substitutions. Likewise, references to a redacted or masked region count as the same target when the role is unchanged.

Explain your reasoning briefly, then end your answer with a final line of the form:
SCORE: <n>
)";

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

// Placeholders are substituted in one pass so user text containing "{goal}"
// is never re-expanded.
std::string fill(std::string_view tmpl,
                 std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool hit = false;
    for (const auto& [key, value] : slots) {
      if (tmpl.compare(i, key.size(), key) == 0) {
        out.append(value);
        i += key.size();
        hit = true;
        break;
      }
    }
    if (!hit) out.push_back(tmpl[i++]);
  }
  return out;
}

std::string item_line(std::size_t n, const StageItem& item) {
  std::ostringstream os;
  os << n << " | " << replace_all(item.text, "|", "/") << " | " << format_bbox_json(item.bbox);
  if (item.risk) os << " | " << risk_name(*item.risk);
  return os.str();
}

bool is_skippable(const std::string& trimmed) {
  if (trimmed.empty()) return true;
  if (trimmed.rfind("```", 0) == 0) return true;
  if (trimmed.find('|') != std::string::npos) return false;
  return trimmed.front() == '#' || trimmed.back() == ':';
}

std::vector<std::string> split_fields(const std::string& line, std::size_t expected) {
  std::vector<std::string> fields;
  auto split_on = [&](std::string_view sep) {
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(sep, start);
      if (pos == std::string::npos) {
        fields.push_back(text::trim(std::string_view(line).substr(start)));
        break;
      }
      fields.push_back(text::trim(std::string_view(line).substr(start, pos - start)));
      start = pos + sep.size();
    }
  };
  split_on(" | ");
  if (fields.size() == expected) return fields;
  split_on("|");
  return fields;
}

// Round half up, then clamp into the grid.
int grid_coord(double v) {
  const double r = std::floor(v + 0.5);
  if (r < 0) return 0;
  if (r > kGridMax) return kGridMax;
  return static_cast<int>(r);
}

std::optional<BoundingBox> parse_bbox(const std::string& field, std::string& reason) {
  nlohmann::json j = nlohmann::json::parse(field, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    reason = "coordinates are not a JSON object";
    return std::nullopt;
  }
  double v[4];
  const char* keys[4] = {"x1", "y1", "x2", "y2"};
  for (int k = 0; k < 4; ++k) {
    auto it = j.find(keys[k]);
    if (it == j.end() || !it->is_number() || !std::isfinite(it->get<double>())) {
      reason = std::string("coordinate '") + keys[k] + "' missing or not a number";
      return std::nullopt;
    }
    v[k] = it->get<double>();
  }
  BoundingBox b{grid_coord(v[0]), grid_coord(v[1]), grid_coord(v[2]), grid_coord(v[3])};
  if (!b.valid()) {
    reason = "box has zero area after clamping to [0,1000]";
    return std::nullopt;
  }
  return b;
}

std::optional<int> parse_leading_int(const std::string& field) {
  std::size_t i = 0;
  while (i < field.size() && field[i] == ' ') ++i;
  const std::size_t start = i;
  while (i < field.size() && field[i] >= '0' && field[i] <= '9' && i - start < 6) ++i;
  if (i == start) return std::nullopt;
  if (i < field.size() && field[i] >= '0' && field[i] <= '9') return std::nullopt;
  return std::stoi(field.substr(start, i - start));
}

// Splits text into lines, calling `fn(line_number, raw, trimmed)` for lines
// that are neither blank nor headings.
template <typename Fn>
void for_each_line(std::string_view text_in, Fn fn) {
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text_in.size()) {
    std::size_t end = text_in.find('\n', start);
    if (end == std::string_view::npos) end = text_in.size();
    ++line_no;
    std::string raw(text_in.substr(start, end - start));
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string trimmed = text::trim(raw);
    if (!is_skippable(trimmed)) fn(line_no, raw, trimmed);
    if (end == text_in.size()) break;
    start = end + 1;
  }
}

}  // namespace

std::string format_bbox_json(const BoundingBox& b) {
  std::ostringstream os;
  os << "{\"x1\":" << b.x1 << ", \"y1\":" << b.y1 << ", \"x2\":" << b.x2 << ", \"y2\":" << b.y2
     << "}";
  return os.str();
}

std::string build_recognition_prompt(std::string_view goal, std::string_view response,
                                     RecognitionMode mode, std::span<const StageItem> items) {
  const auto slots = {std::pair<std::string_view, std::string_view>{kGoalSlot, goal},
                      std::pair<std::string_view, std::string_view>{kResponseSlot, response}};
  if (mode == RecognitionMode::kJoint) return fill(kJointTemplate, slots);

  std::string out = fill(kContextHeader, slots);
  switch (mode) {
    case RecognitionMode::kDecomposedExtract:
      out += kExtractBody;
      break;
    case RecognitionMode::kDecomposedRisk:
    case RecognitionMode::kDecomposedCategory: {
      out += mode == RecognitionMode::kDecomposedRisk ? kRiskBody : kCategoryBody;
      if (items.empty()) {
        out += "(no items)\n";
      } else {
        for (std::size_t i = 0; i < items.size(); ++i) out += item_line(i + 1, items[i]) + "\n";
      }
      break;
    }
    case RecognitionMode::kJoint:
      break;
  }
  return out;
}

RecognitionOutput parse_recognition_output(std::string_view text_in) {
  RecognitionOutput out;
  for_each_line(text_in, [&](int line_no, const std::string& raw, const std::string& line) {
    auto fail = [&](std::string reason) {
      out.parse_errors.push_back({line_no, raw, std::move(reason)});
    };
    const auto fields = split_fields(line, 5);
    if (fields.size() != 5) {
      fail("expected 5 '|'-separated fields, found " + std::to_string(fields.size()));
      return;
    }
    PrivacyElement e;
    e.text = text::normalize(fields[0]);
    if (e.text.empty()) return fail("empty text field");

    auto risk = parse_risk(fields[1]);
    if (!risk) return fail("invalid risk level '" + fields[1] + "'");
    e.risk = *risk;

    if (e.risky()) {
      if (fields[2] == "-") return fail("category '-' is only allowed with risk none");
      auto idx = parse_leading_int(fields[2]);
      if (!idx) return fail("invalid category '" + fields[2] + "'");
      auto cat = category_from_index(*idx);
      if (!cat) return fail("category number " + std::to_string(*idx) + " outside 1-6");
      e.category = cat;
    }

    std::string reason;
    auto box = parse_bbox(fields[3], reason);
    if (!box) return fail(reason);
    e.bbox = *box;

    auto nec = parse_necessity(fields[4]);
    if (!nec) return fail("invalid necessity '" + fields[4] + "'");
    e.necessity = *nec;

    (e.risky() ? out.elements : out.none_items).push_back(std::move(e));
  });
  return out;
}

ExtractOutput parse_extraction_output(std::string_view text_in) {
  ExtractOutput out;
  for_each_line(text_in, [&](int line_no, const std::string& raw, const std::string& line) {
    const auto fields = split_fields(line, 2);
    if (fields.size() != 2) {
      out.parse_errors.push_back({line_no, raw, "expected 'text | coordinates'"});
      return;
    }
    StageItem item;
    item.text = text::normalize(fields[0]);
    if (item.text.empty()) {
      out.parse_errors.push_back({line_no, raw, "empty text field"});
      return;
    }
    std::string reason;
    auto box = parse_bbox(fields[1], reason);
    if (!box) {
      out.parse_errors.push_back({line_no, raw, reason});
      return;
    }
    item.bbox = *box;
    out.items.push_back(std::move(item));
  });
  return out;
}

RiskOutput parse_risk_output(std::string_view text_in) {
  RiskOutput out;
  for_each_line(text_in, [&](int line_no, const std::string& raw, const std::string& line) {
    const auto fields = split_fields(line, 2);
    auto idx = fields.size() == 2 ? parse_leading_int(fields[0]) : std::nullopt;
    auto risk = fields.size() == 2 ? parse_risk(fields[1]) : std::nullopt;
    if (!idx || !risk) {
      out.parse_errors.push_back({line_no, raw, "expected 'item number | risk level'"});
      return;
    }
    out.risks.push_back({*idx, *risk});
  });
  return out;
}

CategoryOutput parse_category_output(std::string_view text_in) {
  CategoryOutput out;
  for_each_line(text_in, [&](int line_no, const std::string& raw, const std::string& line) {
    const auto fields = split_fields(line, 3);
    if (fields.size() != 3) {
      out.parse_errors.push_back({line_no, raw, "expected 'item | category | necessity'"});
      return;
    }
    auto idx = parse_leading_int(fields[0]);
    auto cat_idx = parse_leading_int(fields[1]);
    auto cat = cat_idx ? category_from_index(*cat_idx) : std::nullopt;
    auto nec = parse_necessity(fields[2]);
    if (!idx || !cat || !nec) {
      out.parse_errors.push_back({line_no, raw, "invalid item number, category, or necessity"});
      return;
    }
    out.labels.push_back({*idx, *cat, *nec});
  });
  return out;
}

std::string format_element(const PrivacyElement& e, SanitizationLog* log) {
  std::string t = e.text;
  if (t.find('|') != std::string::npos) {
    t = replace_all(t, "|", "/");
    if (log) log->push_back("replaced '|' with '/' in \"" + e.text + "\"");
  }
  std::ostringstream os;
  os << t << " | " << risk_name(e.risk) << " | ";
  if (e.category && e.risky()) {
    os << category_index(*e.category) << '(' << category_name(*e.category) << ')';
  } else {
    os << '-';
  }
  os << " | " << format_bbox_json(e.bbox) << " | " << necessity_name(e.necessity);
  return os.str();
}

std::string format_elements(std::span<const PrivacyElement> elements, SanitizationLog* log) {
  std::string out;
  for (const auto& e : elements) {
    out += format_element(e, log);
    out += '\n';
  }
  return out;
}

std::string build_judge_prompt(std::string_view task_goal, std::string_view baseline_plan,
                               std::string_view protected_plan) {
  if (text::trim(baseline_plan).empty()) throw Error(ErrorCode::kEmptyPlan, "baseline plan is empty");
  if (text::trim(protected_plan).empty()) throw Error(ErrorCode::kEmptyPlan, "protected plan is empty");
  return fill(kJudgeTemplate, {{"{goal}", task_goal},
                               {"{baseline}", baseline_plan},
                               {"{protected}", protected_plan}});
}

JudgeVerdict parse_judge_score(std::string_view text_in) {
  static const std::regex kScore(R"(SCORE:\s*(-?\d+))", std::regex::icase);
  const std::string s(text_in);
  std::smatch last;
  bool found = false;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kScore); it != std::sregex_iterator();
       ++it) {
    last = *it;
    found = true;
  }
  if (!found) throw Error(ErrorCode::kUnparseableVerdict, "no 'SCORE: <n>' line in judge output");
  const std::string digits = last[1].str();
  if (digits.size() > 3) throw Error(ErrorCode::kUnparseableVerdict, "score out of range: " + digits);
  const int score = std::stoi(digits);
  if (score < 0 || score > 4) {
    throw Error(ErrorCode::kUnparseableVerdict, "score out of range 0-4: " + digits);
  }
  JudgeVerdict v;
  v.score = score;
  v.rationale = text::trim(std::string_view(s).substr(0, static_cast<std::size_t>(last.position(0))));
  return v;
}

}  // namespace guiguard::protocol
