#include "guiguard/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "guiguard/error.hpp"
#include "guiguard/text.hpp"

namespace guiguard {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, where + ": " + what);
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) violation(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) violation(where + "." + key, "missing field");
  return *it;
}

std::string require_string(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string()) violation(where + "." + key, "expected a string");
  return v.get<std::string>();
}

int require_int(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer()) violation(where + "." + key, "expected an integer");
  return v.get<int>();
}

std::string safe_dir_name(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "trajectory";
  return out;
}

bool safe_relative(const std::string& p) {
  const fs::path path(p);
  if (p.empty() || path.is_absolute()) return false;
  for (const auto& part : path) {
    if (part == "..") return false;
  }
  return true;
}

}  // namespace

json element_to_json(const PrivacyElement& e) {
  json j;
  j["text"] = e.text;
  j["bbox"] = {{"x1", e.bbox.x1}, {"y1", e.bbox.y1}, {"x2", e.bbox.x2}, {"y2", e.bbox.y2}};
  j["risk"] = std::string(risk_name(e.risk));
  if (e.category) {
    j["category"] = category_index(*e.category);
  } else {
    j["category"] = "-";
  }
  j["necessity"] = std::string(necessity_name(e.necessity));
  return j;
}

PrivacyElement element_from_json(const json& j, const std::string& where) {
  PrivacyElement e;
  e.text = text::normalize(require_string(j, "text", where));
  if (e.text.empty()) violation(where + ".text", "empty after whitespace normalization");

  const json& b = require(j, "bbox", where);
  const std::string bw = where + ".bbox";
  e.bbox = {require_int(b, "x1", bw), require_int(b, "y1", bw), require_int(b, "x2", bw),
            require_int(b, "y2", bw)};
  if (!e.bbox.valid()) {
    std::ostringstream os;
    os << "invalid box (" << e.bbox.x1 << "," << e.bbox.y1 << "," << e.bbox.x2 << ","
       << e.bbox.y2 << "): need 0 <= x1 < x2 <= 1000 and 0 <= y1 < y2 <= 1000";
    violation(bw, os.str());
  }

  const std::string risk = require_string(j, "risk", where);
  auto r = parse_risk(risk);
  if (!r) violation(where + ".risk", "unknown risk level '" + risk + "'");
  e.risk = *r;

  auto cat = j.find("category");
  const bool placeholder =
      cat == j.end() || cat->is_null() || (cat->is_string() && cat->get<std::string>() == "-");
  if (e.risky()) {
    if (placeholder || !cat->is_number_integer()) {
      violation(where + ".category", "risk '" + risk + "' requires a category index 1-6");
    }
    auto c = category_from_index(cat->get<int>());
    if (!c) violation(where + ".category", "category index must be 1-6");
    e.category = c;
  } else if (!placeholder) {
    violation(where + ".category", "risk 'none' requires the \"-\" placeholder");
  }

  const std::string nec = require_string(j, "necessity", where);
  auto n = parse_necessity(nec);
  if (!n) violation(where + ".necessity", "unknown necessity '" + nec + "'");
  e.necessity = *n;
  return e;
}

json trajectory_to_json(const Trajectory& t) {
  json steps = json::array();
  for (const Step& s : t.steps) {
    json elements = json::array();
    for (const PrivacyElement& e : s.elements) elements.push_back(element_to_json(e));
    steps.push_back({{"index", s.index},
                     {"image", s.image},
                     {"response", s.agent_response},
                     {"elements", std::move(elements)}});
  }
  return {{"id", t.id},
          {"goal", t.goal},
          {"platform", std::string(platform_name(t.platform))},
          {"steps", std::move(steps)}};
}

Trajectory load_trajectory(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    violation(manifest.string(), std::string("invalid JSON: ") + e.what());
  }

  Trajectory t;
  t.root = manifest.parent_path();
  std::string where = manifest.string();
  t.id = require_string(j, "id", where);
  if (t.id.empty()) violation(where + ".id", "must be non-empty");
  where = t.id;
  t.goal = require_string(j, "goal", where);
  const std::string platform = require_string(j, "platform", where);
  auto p = parse_platform(platform);
  if (!p) violation(where + ".platform", "expected Android or PC, got '" + platform + "'");
  t.platform = *p;

  const json& steps = require(j, "steps", where);
  if (!steps.is_array() || steps.empty()) violation(where + ".steps", "need at least one step");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string sw = where + ".steps[" + std::to_string(i) + "]";
    Step s;
    s.index = require_int(steps[i], "index", sw);
    if (s.index != static_cast<int>(i)) {
      violation(sw + ".index", "expected " + std::to_string(i) + ", got " +
                                   std::to_string(s.index) + " (indices are contiguous from 0)");
    }
    s.image = require_string(steps[i], "image", sw);
    if (!safe_relative(s.image)) violation(sw + ".image", "must be a relative path inside the trajectory");
    if (!fs::is_regular_file(t.root / s.image)) {
      throw Error(ErrorCode::kMissingImage, sw + ".image: " + (t.root / s.image).string() + " not found");
    }
    s.agent_response = require_string(steps[i], "response", sw);
    const json& elements = require(steps[i], "elements", sw);
    if (!elements.is_array()) violation(sw + ".elements", "expected an array");
    for (std::size_t k = 0; k < elements.size(); ++k) {
      s.elements.push_back(element_from_json(elements[k], sw + ".elements[" + std::to_string(k) + "]"));
    }
    t.steps.push_back(std::move(s));
  }
  return t;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kSchemaViolation, dir.string() + ": dataset directory not found");
  }
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / kManifestName)) {
      manifests.push_back(entry.path() / kManifestName);
    }
  }
  std::sort(manifests.begin(), manifests.end());

  Dataset out;
  std::set<std::string> ids;
  for (const auto& m : manifests) {
    Trajectory t = load_trajectory(m);
    if (!ids.insert(t.id).second) {
      throw Error(ErrorCode::kDuplicateTrajectoryId, "duplicate trajectory id '" + t.id + "' in " + m.string());
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  std::set<std::string> used;
  for (const Trajectory& t : dataset) {
    std::string name = safe_dir_name(t.id);
    for (int n = 1; !used.insert(name).second; ++n) name = safe_dir_name(t.id) + "-" + std::to_string(n);
    const fs::path sub = dir / name;
    fs::create_directories(sub, ec);
    if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + sub.string() + ": " + ec.message());

    for (const Step& s : t.steps) {
      const fs::path src = t.root / s.image;
      const fs::path dst = sub / s.image;
      if (!fs::is_regular_file(src)) {
        throw Error(ErrorCode::kIoFailure, t.id + ": image " + src.string() + " not found");
      }
      if (fs::exists(dst) && fs::equivalent(src, dst)) continue;
      fs::create_directories(dst.parent_path(), ec);
      fs::copy_file(src, dst, fs::copy_options::overwrite_existing, ec);
      if (ec) throw Error(ErrorCode::kIoFailure, "copy " + src.string() + ": " + ec.message());
    }
    std::ofstream out(sub / kManifestName, std::ios::binary | std::ios::trunc);
    out << trajectory_to_json(t).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + (sub / kManifestName).string());
  }
}

}  // namespace guiguard
