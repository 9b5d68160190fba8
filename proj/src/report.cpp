#include "guiguard/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "guiguard/error.hpp"

namespace guiguard::report {
namespace {

using json = nlohmann::json;

json ratio(const metrics::Ratio& r) { return r ? json(*r) : json(nullptr); }

std::string num(const json& v, const char* fmt = "%.4f") {
  if (!v.is_number()) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v.get<double>());
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

const json& at_or_null(const json& j, const std::string& key) {
  static const json null_json;
  return j.is_object() && j.contains(key) ? j.at(key) : null_json;
}

std::string render_recognition(const json& r) {
  std::ostringstream os;
  os << "Recognition evaluation (mode: " << r["config"].value("recognition_mode", "?") << ")\n\n";
  const char* cols[] = {"binary", "recall", "acc_risk", "acc_category", "acc_necessity", "overall"};
  os << pad("split", 10) << lpad("screens", 8);
  for (const char* c : cols) os << lpad(c, 14);
  os << "\n";
  auto row = [&](const std::string& name, const json& m) {
    os << pad(name, 10) << lpad(std::to_string(m["counts"].value("screenshots", 0L)), 8);
    os << lpad(num(m["binary_accuracy"]), 14) << lpad(num(m["recall"]), 14)
       << lpad(num(m["acc_risk"]), 14) << lpad(num(m["acc_category"]), 14)
       << lpad(num(m["acc_necessity"]), 14) << lpad(num(m["overall"]), 14) << "\n";
  };
  row("all", r["metrics"]["all"]);
  for (const auto& [name, m] : r["metrics"]["by_platform"].items()) row(name, m);
  const auto& c = r["metrics"]["all"]["counts"];
  os << "\nground-truth elements: " << c.value("gt_total", 0L) << ", matched: " << c.value("matched", 0L)
     << ", predicted: " << c.value("pred_total", 0L)
     << ", failed screenshots: " << c.value("failed_screenshots", 0L) << "\n";
  return os.str();
}

std::string render_fidelity(const json& r) {
  std::ostringstream os;
  const auto& t = r["table"];
  os << "Planning fidelity (judge score 0-4, self-comparison against baseline)\n\n";
  const auto& methods = t["methods"];
  os << pad("model", 24);
  for (const auto& m : methods) os << lpad(m.get<std::string>(), 16);
  os << lpad("overall", 10) << "\n";
  for (const auto& model_j : t["models"]) {
    const auto model = model_j.get<std::string>();
    os << pad(model, 24);
    const auto& cells = at_or_null(t["cells"], model);
    for (const auto& m : methods) os << lpad(num(at_or_null(cells, m.get<std::string>()), "%.2f"), 16);
    os << lpad(num(at_or_null(t["model_overall"], model), "%.2f"), 10) << "\n";
  }
  os << pad("mean", 24);
  for (const auto& m : methods) os << lpad(num(at_or_null(t["method_means"], m.get<std::string>()), "%.2f"), 16);
  os << "\n";

  bool header = false;
  for (const auto& [model, per] : r["coverage"].items()) {
    for (const auto& [method, cov] : per.items()) {
      if (cov.get<double>() >= 1.0) continue;
      if (!header) os << "\nincomplete coverage (judged steps / steps):\n";
      header = true;
      os << "  " << model << " / " << method << ": " << num(cov, "%.3f") << "\n";
    }
  }
  os << "\njudge failures: " << r["failures"].size() << "\n";
  return os.str();
}

std::string render_sweep(const json& r) {
  std::ostringstream os;
  os << "Graded protection sweep (share of risky elements masked)\n\n";
  os << pad("policy", 40) << lpad("high", 10) << lpad("medium", 10) << lpad("low", 10) << lpad("total", 10)
     << lpad("risky", 8) << "\n";
  auto pct = [](const json& v) { return v.is_number() ? num(json(100.0 * v.get<double>()), "%.1f%%") : "n/a"; };
  for (const auto& row : r["rows"]) {
    const auto& f = row["fraction"];
    os << pad(row.value("name", ""), 40) << lpad(pct(f["high"]), 10) << lpad(pct(f["medium"]), 10)
       << lpad(pct(f["low"]), 10) << lpad(pct(f["total"]), 10)
       << lpad(std::to_string(row.value("risky_total", 0L)), 8) << "\n";
  }
  return os.str();
}

struct Files {
  const char* json_name;
  const char* text_name;
};

Files files_for(const json& report) {
  const auto kind = report.value("kind", "");
  if (kind == "recognition") return {kRecognitionJson, kRecognitionText};
  if (kind == "fidelity") return {kFidelityJson, kFidelityText};
  if (kind == "graded_sweep") return {kSweepJson, kSweepText};
  throw Error(ErrorCode::kInvalidArgument, "unknown report kind '" + kind + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
}

}  // namespace

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json metrics_to_json(const metrics::MetricsReport& r) {
  json rows = json::array();
  for (const auto& s : r.per_screenshot) {
    rows.push_back({{"trajectory", s.trajectory_id},
                    {"step", s.step},
                    {"platform", platform_name(s.platform)},
                    {"gt", s.gt},
                    {"pred", s.pred},
                    {"matched", s.matched},
                    {"fully_correct", s.fully_correct},
                    {"precision", ratio(s.precision)}});
  }
  return {{"binary_accuracy", ratio(r.binary_accuracy)},
          {"recall", ratio(r.recall)},
          {"acc_risk", ratio(r.acc_risk)},
          {"acc_category", ratio(r.acc_category)},
          {"acc_necessity", ratio(r.acc_necessity)},
          {"overall", ratio(r.overall)},
          {"counts",
           {{"screenshots", r.counts.screenshots},
            {"gt_total", r.counts.gt_total},
            {"matched", r.counts.matched},
            {"fn", r.counts.fn},
            {"pred_total", r.counts.pred_total},
            {"failed_screenshots", r.counts.failed_screenshots}}},
          {"per_screenshot", std::move(rows)}};
}

json recognition_to_json(const RecognitionRun& run, const RunConfig& config) {
  json platforms = json::object();
  for (const auto& [name, m] : run.by_platform) platforms[name] = metrics_to_json(m);
  json details = json::array();
  for (const auto& d : run.details) {
    details.push_back({{"trajectory", d.trajectory_id},
                       {"step", d.step},
                       {"prompt_hashes", d.prompt_hashes},
                       {"parse_errors", d.parse_errors},
                       {"none_items", d.none_items},
                       {"inconsistencies", d.inconsistencies},
                       {"error", d.error ? json(*d.error) : json(nullptr)}});
  }
  return {{"kind", "recognition"},
          {"config", run_config_to_json(config)},
          {"metrics", {{"all", metrics_to_json(run.all)}, {"by_platform", std::move(platforms)}}},
          {"screenshots", std::move(details)}};
}

json fidelity_to_json(const FidelityRun& run, const RunConfig& config) {
  const auto& t = run.table;
  json table = {{"models", t.models},
                {"methods", t.methods},
                {"cells", t.cells},
                {"cell_counts", t.cell_counts},
                {"method_means", t.method_means},
                {"platform_means", t.platform_means},
                {"model_overall", t.model_overall},
                {"platform_overall", t.platform_overall}};
  json records = json::array();
  for (const auto& r : run.records) {
    records.push_back({{"model", r.model},
                       {"method", r.method},
                       {"platform", platform_name(r.platform)},
                       {"trajectory", r.task},
                       {"step", r.step},
                       {"score", r.score}});
  }
  json failures = json::array();
  for (const auto& f : run.failures) {
    failures.push_back({{"model", f.model},
                        {"method", f.method},
                        {"trajectory", f.trajectory_id},
                        {"step", f.step},
                        {"reason", f.reason}});
  }
  json logs = json::array();
  for (const auto& l : run.plan_logs) {
    json recs = json::array();
    for (const auto& r : l.records) {
      recs.push_back({{"step", r.step},
                      {"plan", r.plan},
                      {"prompt_hash", r.prompt_hash},
                      {"text_hash", r.text_hash},
                      {"failed", r.failed},
                      {"error", r.error}});
    }
    logs.push_back({{"model", l.model},
                    {"trajectory", l.trajectory_id},
                    {"condition", l.condition},
                    {"records", std::move(recs)}});
  }
  return {{"kind", "fidelity"},
          {"config", run_config_to_json(config)},
          {"table", std::move(table)},
          {"coverage", run.coverage},
          {"records", std::move(records)},
          {"failures", std::move(failures)},
          {"plan_logs", std::move(logs)}};
}

json sweep_to_json(const SweepRun& run, const RunConfig& config) {
  json rows = json::array();
  for (const auto& row : run.rows) {
    rows.push_back({{"name", row.policy.name},
                    {"policy", policy_to_json(row.policy)},
                    {"selected", {{"high", row.selected_by_risk[0]},
                                  {"medium", row.selected_by_risk[1]},
                                  {"low", row.selected_by_risk[2]}}},
                    {"risky_total", row.risky_total},
                    {"screenshots", row.screenshots},
                    {"fraction", {{"high", ratio(row.fraction(RiskLevel::kHigh))},
                                  {"medium", ratio(row.fraction(RiskLevel::kMedium))},
                                  {"low", ratio(row.fraction(RiskLevel::kLow))},
                                  {"total", ratio(row.total_fraction())}}}});
  }
  return {{"kind", "graded_sweep"}, {"config", run_config_to_json(config)}, {"rows", std::move(rows)}};
}

std::string render_text(const json& report) {
  const auto kind = report.value("kind", "");
  if (kind == "recognition") return render_recognition(report);
  if (kind == "fidelity") return render_fidelity(report);
  if (kind == "graded_sweep") return render_sweep(report);
  throw Error(ErrorCode::kInvalidArgument, "unknown report kind '" + kind + "'");
}

std::vector<std::filesystem::path> emit(const json& report, const std::filesystem::path& dir) {
  const Files f = files_for(report);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
  const auto json_path = dir / f.json_name;
  const auto text_path = dir / f.text_name;
  write_text(json_path, dump(report));
  write_text(text_path, render_text(report));
  return {json_path, text_path};
}

std::vector<std::filesystem::path> rerender(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const char* name : {kRecognitionJson, kFidelityJson, kSweepJson}) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::kIoFailure, path.string() + " is not valid JSON");
    const auto text_path = dir / files_for(j).text_name;
    write_text(text_path, render_text(j));
    out.push_back(text_path);
  }
  if (out.empty()) throw Error(ErrorCode::kIoFailure, "no report JSON found in " + dir.string());
  return out;
}

}  // namespace guiguard::report
