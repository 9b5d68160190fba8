#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "guiguard/error.hpp"
#include "guiguard/harness.hpp"
#include "guiguard/report.hpp"

using namespace guiguard;
namespace fs = std::filesystem;

namespace {

RecognitionRun empty_recognition() {
  RecognitionRun run;
  run.all.counts.screenshots = 2;
  run.all.binary_accuracy = 0.5;
  // No ground truth: recall and label accuracies stay undefined.
  return run;
}

RunConfig config() {
  RunConfig c;
  c.dataset = "/data";
  c.output_dir = "/out";
  c.seed = 3;
  return c;
}

SweepRun sweep() {
  SweepRun run;
  for (auto p : graded_policies(Operator::kMosaic, 0)) run.rows.push_back({p, {1, 2, 3}, 10, 4});
  run.rows.push_back({graded_policies(Operator::kMosaic, 0)[0], {0, 0, 0}, 0, 1});
  return run;
}

}  // namespace

TEST(Report, UndefinedRatiosAreNullAndRenderAsNa) {
  const auto j = report::recognition_to_json(empty_recognition(), config());
  EXPECT_TRUE(j["metrics"]["all"]["recall"].is_null());
  EXPECT_EQ(j["metrics"]["all"]["binary_accuracy"], 0.5);
  const auto text = report::render_text(j);
  EXPECT_NE(text.find("n/a"), std::string::npos);
  EXPECT_NE(text.find("0.5"), std::string::npos);
}

TEST(Report, ConfigEchoOmitsRunLocalFields) {
  const auto j = report::recognition_to_json(empty_recognition(), config());
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_FALSE(j["config"].contains("output_dir"));
  EXPECT_FALSE(j["config"].contains("jobs"));
}

TEST(Report, EmitWritesJsonAndText) {
  fixtures::TempDir tmp;
  const auto j = report::sweep_to_json(sweep(), config());
  const auto paths = report::emit(j, tmp / "out");
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].filename(), report::kSweepJson);
  EXPECT_EQ(paths[1].filename(), report::kSweepText);
  EXPECT_EQ(fixtures::read_text(paths[0]), report::dump(j));
  EXPECT_EQ(nlohmann::json::parse(fixtures::read_text(paths[0])), j);
  const auto text = fixtures::read_text(paths[1]);
  EXPECT_NE(text.find("high_only"), std::string::npos);
  EXPECT_NE(text.find("n/a"), std::string::npos);  // the row without risky elements
}

TEST(Report, SweepFractionsInJson) {
  const auto j = report::sweep_to_json(sweep(), config());
  ASSERT_EQ(j["rows"].size(), 5u);
  EXPECT_DOUBLE_EQ(j["rows"][0]["fraction"]["total"].get<double>(), 0.6);
  EXPECT_TRUE(j["rows"][4]["fraction"]["total"].is_null());
}

TEST(Report, RerenderIsByteIdentical) {
  fixtures::TempDir tmp;
  const auto rec = report::emit(report::recognition_to_json(empty_recognition(), config()), tmp.path());
  const auto sw = report::emit(report::sweep_to_json(sweep(), config()), tmp.path());
  const auto rec_text = fixtures::read_text(rec[1]), sw_text = fixtures::read_text(sw[1]);
  fs::remove(rec[1]);
  fs::remove(sw[1]);
  const auto again = report::rerender(tmp.path());
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(fixtures::read_text(rec[1]), rec_text);
  EXPECT_EQ(fixtures::read_text(sw[1]), sw_text);
}

TEST(Report, RerenderWithoutReportsFails) {
  fixtures::TempDir tmp;
  try {
    report::rerender(tmp.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoFailure);
  }
}

TEST(Report, FidelityTableRendersMeans) {
  FidelityRun run;
  run.records = {{"m1", "black_mask", Platform::kAndroid, "t", 0, 4.0},
                 {"m1", "mosaic", Platform::kPC, "t2", 0, 2.0},
                 {"m2", "black_mask", Platform::kAndroid, "t", 0, 3.0}};
  run.table = metrics::fidelity_aggregate(run.records);
  run.coverage["m1"]["black_mask"] = 1.0;
  PlanLog log{"m1", "t", "baseline", {{"t", 0, "baseline", "tap", "h", "th", 123.0, false, ""}}};
  run.plan_logs.push_back(log);
  const auto j = report::fidelity_to_json(run, config());
  EXPECT_EQ(j["kind"], "fidelity");
  EXPECT_DOUBLE_EQ(j["table"]["method_means"]["black_mask"].get<double>(), 3.5);
  EXPECT_FALSE(j.dump().find("latency") != std::string::npos);
  const auto text = report::render_text(j);
  EXPECT_NE(text.find("3.50"), std::string::npos) << text;
  EXPECT_NE(text.find("n/a"), std::string::npos) << text;  // m2 has no mosaic cell
}
