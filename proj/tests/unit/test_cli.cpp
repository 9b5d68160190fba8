#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "guiguard/dataset.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() { return fixtures::cli_path().string(); }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, MissingConfigIsUsageError) {
  std::string out;
  EXPECT_EQ(fixtures::run_command(cli() + " eval-recognition", &out), 2);
  EXPECT_NE(out.find("Usage"), std::string::npos) << out;
  EXPECT_EQ(fixtures::run_command(cli() + " eval-recognition --config /no/such/config.json", &out), 2);
  EXPECT_NE(out.find("Usage"), std::string::npos) << out;
}

TEST(Cli, EvalRecognitionWritesReports) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " eval-recognition --config " + q(c.config), &out), 0) << out;
  EXPECT_NE(out.find("seed: 7"), std::string::npos);
  const auto j = json::parse(fixtures::read_text(tmp / "out/recognition_report.json"));
  EXPECT_EQ(j["metrics"]["all"]["recall"], 1.0);
  EXPECT_TRUE(fs::exists(tmp / "out/recognition_summary.txt"));
}

TEST(Cli, BadDatasetNamesTrajectory) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  auto manifest = json::parse(fixtures::read_text(tmp / "data/pc-bank/trajectory.json"));
  manifest["steps"][0]["elements"][0]["risk"] = "extreme";
  fixtures::write_json(tmp / "data/pc-bank/trajectory.json", manifest);
  std::string out;
  EXPECT_EQ(fixtures::run_command(cli() + " eval-recognition --config " + q(c.config), &out), 1);
  EXPECT_NE(out.find("pc-bank"), std::string::npos) << out;
}

TEST(Cli, UnknownOperatorListsValidOnes) {
  fixtures::TempDir tmp;
  std::string out;
  EXPECT_EQ(fixtures::run_command(cli() + " protect --in " + q(tmp.path()) + " --operator blur", &out), 2);
  EXPECT_NE(out.find("black_mask"), std::string::npos) << out;
  EXPECT_NE(out.find("text_replace"), std::string::npos) << out;
}

TEST(Cli, ProtectSingleImageMasksRegion) {
  fixtures::TempDir tmp;
  std::mt19937_64 rng(1);
  guiguard::save_png(fixtures::noise_image(rng, 50, 50), tmp / "shot.png");
  fixtures::write_json(tmp / "el.json", {{{"text", "Bob"}, {"bbox", {{"x1", 0}, {"y1", 0}, {"x2", 500}, {"y2", 500}}},
                                          {"risk", "high"}, {"category", 1}, {"necessity", "not_necessary"}}});
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " protect --in " + q(tmp / "shot.png") + " --elements " + q(tmp / "el.json") +
                                      " --policy full_risk --operator black_mask --out " + q(tmp / "prot"),
                                  &out),
            0)
      << out;
  const auto img = guiguard::load_image(tmp / "prot/shot.png");
  const auto orig = guiguard::load_image(tmp / "shot.png");
  const auto c = img.at(0, 0);
  for (int y = 0; y < 25; ++y)
    for (int x = 0; x < 25; ++x) ASSERT_EQ(img.at(x, y), c);
  EXPECT_TRUE(c == guiguard::kBlack || c == guiguard::kWhite);
  for (int y = 25; y < 50; ++y)
    for (int x = 0; x < 50; ++x) ASSERT_EQ(img.at(x, y), orig.at(x, y));
}

TEST(Cli, ProtectTrajectoryKeepsPseudonymsConsistent) {
  fixtures::TempDir tmp;
  fixtures::write_campaign(tmp.path());
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " protect --in " + q(tmp / "data/android-mail") +
                                      " --operator text_replace --out " + q(tmp / "prot"),
                                  &out),
            0)
      << out;
  const auto rep = json::parse(fixtures::read_text(tmp / "prot/protect_report.json"));
  ASSERT_EQ(rep["images"].size(), 2u);
  std::map<std::string, std::string> seen;
  for (const auto& img : rep["images"]) {
    for (const auto& r : img["regions"]) {
      const std::string text = r["text"], pseudo = r["pseudonym"];
      EXPECT_NE(text, pseudo);
      auto [it, fresh] = seen.emplace(text, pseudo);
      EXPECT_EQ(it->second, pseudo) << text;
    }
  }
  EXPECT_EQ(seen.size(), 2u);
  EXPECT_TRUE(fs::exists(tmp / "prot/step_1.report.json"));
}

TEST(Cli, GradedSweepPrintsFourRows) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " graded-sweep --config " + q(c.config), &out), 0) << out;
  const auto j = json::parse(fixtures::read_text(tmp / "out/graded_sweep.json"));
  ASSERT_EQ(j["rows"].size(), 4u);
  // 4 High, 4 Low (all Necessary), so 8 risky elements in total.
  EXPECT_DOUBLE_EQ(j["rows"][0]["fraction"]["total"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["rows"][1]["fraction"]["total"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(j["rows"][2]["fraction"]["total"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["rows"][3]["fraction"]["total"].get<double>(), 0.5);
  const auto text = fixtures::read_text(tmp / "out/graded_sweep.txt");
  for (const char* name : {"high_only", "medium_and_high", "full_risk", "full_risk_except_necessary"}) {
    EXPECT_NE(text.find(name), std::string::npos) << text;
  }
}

TEST(Cli, EvalFidelityScoresScriptedPlans) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " eval-fidelity --config " + q(c.config) + " --jobs 1", &out), 0) << out;
  const auto j = json::parse(fixtures::read_text(tmp / "out/fidelity_report.json"));
  // Every policy masks the High element of every step, so every protected plan changes.
  for (const char* model : {"planner-a", "planner-b"}) {
    for (const auto& [method, v] : j["table"]["cells"][model].items()) EXPECT_EQ(v, 2.0) << model << " " << method;
  }
  EXPECT_TRUE(fs::exists(tmp / "out/fidelity_table.txt"));
}

TEST(Cli, AllFourJudgeGivesTableOfFours) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  fixtures::write_json(tmp / "judge.json", {{"default", "SCORE: 4"}});
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " eval-fidelity --config " + q(c.config), &out), 0) << out;
  const auto j = json::parse(fixtures::read_text(tmp / "out/fidelity_report.json"));
  for (const auto& [model, row] : j["table"]["cells"].items())
    for (const auto& [method, v] : row.items()) EXPECT_EQ(v, 4.0);
  EXPECT_EQ(j["table"]["cells"].size(), 2u);
}

TEST(Cli, ReportRerendersIdentically) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  ASSERT_EQ(fixtures::run_command(cli() + " graded-sweep --config " + q(c.config)), 0);
  ASSERT_EQ(fixtures::run_command(cli() + " eval-recognition --config " + q(c.config)), 0);
  const auto sweep = fixtures::read_text(tmp / "out/graded_sweep.txt");
  const auto rec = fixtures::read_text(tmp / "out/recognition_summary.txt");
  fs::remove(tmp / "out/graded_sweep.txt");
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " report --in " + q(tmp / "out"), &out), 0) << out;
  EXPECT_EQ(fixtures::read_text(tmp / "out/graded_sweep.txt"), sweep);
  EXPECT_EQ(fixtures::read_text(tmp / "out/recognition_summary.txt"), rec);
}

TEST(Cli, SeedFlagOverridesConfigAndIsEchoed) {
  fixtures::TempDir tmp;
  const auto c = fixtures::write_campaign(tmp.path());
  std::string out;
  ASSERT_EQ(fixtures::run_command(cli() + " graded-sweep --config " + q(c.config) + " --seed 99 --out " + q(tmp / "o2"),
                                  &out),
            0);
  EXPECT_NE(out.find("seed: 99"), std::string::npos) << out;
  const auto j = json::parse(fixtures::read_text(tmp / "o2/graded_sweep.json"));
  EXPECT_EQ(j["config"]["seed"], 99);
}
