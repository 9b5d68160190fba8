#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <random>

#include "fixtures.hpp"
#include "mocks.hpp"
#include "guiguard/dataset.hpp"
#include "guiguard/error.hpp"
#include "guiguard/harness.hpp"

using namespace guiguard;
using fixtures::element;
using fixtures::mock_endpoint;
using nlohmann::json;

namespace {

// Two trajectories (Android, PC) with two steps each; every step has two
// risky elements and one none element on a noise image.
Dataset small_dataset(const std::filesystem::path& dir) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 2; ++t) {
    Trajectory traj;
    traj.id = "traj" + std::to_string(t);
    traj.goal = "Send the invoice to the accountant";
    traj.platform = t == 0 ? Platform::kAndroid : Platform::kPC;
    std::vector<Image> images;
    for (int s = 0; s < 2; ++s) {
      Step step;
      step.index = s;
      step.agent_response = "opened mail";
      step.elements = {element("Jane Roe " + std::to_string(t) + std::to_string(s), {100, 100, 600, 200},
                               RiskLevel::kHigh, 1),
                       element("jane@mail.example", {100, 300, 700, 380}, RiskLevel::kMedium, 2,
                               Necessity::kNecessary),
                       element("Inbox", {0, 0, 200, 60}, RiskLevel::kNone, 0)};
      step.elements[2].category.reset();
      traj.steps.push_back(step);
      images.push_back(fixtures::noise_image(rng, 64, 96));
    }
    fixtures::write_trajectory(dir, traj, images);
  }
  return load_dataset(dir);
}

RunConfig base_config(const std::filesystem::path& dataset) {
  RunConfig c;
  c.dataset = dataset;
  return c;
}

ModelClient scripted(const json& script) {
  return ModelClient(mock_endpoint("recognizer"), std::make_shared<ScriptedTransport>(script));
}

}  // namespace

TEST(RunConfig, ParsesAndDefaults) {
  const json j = {{"dataset", "data"},
                  {"seed", 9},
                  {"recognition", {{"base_url", "script:rec.json"}, {"model", "m"}}},
                  {"policies", {"graded:mosaic", {{"scope", "full_risk"}, {"operator", "black_mask"}}}}};
  const auto c = run_config_from_json(j, "/cfg");
  EXPECT_EQ(c.dataset, std::filesystem::path("/cfg/data"));
  EXPECT_EQ(c.policies.size(), 5u);
  EXPECT_EQ(c.policies[0].name, "high_only/mosaic");
  EXPECT_EQ(c.policies[4].seed, 9u);
  EXPECT_EQ(c.recognition->base_url, "script:/cfg/rec.json");
}

TEST(RunConfig, RejectsBadConfigs) {
  auto fails = [](const json& j) {
    try {
      run_config_from_json(j, "/");
      return false;
    } catch (const Error& e) {
      return e.code() == ErrorCode::kConfigError;
    }
  };
  EXPECT_TRUE(fails(json::object()));
  EXPECT_TRUE(fails({{"dataset", "d"}, {"policies", {"graded:blur"}}}));
  EXPECT_TRUE(fails({{"dataset", "d"}, {"policies", {{{"name", "baseline"}}}}}));
  EXPECT_TRUE(fails({{"dataset", "d"}, {"policies", {{{"name", "a"}}, {{"name", "a"}}}}}));
  EXPECT_TRUE(fails({{"dataset", "d"}, {"recognition_mode", "sideways"}}));
  EXPECT_TRUE(fails({{"dataset", "d"}, {"match", {{"tau_iou", 2.0}}}}));
}

TEST(Recognition, EchoedGroundTruthScoresPerfectly) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  auto cfg = base_config(tmp.path());
  cfg.jobs = 2;
  const auto run = run_recognition_eval(cfg, ds, scripted(fixtures::echo_script(ds)));
  EXPECT_EQ(run.all.counts.screenshots, 4);
  EXPECT_EQ(run.all.binary_accuracy, 1.0);
  EXPECT_EQ(run.all.recall, 1.0);
  EXPECT_EQ(run.all.acc_category, 1.0);
  EXPECT_EQ(run.all.overall, 1.0);
  ASSERT_EQ(run.by_platform.size(), 2u);
  EXPECT_EQ(run.by_platform.at("PC").counts.screenshots, 2);
  ASSERT_EQ(run.details.size(), 4u);
  EXPECT_EQ(run.details[0].prompt_hashes.size(), 1u);
}

TEST(Recognition, HalfTheElementsGivesHalfRecall) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  const auto script = fixtures::echo_script(ds, [](const Trajectory&, const Step& s) {
    return std::vector<PrivacyElement>{s.elements[0]};
  });
  const auto run = run_recognition_eval(base_config(tmp.path()), ds, scripted(script));
  EXPECT_EQ(run.all.recall, 0.5);
  EXPECT_EQ(run.all.binary_accuracy, 1.0);
  EXPECT_EQ(run.all.overall, 0.5);
}

TEST(Recognition, WrongCategoryZeroesCategoryAccuracy) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  const auto script = fixtures::echo_script(ds, [](const Trajectory&, const Step& s) {
    std::vector<PrivacyElement> out;
    for (auto e : s.elements) {
      if (!e.risky()) continue;
      e.category = PrivacyCategory::kSensitiveSpecial;
      out.push_back(e);
    }
    return out;
  });
  const auto run = run_recognition_eval(base_config(tmp.path()), ds, scripted(script));
  EXPECT_EQ(run.all.recall, 1.0);
  EXPECT_EQ(run.all.acc_category, 0.0);
  EXPECT_EQ(run.all.acc_risk, 1.0);
  EXPECT_EQ(run.all.overall, 0.0);
}

TEST(Recognition, FailedScreenshotsAreExcludedAndRecorded) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  auto script = fixtures::echo_script(ds);
  script["rules"][0]["status"] = 401;
  const auto run = run_recognition_eval(base_config(tmp.path()), ds, scripted(script));
  EXPECT_EQ(run.all.counts.screenshots, 3);
  EXPECT_EQ(run.all.counts.failed_screenshots, 1);
  ASSERT_TRUE(run.details[0].error);
  EXPECT_NE(run.details[0].error->find("AuthFailure"), std::string::npos) << *run.details[0].error;
}

TEST(Recognition, DecomposedModeRunsThreeStages) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  auto cfg = base_config(tmp.path());
  cfg.recognition_mode = RecognitionStrategy::kDecomposed;
  ModelClient c(mock_endpoint("d"), std::make_shared<FunctionTransport>([](const json& w) {
                  const auto text = fixtures::last_user_text(w);
                  if (text.find("sub-task 1 of 3") != std::string::npos)
                    return chat_reply("jane@mail.example | {\"x1\":100, \"y1\":300, \"x2\":700, \"y2\":380}\n");
                  if (text.find("sub-task 2 of 3") != std::string::npos) return chat_reply("1 | high\n");
                  return chat_reply("1 | 2(Contact & Financial) | necessary\n");
                }));
  const auto run = run_recognition_eval(cfg, ds, c);
  EXPECT_EQ(run.all.acc_risk, 0.0);
  EXPECT_EQ(run.all.acc_category, 1.0);
  EXPECT_EQ(run.details[0].prompt_hashes.size(), 3u);
  EXPECT_EQ(run.all.recall, 0.5);
}

TEST(Replay, BaselineAndProtectedShareTextContext) {
  fixtures::TempDir tmp;
  std::mt19937_64 rng(3);
  Trajectory t;
  t.id = "t";
  t.goal = "g";
  std::vector<Image> imgs;
  for (int i = 0; i < 3; ++i) {
    Step s;
    s.index = i;
    s.elements = {element("Name" + std::to_string(i), {0, 0, 500, 500}, RiskLevel::kHigh)};
    t.steps.push_back(s);
    imgs.push_back(fixtures::noise_image(rng, 40, 40));
  }
  t = fixtures::write_trajectory(tmp.path(), t, imgs);
  const ModelClient planner(mock_endpoint("planner"), fixtures::pixel_planner());
  const auto base = run_planner_replay(t, nullptr, planner);
  ASSERT_EQ(base.records.size(), 3u);
  EXPECT_EQ(base.condition, "baseline");
  ProtectionPolicy p;
  p.name = "full/black";
  const auto prot = run_planner_replay(t, &p, planner, &base);
  ASSERT_EQ(prot.records.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(prot.records[i].text_hash, base.records[i].text_hash);
    EXPECT_NE(prot.records[i].prompt_hash, base.records[i].prompt_hash);
    EXPECT_NE(prot.records[i].plan, base.records[i].plan);
  }
}

TEST(Replay, SingleStepAndHistoryWindow) {
  fixtures::TempDir tmp;
  std::mt19937_64 rng(4);
  Trajectory t;
  t.id = "one";
  t.goal = "g";
  std::vector<Image> imgs;
  for (int i = 0; i < 4; ++i) {
    t.steps.push_back({i, "", "", {}});
    imgs.push_back(fixtures::noise_image(rng, 8, 8));
  }
  t = fixtures::write_trajectory(tmp.path(), t, imgs);
  std::vector<std::size_t> image_counts;
  std::mutex mu;
  const ModelClient planner(mock_endpoint("p"), std::make_shared<FunctionTransport>([&](const json& w) {
                              std::lock_guard lock(mu);
                              image_counts.push_back(w["messages"][0]["content"].size() - 1);
                              return chat_reply("plan");
                            }));
  run_planner_replay(t, nullptr, planner, nullptr, ReplayOptions{2});
  EXPECT_EQ(image_counts, (std::vector<std::size_t>{1, 2, 2, 2}));

  Trajectory single = t;
  single.steps.resize(1);
  EXPECT_EQ(run_planner_replay(single, nullptr, planner).records.size(), 1u);
}

TEST(Replay, ProtectedWithoutBaselineThrows) {
  fixtures::TempDir tmp;
  std::mt19937_64 rng(5);
  Trajectory t;
  t.id = "t";
  t.goal = "g";
  t.steps.push_back({0, "", "", {}});
  t = fixtures::write_trajectory(tmp.path(), t, {fixtures::noise_image(rng, 8, 8)});
  const ModelClient planner(mock_endpoint("p"), fixtures::pixel_planner());
  ProtectionPolicy p;
  try {
    run_planner_replay(t, &p, planner, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBaseline);
  }
  PlanLog other{"p", "someone-else", "baseline", {}};
  EXPECT_THROW(run_planner_replay(t, &p, planner, &other), Error);
}

TEST(Replay, FailedBaselineStepLeavesMarkerInHistory) {
  fixtures::TempDir tmp;
  std::mt19937_64 rng(6);
  Trajectory t;
  t.id = "t";
  t.goal = "g";
  t.steps = {{0, "", "", {}}, {1, "", "", {}}};
  t = fixtures::write_trajectory(tmp.path(), t, {fixtures::noise_image(rng, 8, 8), fixtures::noise_image(rng, 8, 8)});
  std::atomic<int> calls{0};
  std::vector<std::string> prompts;
  std::mutex mu;
  auto e = mock_endpoint("p");
  e.max_retries = 0;
  const ModelClient planner(e, std::make_shared<FunctionTransport>([&](const json& w) {
                              std::lock_guard lock(mu);
                              prompts.push_back(fixtures::last_user_text(w));
                              return ++calls == 1 ? HttpReply{500, "", ""} : chat_reply("plan");
                            }));
  const auto base = run_planner_replay(t, nullptr, planner);
  EXPECT_TRUE(base.records[0].failed);
  EXPECT_FALSE(base.records[1].failed);
  ProtectionPolicy p;
  const auto prot = run_planner_replay(t, &p, planner, &base);
  EXPECT_NE(prompts.back().find("Step 1: [step failed]"), std::string::npos) << prompts.back();
}

TEST(Fidelity, IdenticalPlansScoreFour) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  auto cfg = base_config(tmp.path());
  cfg.policies = {policy_from_json({{"scope", "high_only"}, {"operator", "black_mask"}})};
  std::vector<std::pair<std::string, ModelClient>> planners;
  planners.emplace_back("static", ModelClient(mock_endpoint("static"), std::make_shared<FunctionTransport>(
                                                                           [](const json&) { return chat_reply("tap send"); })));
  const ModelClient judge_client(mock_endpoint("judge"), fixtures::equality_judge());
  const auto run = run_fidelity_eval(cfg, ds, planners, judge_client);
  EXPECT_EQ(run.records.size(), 4u);
  EXPECT_DOUBLE_EQ(run.table.cells.at("static").at("high_only/black_mask"), 4.0);
  EXPECT_DOUBLE_EQ(run.coverage.at("static").at("high_only/black_mask"), 1.0);
  EXPECT_EQ(run.plan_logs.size(), 4u);
  EXPECT_TRUE(run.failures.empty());
}

TEST(Fidelity, HalfChangedPlansScoreThree) {
  fixtures::TempDir tmp;
  std::mt19937_64 rng(8);
  Trajectory t;
  t.id = "half";
  t.goal = "g";
  std::vector<Image> imgs;
  for (int i = 0; i < 4; ++i) {
    Step s;
    s.index = i;
    if (i < 2) s.elements = {element("Secret" + std::to_string(i), {0, 0, 500, 500}, RiskLevel::kHigh)};
    t.steps.push_back(s);
    imgs.push_back(fixtures::noise_image(rng, 20, 20));
  }
  fixtures::write_trajectory(tmp.path(), t, imgs);
  const auto ds = load_dataset(tmp.path());
  auto cfg = base_config(tmp.path());
  cfg.policies = {policy_from_json({{"scope", "full_risk"}, {"operator", "mosaic"}})};
  cfg.jobs = 3;
  std::vector<std::pair<std::string, ModelClient>> planners;
  planners.emplace_back("pix", ModelClient(mock_endpoint("pix"), fixtures::pixel_planner()));
  const ModelClient judge_client(mock_endpoint("judge"), fixtures::equality_judge());
  const auto run = run_fidelity_eval(cfg, ds, planners, judge_client);
  EXPECT_DOUBLE_EQ(run.table.cells.at("pix").at("full_risk/mosaic"), 3.0);
}

TEST(Fidelity, JudgeFailuresLowerCoverage) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  auto cfg = base_config(tmp.path());
  cfg.policies = {policy_from_json({{"scope", "full_risk"}})};
  std::vector<std::pair<std::string, ModelClient>> planners;
  planners.emplace_back("pix", ModelClient(mock_endpoint("pix"), fixtures::pixel_planner()));
  std::atomic<int> calls{0};
  // With one job the first verdict and its re-ask are both prose.
  const ModelClient judge_client(mock_endpoint("judge"), std::make_shared<FunctionTransport>([&](const json&) {
                                   return ++calls <= 2 ? chat_reply("hmm") : chat_reply("SCORE: 1");
                                 }));
  cfg.jobs = 1;
  const auto run = run_fidelity_eval(cfg, ds, planners, judge_client);
  EXPECT_EQ(run.failures.size(), 1u);
  EXPECT_DOUBLE_EQ(run.coverage.at("pix").at("full_risk/black_mask"), 0.75);
  EXPECT_NE(run.failures[0].reason.find("UnparseableVerdict"), std::string::npos) << run.failures[0].reason;
}

TEST(Fidelity, RequiresPolicies) {
  fixtures::TempDir tmp;
  const auto ds = small_dataset(tmp.path());
  const ModelClient judge_client(mock_endpoint("judge"), fixtures::equality_judge());
  try {
    run_fidelity_eval(base_config(tmp.path()), ds, {}, judge_client);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPolicyList);
  }
}

namespace {

Dataset split_dataset(const std::filesystem::path& dir, int high, int medium, int low, int none, int necessary) {
  std::mt19937_64 rng(30);
  Trajectory t;
  t.id = "split";
  t.goal = "g";
  std::vector<PrivacyElement> all;
  auto add = [&](RiskLevel r, int n) {
    for (int i = 0; i < n; ++i) {
      auto e = element("item" + std::to_string(all.size()), {0, 0, 100, 100}, r, r == RiskLevel::kNone ? 0 : 4);
      if (r == RiskLevel::kNone) e.category.reset();
      all.push_back(e);
    }
  };
  add(RiskLevel::kHigh, high);
  add(RiskLevel::kMedium, medium);
  add(RiskLevel::kLow, low);
  add(RiskLevel::kNone, none);
  for (int i = 0, tagged = 0; i < static_cast<int>(all.size()) && tagged < necessary; i += 2) {
    if (all[i].risky()) {
      all[i].necessity = Necessity::kNecessary;
      ++tagged;
    }
  }
  std::vector<Image> imgs;
  for (int s = 0; s < 4; ++s) {
    Step step;
    step.index = s;
    for (std::size_t k = s; k < all.size(); k += 4) step.elements.push_back(all[k]);
    t.steps.push_back(step);
    imgs.push_back(fixtures::noise_image(rng, 16, 16));
  }
  fixtures::write_trajectory(dir, t, imgs);
  return load_dataset(dir);
}

}  // namespace

TEST(Sweep, GradedFractionsOnSplitFixture) {
  fixtures::TempDir tmp;
  const auto ds = split_dataset(tmp.path(), 3, 12, 48, 37, 25);
  auto cfg = base_config(tmp.path());
  cfg.policies = graded_policies(Operator::kBlackMask, 0);
  const auto run = run_graded_sweep(cfg, ds);
  ASSERT_EQ(run.rows.size(), 4u);
  EXPECT_DOUBLE_EQ(*run.rows[0].total_fraction(), 3.0 / 63);
  EXPECT_DOUBLE_EQ(*run.rows[1].total_fraction(), 15.0 / 63);
  EXPECT_DOUBLE_EQ(*run.rows[2].total_fraction(), 1.0);
  EXPECT_DOUBLE_EQ(*run.rows[3].total_fraction(), 38.0 / 63);
  EXPECT_DOUBLE_EQ(*run.rows[1].fraction(RiskLevel::kMedium), 12.0 / 63);
  EXPECT_EQ(run.rows[0].screenshots, 4);
}

TEST(Sweep, AllRiskyFixtureGivesThreeQuarters) {
  fixtures::TempDir tmp;
  const auto ds = split_dataset(tmp.path(), 10, 30, 60, 0, 25);
  auto cfg = base_config(tmp.path());
  cfg.policies = graded_policies(Operator::kBlackMask, 0);
  EXPECT_DOUBLE_EQ(*run_graded_sweep(cfg, ds).rows[3].total_fraction(), 0.75);
}

TEST(Sweep, WritesImagesWhenAsked) {
  fixtures::TempDir tmp;
  const auto ds = split_dataset(tmp / "data", 3, 12, 48, 37, 25);
  auto cfg = base_config(tmp / "data");
  cfg.output_dir = tmp / "out";
  cfg.write_images = true;
  cfg.policies = graded_policies(Operator::kTextReplace, 0);
  run_graded_sweep(cfg, ds);
  for (auto s : kAllScopes) {
    for (int i = 0; i < 4; ++i) {
      EXPECT_TRUE(std::filesystem::exists(tmp / "out" / "images" / std::string(scope_name(s)) / "split" /
                                          ("step_" + std::to_string(i) + ".png")));
    }
  }
}

TEST(Sweep, EmptyPolicyListThrows) {
  fixtures::TempDir tmp;
  const auto ds = split_dataset(tmp.path(), 1, 1, 1, 1, 0);
  try {
    run_graded_sweep(base_config(tmp.path()), ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPolicyList);
  }
}
