#include "guiguard/harness.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "guiguard/dataset.hpp"
#include "guiguard/error.hpp"
#include "guiguard/image.hpp"

namespace guiguard {
namespace {

using json = nlohmann::json;

// Runs fn(0..n-1) on up to `jobs` threads; rethrows the lowest-index failure.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<PrivacyElement> risky_of(const std::vector<PrivacyElement>& elements) {
  std::vector<PrivacyElement> out;
  for (const auto& e : elements) {
    if (e.risky()) out.push_back(e);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return (path.is_relative() ? base / path : path).lexically_normal();
}

ChatImage chat_image(std::vector<std::uint8_t> bytes) {
  ChatImage img;
  img.mime = sniff_mime(bytes);
  img.bytes = std::move(bytes);
  return img;
}

std::string safe_name(std::string_view s) {
  std::string out;
  for (unsigned char c : s) out += std::isalnum(c) || c == '-' || c == '_' || c == '.' ? static_cast<char>(c) : '_';
  return out.empty() ? "_" : out;
}

}  // namespace

std::vector<ProtectionPolicy> graded_policies(Operator op, std::uint64_t seed) {
  std::vector<ProtectionPolicy> out;
  for (auto scope : kAllScopes) {
    ProtectionPolicy p;
    p.name = std::string(scope_name(scope));
    p.scope = scope;
    p.op = op;
    p.seed = seed;
    out.push_back(std::move(p));
  }
  return out;
}

RunConfig run_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  auto bad = [](const std::string& what) { return Error(ErrorCode::kConfigError, what); };
  if (!j.is_object()) throw bad("config must be a JSON object");
  RunConfig c;
  try {
    if (!j.contains("dataset")) throw bad("config field 'dataset' is required");
    c.dataset = resolve(base_dir, j.at("dataset").get<std::string>());
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.jobs = j.value("jobs", 1);
    if (c.jobs < 1) throw bad("config field 'jobs' must be >= 1");
    const auto mode = j.value("recognition_mode", std::string("joint"));
    auto strategy = parse_strategy(mode);
    if (!strategy) throw bad("config field 'recognition_mode' must be joint or decomposed");
    c.recognition_mode = *strategy;

    if (j.contains("match")) {
      const auto& m = j["match"];
      c.match.tau_text = m.value("tau_text", c.match.tau_text);
      c.match.tau_iou = m.value("tau_iou", c.match.tau_iou);
      c.match.case_fold = m.value("case_fold", c.match.case_fold);
      const auto cov = m.value("coverage", std::string("membership"));
      if (cov == "membership") {
        c.match.coverage = CoverageMode::kMembership;
      } else if (cov == "multiset") {
        c.match.coverage = CoverageMode::kMultiset;
      } else {
        throw bad("config field 'match.coverage' must be membership or multiset");
      }
      try {
        c.match.validate();
      } catch (const Error& e) {
        throw bad(std::string("config field 'match': ") + e.what());
      }
    }
    if (j.contains("recognition")) c.recognition = endpoint_from_json(j["recognition"], base_dir);
    if (j.contains("planners")) {
      std::set<std::string> names;
      for (const auto& p : j["planners"]) {
        c.planners.push_back(endpoint_from_json(p, base_dir));
        if (!names.insert(c.planners.back().name).second) {
          throw bad("duplicate planner name '" + c.planners.back().name + "'");
        }
      }
    }
    if (j.contains("judge")) c.judge = endpoint_from_json(j["judge"], base_dir);

    if (j.contains("policies")) {
      for (const auto& p : j["policies"]) {
        if (p.is_string()) {
          // "graded:<operator>" expands to the four graded scopes.
          const auto s = p.get<std::string>();
          auto op = s.rfind("graded:", 0) == 0 ? parse_operator(s.substr(7)) : std::nullopt;
          if (!op) throw bad("policy shorthand '" + s + "' must be graded:<operator>");
          for (auto& g : graded_policies(*op, c.seed)) {
            g.name += "/" + std::string(operator_name(*op));
            c.policies.push_back(std::move(g));
          }
          continue;
        }
        ProtectionPolicy pol;
        try {
          pol = policy_from_json(p);
        } catch (const Error& e) {
          throw bad(e.what());
        }
        if (!p.contains("seed")) pol.seed = c.seed;
        c.policies.push_back(std::move(pol));
      }
      std::set<std::string> names;
      for (const auto& p : c.policies) {
        if (p.name == kBaselineCondition) throw bad("policy name 'baseline' is reserved");
        if (!names.insert(p.name).second) throw bad("duplicate policy name '" + p.name + "'");
      }
    }
    c.max_history = j.value("max_history", c.max_history);
    if (c.max_history < 1) throw bad("config field 'max_history' must be >= 1");
    c.global_memory = j.value("global_memory", c.global_memory);
    c.write_images = j.value("write_images", c.write_images);
  } catch (const json::exception& e) {
    throw bad(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read config " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfigError, "config " + path.string() + " is not valid JSON");
  return run_config_from_json(j, std::filesystem::absolute(path).parent_path());
}

json run_config_to_json(const RunConfig& c) {
  json j = {{"dataset", c.dataset.string()},
            {"seed", c.seed},
            {"recognition_mode", strategy_name(c.recognition_mode)},
            {"match",
             {{"tau_text", c.match.tau_text},
              {"tau_iou", c.match.tau_iou},
              {"case_fold", c.match.case_fold},
              {"coverage", c.match.coverage == CoverageMode::kMultiset ? "multiset" : "membership"}}},
            {"max_history", c.max_history},
            {"global_memory", c.global_memory},
            {"judge_sees_images", false}};
  if (c.recognition) j["recognition"] = endpoint_to_json(*c.recognition);
  if (c.judge) j["judge"] = endpoint_to_json(*c.judge);
  j["planners"] = json::array();
  for (const auto& p : c.planners) j["planners"].push_back(endpoint_to_json(p));
  j["policies"] = json::array();
  for (const auto& p : c.policies) j["policies"].push_back(policy_to_json(p));
  return j;
}

// ---- recognition -----------------------------------------------------------

RecognitionRun run_recognition_eval(const RunConfig& config, const Dataset& dataset,
                                    const ModelClient& recognizer) {
  struct Slot {
    std::vector<metrics::ScreenshotEval> evals;
    std::vector<RecognitionDetail> details;
    std::vector<bool> ok;
  };
  std::vector<Slot> slots(dataset.size());
  parallel_for(dataset.size(), config.jobs, [&](std::size_t t) {
    const Trajectory& traj = dataset[t];
    for (const Step& step : traj.steps) {
      RecognitionDetail d{traj.id, step.index, {}, 0, 0, 0, std::nullopt};
      metrics::ScreenshotEval ev{traj.id, step.index, traj.platform, risky_of(step.elements), {}, {}};
      try {
        auto out = recognize(recognizer, chat_image(read_file_bytes(traj.image_path(step))), traj.goal,
                             step.agent_response, config.recognition_mode, &d.prompt_hashes);
        d.parse_errors = static_cast<int>(out.parse_errors.size());
        d.none_items = static_cast<int>(out.none_items.size());
        d.inconsistencies = static_cast<int>(out.inconsistencies.size());
        ev.pred = std::move(out.elements);
        ev.matches = assign_matches(ev.gt, ev.pred, config.match);
        slots[t].ok.push_back(true);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kIoFailure || e.code() == ErrorCode::kMissingImage) throw;
        d.error = std::string(error_code_name(e.code())) + ": " + e.what();
        slots[t].ok.push_back(false);
      }
      slots[t].evals.push_back(std::move(ev));
      slots[t].details.push_back(std::move(d));
    }
  });

  RecognitionRun run;
  std::vector<metrics::ScreenshotEval> good;
  std::map<std::string, std::vector<metrics::ScreenshotEval>> by_platform;
  std::map<std::string, long> failed_by_platform;
  long failed = 0;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    const std::string platform(platform_name(dataset[t].platform));
    for (std::size_t i = 0; i < slots[t].evals.size(); ++i) {
      if (!slots[t].ok[i]) {
        ++failed;
        ++failed_by_platform[platform];
        continue;
      }
      good.push_back(slots[t].evals[i]);
      by_platform[platform].push_back(slots[t].evals[i]);
    }
    for (auto& d : slots[t].details) run.details.push_back(std::move(d));
  }
  run.all = metrics::compute_report(good);
  run.all.counts.failed_screenshots = failed;
  for (const auto& t : dataset) by_platform[std::string(platform_name(t.platform))];
  for (auto& [name, evals] : by_platform) {
    run.by_platform[name] = metrics::compute_report(evals);
    run.by_platform[name].counts.failed_screenshots = failed_by_platform[name];
  }
  return run;
}

RecognitionRun run_recognition_eval(const RunConfig& config) {
  if (!config.recognition) throw Error(ErrorCode::kConfigError, "config has no 'recognition' endpoint");
  const Dataset dataset = load_dataset(config.dataset);
  const ModelClient client(*config.recognition);
  return run_recognition_eval(config, dataset, client);
}

// ---- planner replay ----------------------------------------------------------

std::string build_planner_prompt(std::string_view goal, int step, const std::vector<std::string>& history) {
  std::string out;
  out += "You are the planning module of a GUI agent. Decide the next action toward the task goal.\n\n";
  out += "Task goal:\n";
  out += goal;
  out += "\n\nPlans from previous steps:\n";
  if (history.empty()) out += "(none)\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += "Step " + std::to_string(i + 1) + ": " + history[i] + "\n";
  }
  out += "\nThis is step " + std::to_string(step + 1) +
         ". The attached screenshots are in chronological order; the last one is the current screen.\n"
         "Describe the next action to take (which element to operate and how) and briefly why.\n";
  return out;
}

PlanLog run_planner_replay(const Trajectory& trajectory, const ProtectionPolicy* protection,
                           const ModelClient& planner, const PlanLog* baseline,
                           const ReplayOptions& options, ReplacementMemory* memory) {
  if (trajectory.steps.empty()) throw Error(ErrorCode::kInvalidArgument, "trajectory " + trajectory.id + " has no steps");
  if (options.max_history < 1) throw Error(ErrorCode::kInvalidArgument, "max_history must be >= 1");
  if (protection && (!baseline || baseline->trajectory_id != trajectory.id)) {
    throw Error(ErrorCode::kMissingBaseline, "protected replay of " + trajectory.id + " needs its baseline log");
  }
  std::optional<ReplacementMemory> local_memory;
  if (protection && protection->op == Operator::kTextReplace && !memory) {
    local_memory.emplace(trajectory.id);
    memory = &*local_memory;
  }

  PlanLog log{planner.endpoint().name, trajectory.id,
              protection ? protection->name : std::string(kBaselineCondition), {}};
  std::vector<ChatImage> screens;
  std::vector<std::string> own_history;
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const Step& step = trajectory.steps[i];
    auto bytes = read_file_bytes(trajectory.image_path(step));
    if (protection) {
      bytes = encode_png(protect(decode_image(bytes), step.elements, *protection, memory).image);
    }
    screens.push_back(chat_image(std::move(bytes)));

    std::vector<std::string> history;
    if (protection) {
      for (std::size_t k = 0; k < i; ++k) {
        const PlanRecord* rec = k < baseline->records.size() ? &baseline->records[k] : nullptr;
        history.push_back(rec && !rec->failed ? rec->plan : std::string(kFailedStepMarker));
      }
    } else {
      history = own_history;
    }

    ChatRequest req;
    ChatMessage msg{"user", build_planner_prompt(trajectory.goal, static_cast<int>(i), history), {}};
    const std::size_t first = i + 1 > static_cast<std::size_t>(options.max_history) ? i + 1 - options.max_history : 0;
    for (std::size_t k = first; k <= i; ++k) msg.images.push_back(screens[k]);
    req.messages.push_back(std::move(msg));

    PlanRecord rec;
    rec.trajectory_id = trajectory.id;
    rec.step = step.index;
    rec.condition = log.condition;
    rec.prompt_hash = request_hash(build_wire_request(planner.endpoint(), req));
    rec.text_hash = request_text_hash(req);
    try {
      const auto resp = planner.complete(req);
      rec.plan = resp.text;
      rec.latency_ms = resp.latency_ms;
    } catch (const Error& e) {
      rec.failed = true;
      rec.plan = kFailedStepMarker;
      rec.error = std::string(error_code_name(e.code())) + ": " + e.what();
    }
    own_history.push_back(rec.failed ? std::string(kFailedStepMarker) : rec.plan);
    log.records.push_back(std::move(rec));
  }
  return log;
}

// ---- fidelity ----------------------------------------------------------------

FidelityRun run_fidelity_eval(const RunConfig& config, const Dataset& dataset,
                              const std::vector<std::pair<std::string, ModelClient>>& planners,
                              const ModelClient& judge_client) {
  if (config.policies.empty()) throw Error(ErrorCode::kEmptyPolicyList, "fidelity run needs at least one policy");
  struct Slot {
    std::vector<PlanLog> logs;
    std::vector<metrics::FidelityRecord> records;
    std::vector<JudgeFailure> failures;
    std::map<std::string, std::pair<long, long>> judged;  // method -> (judged, total)
  };
  FidelityRun run;
  const ReplayOptions options{config.max_history};

  for (const auto& [model, planner] : planners) {
    std::vector<std::unique_ptr<ReplacementMemory>> shared;
    for (const auto& p : config.policies) {
      shared.push_back(config.global_memory ? std::make_unique<ReplacementMemory>(model + "/" + p.name) : nullptr);
    }
    std::vector<Slot> slots(dataset.size());
    parallel_for(dataset.size(), config.global_memory ? 1 : config.jobs, [&](std::size_t t) {
      const Trajectory& traj = dataset[t];
      Slot& slot = slots[t];
      PlanLog base = run_planner_replay(traj, nullptr, planner, nullptr, options);
      for (std::size_t pi = 0; pi < config.policies.size(); ++pi) {
        const ProtectionPolicy& policy = config.policies[pi];
        PlanLog prot = run_planner_replay(traj, &policy, planner, &base, options, shared[pi].get());
        auto& [judged, total] = slot.judged[policy.name];
        for (std::size_t s = 0; s < traj.steps.size(); ++s) {
          ++total;
          const PlanRecord& b = base.records[s];
          const PlanRecord& p = prot.records[s];
          JudgeFailure fail{model, policy.name, traj.id, b.step, {}};
          if (b.failed) {
            fail.reason = "baseline step failed: " + b.error;
          } else if (p.failed) {
            fail.reason = "protected step failed: " + p.error;
          } else {
            try {
              const auto verdict = judge(judge_client, traj.goal, b.plan, p.plan);
              slot.records.push_back({model, policy.name, traj.platform, traj.id, b.step,
                                      static_cast<double>(verdict.score)});
              ++judged;
              continue;
            } catch (const Error& e) {
              fail.reason = std::string(error_code_name(e.code())) + ": " + e.what();
            }
          }
          slot.failures.push_back(std::move(fail));
        }
        slot.logs.push_back(std::move(prot));
      }
      slot.logs.insert(slot.logs.begin(), std::move(base));
    });

    std::map<std::string, std::pair<long, long>> judged;
    for (auto& slot : slots) {
      for (auto& l : slot.logs) run.plan_logs.push_back(std::move(l));
      for (auto& r : slot.records) run.records.push_back(std::move(r));
      for (auto& f : slot.failures) run.failures.push_back(std::move(f));
      for (const auto& [m, c] : slot.judged) {
        judged[m].first += c.first;
        judged[m].second += c.second;
      }
    }
    for (const auto& p : config.policies) {
      const auto& [n, total] = judged[p.name];
      run.coverage[model][p.name] = total ? static_cast<double>(n) / total : 0.0;
    }
  }
  if (!run.records.empty()) run.table = metrics::fidelity_aggregate(run.records);
  return run;
}

FidelityRun run_fidelity_eval(const RunConfig& config) {
  if (config.planners.empty()) throw Error(ErrorCode::kConfigError, "config has no 'planners'");
  if (!config.judge) throw Error(ErrorCode::kConfigError, "config has no 'judge' endpoint");
  if (config.policies.empty()) throw Error(ErrorCode::kEmptyPolicyList, "config has no 'policies'");
  const Dataset dataset = load_dataset(config.dataset);
  std::vector<std::pair<std::string, ModelClient>> planners;
  for (const auto& p : config.planners) planners.emplace_back(p.name, ModelClient(p));
  const ModelClient judge_client(*config.judge);
  return run_fidelity_eval(config, dataset, planners, judge_client);
}

// ---- graded sweep --------------------------------------------------------------

std::optional<double> SweepRow::fraction(RiskLevel r) const {
  if (r == RiskLevel::kNone || risky_total == 0) return std::nullopt;
  return static_cast<double>(selected_by_risk[static_cast<int>(r)]) / risky_total;
}

std::optional<double> SweepRow::total_fraction() const {
  if (risky_total == 0) return std::nullopt;
  return static_cast<double>(selected_by_risk[0] + selected_by_risk[1] + selected_by_risk[2]) / risky_total;
}

SweepRun run_graded_sweep(const RunConfig& config, const Dataset& dataset) {
  if (config.policies.empty()) throw Error(ErrorCode::kEmptyPolicyList, "graded sweep needs at least one policy");
  SweepRun run;
  for (const auto& policy : config.policies) {
    SweepRow row{policy, {}, 0, 0};
    std::vector<std::array<long, 3>> selected(dataset.size());
    std::vector<long> risky(dataset.size(), 0), shots(dataset.size(), 0);
    parallel_for(dataset.size(), config.jobs, [&](std::size_t t) {
      const Trajectory& traj = dataset[t];
      ReplacementMemory memory(traj.id);
      for (const Step& step : traj.steps) {
        ++shots[t];
        for (const auto& e : step.elements) risky[t] += e.risky();
        for (const auto& e : select_regions(step.elements, policy.scope)) {
          ++selected[t][static_cast<int>(e.risk)];
        }
        if (config.write_images) {
          const auto out = protect(load_image(traj.image_path(step)), step.elements, policy, &memory);
          const auto dir = config.output_dir / "images" / safe_name(policy.name) / safe_name(traj.id);
          std::filesystem::create_directories(dir);
          save_png(out.image, dir / (std::filesystem::path(step.image).stem().string() + ".png"));
        }
      }
    });
    for (std::size_t t = 0; t < dataset.size(); ++t) {
      for (int r = 0; r < 3; ++r) row.selected_by_risk[r] += selected[t][r];
      row.risky_total += risky[t];
      row.screenshots += shots[t];
    }
    run.rows.push_back(std::move(row));
  }
  return run;
}

SweepRun run_graded_sweep(const RunConfig& config) {
  return run_graded_sweep(config, load_dataset(config.dataset));
}

}  // namespace guiguard
