#include "fixtures.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "guiguard/codec.hpp"
#include "guiguard/dataset.hpp"
#include "guiguard/protocol.hpp"

namespace fixtures {

using namespace guiguard;

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "guiguard-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

PrivacyElement element(std::string text, BoundingBox box, RiskLevel risk, int category, Necessity necessity) {
  PrivacyElement e;
  e.text = std::move(text);
  e.bbox = box;
  e.risk = risk;
  if (risk != RiskLevel::kNone) e.category = category_from_index(category);
  e.necessity = necessity;
  return e;
}

Image noise_image(std::mt19937_64& rng, int w, int h) {
  Image img(w, h);
  std::uniform_int_distribution<int> d(0, 255);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)),
                     static_cast<std::uint8_t>(d(rng))});
    }
  }
  return img;
}

BoundingBox random_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, kGridMax);
  for (;;) {
    int x1 = d(rng), x2 = d(rng), y1 = d(rng), y2 = d(rng);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    if (x1 < x2 && y1 < y2) return {x1, y1, x2, y2};
  }
}

PrivacyElement random_element(std::mt19937_64& rng) {
  static const char* words[] = {"Alice", "Bob", "alice@mail.com", "+1 555 0100", "Order #42",
                                "Settings", "Wi-Fi", "Zürich", "北京", "IMEI 3520"};
  std::uniform_int_distribution<int> w(0, 9), r(0, 3), c(1, 6), n(0, 1), len(1, 3);
  std::string text;
  for (int i = len(rng); i > 0; --i) text += (text.empty() ? "" : " ") + std::string(words[w(rng)]);
  const auto risk = static_cast<RiskLevel>(r(rng));
  auto e = element(text, random_box(rng), risk, c(rng), n(rng) ? Necessity::kNecessary : Necessity::kNotNecessary);
  return e;
}

Trajectory write_trajectory(const std::filesystem::path& dataset_dir, Trajectory t,
                            const std::vector<Image>& images) {
  const auto dir = dataset_dir / t.id;
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    t.steps[i].image = "step_" + std::to_string(i) + ".png";
    save_png(images.at(i), dir / t.steps[i].image);
  }
  write_json(dir / kManifestName, trajectory_to_json(t));
  t.root = dir;
  return t;
}

nlohmann::json echo_script(const Dataset& dataset, const ElementPick& pick) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& t : dataset) {
    for (const auto& s : t.steps) {
      std::vector<PrivacyElement> reply;
      if (pick) {
        reply = pick(t, s);
      } else {
        for (const auto& e : s.elements)
          if (e.risky()) reply.push_back(e);
      }
      rules.push_back({{"image_sha256", codec::sha256_hex(read_file_bytes(t.image_path(s)))},
                       {"reply", protocol::format_elements(reply)}});
    }
  }
  return {{"rules", rules}, {"default", ""}};
}

Campaign write_campaign(const std::filesystem::path& dir) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 2; ++t) {
    Trajectory traj;
    traj.id = t == 0 ? "android-mail" : "pc-bank";
    traj.goal = t == 0 ? "Reply to the latest email" : "Check the account balance";
    traj.platform = t == 0 ? Platform::kAndroid : Platform::kPC;
    std::vector<Image> images;
    for (int s = 0; s < 2; ++s) {
      Step step;
      step.index = s;
      step.agent_response = "step " + std::to_string(s);
      step.elements = {element(t == 0 ? "Dana Whitfield" : "Acct 4417-2290", {80, 100, 700, 180},
                               RiskLevel::kHigh, t == 0 ? 1 : 2),
                       element("Inbox 3 unread", {80, 400, 600, 460}, RiskLevel::kLow, 4,
                               Necessity::kNecessary)};
      if (s == 1) step.elements.push_back(element("Settings", {0, 0, 200, 50}, RiskLevel::kNone, 0));
      if (s == 1) step.elements.back().category.reset();
      traj.steps.push_back(step);
      images.push_back(noise_image(rng, 72, 128));
    }
    write_trajectory(dir / "data", traj, images);
  }
  const Dataset ds = load_dataset(dir / "data");
  write_json(dir / "recognizer.json", echo_script(ds));

  nlohmann::json planner_rules = nlohmann::json::array();
  for (const auto& t : ds) {
    for (const auto& s : t.steps) {
      planner_rules.push_back({{"image_sha256", codec::sha256_hex(read_file_bytes(t.image_path(s)))},
                               {"reply", "tap the first list entry"}});
    }
  }
  // Baseline requests carry the raw screenshots; only those hit a rule.
  write_json(dir / "planner.json", {{"rules", planner_rules}, {"default", "tap the masked entry"}});
  write_json(dir / "judge.json",
             {{"rules", {{{"contains", "<<<PROTECTED\ntap the masked entry"}, {"reply", "Different target.\nSCORE: 2"}}}},
              {"default", "Same plan.\nSCORE: 4"}});

  auto endpoint = [](const std::string& name, const std::string& script) {
    return nlohmann::json{{"name", name}, {"base_url", "script:" + script}, {"model", name + "-model"},
                          {"backoff_initial_ms", 1}};
  };
  write_json(dir / "config.json",
             {{"dataset", "data"},
              {"output_dir", "out"},
              {"seed", 7},
              {"jobs", 2},
              {"recognition", endpoint("recognizer", "recognizer.json")},
              {"planners", {endpoint("planner-a", "planner.json"), endpoint("planner-b", "planner.json")}},
              {"judge", endpoint("judge", "judge.json")},
              {"policies", {"graded:black_mask"}}});
  return {dir / "config.json", ds};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << j.dump(2);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path cli_path() { return GUIGUARD_CLI_PATH; }

int run_command(const std::string& command, std::string* output) {
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return -1;
  std::array<char, 4096> buf{};
  std::string out;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  if (output) *output = std::move(out);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace fixtures
