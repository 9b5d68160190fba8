#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "guiguard/image.hpp"
#include "guiguard/model.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

guiguard::PrivacyElement element(std::string text, guiguard::BoundingBox box, guiguard::RiskLevel risk,
                                 int category = 1,
                                 guiguard::Necessity necessity = guiguard::Necessity::kNotNecessary);

guiguard::Image noise_image(std::mt19937_64& rng, int w, int h);
guiguard::BoundingBox random_box(std::mt19937_64& rng);
guiguard::PrivacyElement random_element(std::mt19937_64& rng);

// Writes <dir>/<id>/trajectory.json plus one PNG per step (step_<i>.png);
// the step's `image` field is overwritten. Returns the trajectory with root set.
guiguard::Trajectory write_trajectory(const std::filesystem::path& dataset_dir, guiguard::Trajectory t,
                                      const std::vector<guiguard::Image>& images);

// Scripted-endpoint rules keyed by each step image's SHA-256. The reply is the
// formatted element list chosen by `pick` (default: the step's risky elements).
using ElementPick = std::function<std::vector<guiguard::PrivacyElement>(const guiguard::Trajectory&,
                                                                        const guiguard::Step&)>;
nlohmann::json echo_script(const guiguard::Dataset& dataset, const ElementPick& pick = {});

// A small on-disk campaign: <dir>/data (two trajectories, two steps each,
// Android and PC), scripted recognition/planner/judge endpoints and
// <dir>/config.json tying them together with the four graded black-mask
// policies. Protected screenshots get a different scripted plan; the judge
// scores identical plans 4 and changed ones 2.
struct Campaign {
  std::filesystem::path config;
  guiguard::Dataset dataset;
};
Campaign write_campaign(const std::filesystem::path& dir);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
std::string read_text(const std::filesystem::path& path);

// Path to the built CLI binary (passed in by CMake).
std::filesystem::path cli_path();
// Runs a shell command line, returns its exit status; stdout+stderr go to `output`.
int run_command(const std::string& command, std::string* output = nullptr);

}  // namespace fixtures
