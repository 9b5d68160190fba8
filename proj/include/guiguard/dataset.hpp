#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "guiguard/model.hpp"

namespace guiguard {

inline constexpr const char* kManifestName = "trajectory.json";

// Loads every `<dir>/<sub>/trajectory.json` (subdirectories in name order).
// Throws Error{kSchemaViolation | kMissingImage | kDuplicateTrajectoryId}.
Dataset load_dataset(const std::filesystem::path& dir);

// Parses and validates one manifest; `root` is where images are resolved.
Trajectory load_trajectory(const std::filesystem::path& manifest);

// Writes one subdirectory per trajectory and copies referenced images
// from each trajectory's `root`. Throws Error{kIoFailure}.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

nlohmann::json element_to_json(const PrivacyElement& e);
// `where` prefixes schema-violation messages.
PrivacyElement element_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json trajectory_to_json(const Trajectory& t);

}  // namespace guiguard
